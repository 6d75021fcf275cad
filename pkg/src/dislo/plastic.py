"""Plastic distortion field and its determinant-preserving evolution.

The per-node ODE dR/dt = D(t, x, R) is integrated multiplicatively:

    B    = R^-1 D          (trace-free, so exp(dt B) has determinant one)
    R   <- R exp(dt * B(t_mid, R_pred))

with a half-step exponential predictor R_pred (commutator-free midpoint,
order 2).  The drift is

    D(t, x, R) = sum_reps  b  (x)  proj_{<R^-1 b> perp}[ g^b(t, x) ]

where the half-weighted sum over +-b pairs collapses to one term per stored
representative.  Slip rates g are sampled at substep midpoints only.
"""

from dataclasses import dataclass

import numpy as np

from . import slipfield
from ._kernels import _det3_batch, flow_substep
from .currents import SlipTrajectory, trajectory_variation
from .grid import Grid
from .multivec import proj_perp
from .slipfield import BurgersTable, Mollifier


@dataclass
class PlasticField:
    """Unit-determinant 3x3 matrices at every grid node."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (*self.grid.shape, 3, 3):
            raise ValueError("plastic field shape does not match the grid")

    @classmethod
    def identity(cls, grid: Grid):
        vals = np.zeros((*grid.shape, 3, 3))
        vals[..., 0, 0] = vals[..., 1, 1] = vals[..., 2, 2] = 1.0
        return cls(grid=grid, values=vals)

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1, 3, 3)

    def copy(self):
        return PlasticField(self.grid, self.values.copy())


def det_residual(field: PlasticField) -> float:
    """Max over nodes of |det P - 1|."""
    return float(np.abs(_det3_batch(field.flat()) - 1.0).max())


@dataclass
class DriftEvaluation:
    value: np.ndarray          # D
    generator: np.ndarray      # B = R^-1 D
    trace_residual: float


def drift(g_vectors, table: BurgersTable, R) -> DriftEvaluation:
    """Total plastic drift at one point from per-representative normal rates."""
    R = np.asarray(R, dtype=float)
    g_vectors = np.atleast_2d(np.asarray(g_vectors, dtype=float))
    det = float(np.linalg.det(R))
    if det <= 0.0:
        raise ValueError("drift needs det R > 0")
    Rinv = np.linalg.inv(R)
    D = np.zeros((3, 3))
    for b, g in zip(table.representatives, g_vectors):
        D += np.outer(b, proj_perp(Rinv @ b, g))
    B = Rinv @ D
    return DriftEvaluation(value=D, generator=B, trace_residual=abs(float(np.trace(B))))


@dataclass
class PlasticPath:
    """Snapshots of the field at the substep grid of one integration."""

    times: np.ndarray
    fields: list
    max_trace_residual: float

    def endpoint(self) -> PlasticField:
        return self.fields[-1]

    def sample_flat(self, t: float) -> np.ndarray:
        """Linear interpolation between substep snapshots, flat (n, 3, 3)."""
        times = self.times
        if t <= times[0]:
            return self.fields[0].flat()
        if t >= times[-1]:
            return self.fields[-1].flat()
        j = int(np.searchsorted(times, t, side="right") - 1)
        s = (t - times[j]) / (times[j + 1] - times[j])
        return (1.0 - s) * self.fields[j].flat() + s * self.fields[j + 1].flat()


def _as_rates(traj_or_rates, grid, table, eta, n_gauss):
    if callable(traj_or_rates):
        return traj_or_rates
    if isinstance(traj_or_rates, SlipTrajectory):
        if table is None or eta is None:
            raise ValueError("integrating a trajectory needs a Burgers table and mollifier")
        return slipfield.flow_rates(traj_or_rates, grid, eta, table, n_gauss)
    raise TypeError("expected a SlipTrajectory or a rate callable")


def integrate_P(P0: PlasticField, traj_or_rates, table: BurgersTable = None,
                eta: Mollifier = None, interval=(0.0, 1.0), substeps: int = 8,
                n_gauss: int = 2, times=None) -> PlasticPath:
    """March the plastic ODE over the interval; returns the substep path.

    The initial field must have unit determinant; the update is the
    exponential of a trace-free generator, so the determinant is preserved to
    roundoff for the whole path.  A non-uniform substep partition can be
    passed explicitly (e.g. the image grid of a reparameterized problem)."""
    if table is None:
        raise ValueError("integrate_P needs the Burgers table")
    if times is None:
        if substeps < 1:
            raise ValueError("need at least one substep")
        t0, t1 = interval
        times = t0 + (t1 - t0) / substeps * np.arange(substeps + 1)
    else:
        times = np.asarray(times, dtype=float)
        if times.size < 2 or np.any(np.diff(times) <= 0):
            raise ValueError("substep times must be strictly increasing")
    res0 = det_residual(P0)
    if res0 > 1e-8:
        raise ValueError(f"initial field determinant off unit by {res0:.3e}")
    rates = _as_rates(traj_or_rates, P0.grid, table, eta, n_gauss)
    bvecs = np.ascontiguousarray(table.representatives)
    P = P0.flat().copy()
    fields = [P0.copy()]
    worst = 0.0
    for i in range(times.size - 1):
        dt = times[i + 1] - times[i]
        g_mid = np.ascontiguousarray(rates(times[i] + 0.5 * dt))
        P, res = flow_substep(P, g_mid, bvecs, dt)
        worst = max(worst, res)
        fields.append(PlasticField(P0.grid, P.reshape(*P0.grid.shape, 3, 3).copy()))
    return PlasticPath(times=times, fields=fields, max_trace_residual=worst)


def plastic_forward(P0: PlasticField, traj_or_rates, table: BurgersTable = None,
                    eta: Mollifier = None, substeps: int = 8,
                    n_gauss: int = 2) -> PlasticField:
    """Endpoint of the unit-interval integration."""
    interval = (0.0, 1.0)
    if isinstance(traj_or_rates, SlipTrajectory):
        interval = traj_or_rates.interval
    path = integrate_P(P0, traj_or_rates, table, eta, interval, substeps, n_gauss)
    return path.endpoint()


def renormalize_det(values: np.ndarray) -> np.ndarray:
    """Scale matrices by det^(-1/3); restores unit determinant after interpolation."""
    det = _det3_batch(values)
    return values / np.cbrt(det)[..., None, None]


def interpolate_to_points(field_values: np.ndarray, grid: Grid, pts: np.ndarray,
                          renormalize: bool = True) -> np.ndarray:
    """Trilinear interpolation of a nodal (..., 3, 3) field to arbitrary points.

    Interpolation does not commute with det, so the result is projected back
    to unit determinant unless disabled."""
    vals = field_values.reshape(*grid.shape, 3, 3)
    n = grid.n_cells
    xi = np.clip(pts / grid.h, 0.0, n)
    i0 = np.minimum(xi.astype(int), n - 1)
    w = xi - i0
    out = np.zeros((pts.shape[0], 3, 3))
    for dx in (0, 1):
        wx = w[:, 0] if dx else 1.0 - w[:, 0]
        for dy in (0, 1):
            wy = w[:, 1] if dy else 1.0 - w[:, 1]
            for dz in (0, 1):
                wz = w[:, 2] if dz else 1.0 - w[:, 2]
                out += (wx * wy * wz)[:, None, None] * vals[i0[:, 0] + dx,
                                                            i0[:, 1] + dy,
                                                            i0[:, 2] + dz]
    if renormalize:
        out = renormalize_det(out)
    return out


def _w1q_norm(delta: np.ndarray, grid: Grid, q: float) -> float:
    """Discrete W^{1,q} norm of a nodal matrix field difference."""
    vals = delta.reshape(*grid.shape, 3, 3)
    h = grid.h
    vol = grid.cell_volume()
    fro = np.sqrt((vals * vals).sum(axis=(-2, -1)))
    total = (fro ** q).sum() * vol
    for axis in range(3):
        dv = np.diff(vals, axis=axis) / h
        dfro = np.sqrt((dv * dv).sum(axis=(-2, -1)))
        total += (dfro ** q).sum() * vol
    return float(total ** (1.0 / q))


@dataclass
class PChangeReport:
    sup_norm: float
    w1q_norm: float
    variation: float
    sup_ratio: float           # nan when the variation vanishes
    w1q_ratio: float


def p_change_bound(path: PlasticPath, traj: SlipTrajectory, q: float = 4.0) -> PChangeReport:
    """Empirical constants for |P(t) - P0| <= C Var(Sigma; [0, t])."""
    P0 = path.fields[0].flat()
    sup = 0.0
    w1q = 0.0
    for fld in path.fields[1:]:
        delta = fld.flat() - P0
        sup = max(sup, float(np.sqrt((delta * delta).sum(axis=(-2, -1))).max()))
        w1q = max(w1q, _w1q_norm(delta, path.fields[0].grid, q))
    var = trajectory_variation(traj)
    if var > 0.0:
        return PChangeReport(sup, w1q, var, sup / var, w1q / var)
    return PChangeReport(sup, w1q, var, float("nan"), float("nan"))


def write_pfield_csv(path, field: PlasticField):
    """Field dump: node coords, the 9 entries of P, det residual."""
    pts = field.grid.points()
    flat = field.flat()
    det = _det3_batch(flat)
    with open(path, "w") as fh:
        fh.write("x,y,z,p11,p12,p13,p21,p22,p23,p31,p32,p33,det_residual\n")
        for p, M, d in zip(pts, flat, det):
            entries = ",".join(repr(float(v)) for v in M.ravel())
            fh.write(f"{float(p[0])!r},{float(p[1])!r},{float(p[2])!r},"
                     f"{entries},{abs(float(d) - 1.0)!r}\n")


def read_pfield_csv(path, grid: Grid) -> PlasticField:
    rows = np.genfromtxt(path, delimiter=",", skip_header=1, ndmin=2)
    vals = rows[:, 3:12].reshape(*grid.shape, 3, 3)
    return PlasticField(grid=grid, values=vals)
