"""Polyconvex elastic energy with inner finite-element minimization.

Density: W(E) = |E|^r + 1/det(E) for det(E) > 0, +infinity otherwise.  The
total deformation lives on a trilinear hexahedral mesh over the unit cube
with prescribed (affine) boundary values; the plastic field is interpolated
to the Gauss points and projected back to unit determinant there.

The inner solve is plain gradient descent with Armijo backtracking: trial
steps whose quadrature determinant falls to the barrier floor evaluate to
+infinity and are rejected, so every accepted state is orientation
preserving at all quadrature points.
"""

from dataclasses import dataclass

import numpy as np

from ._kernels import _cof3_batch, _det3_batch, elastic_energy_grad
from .currents import DislocationSystem, system_mass
from .plastic import PlasticField, interpolate_to_points


class InitializationError(RuntimeError):
    """Warm start has infinite energy; descent cannot begin."""


@dataclass
class ElasticDensityParams:
    """Growth exponent r of |E|^r; the barrier 1/det(E) is fixed."""

    r: float = 6.0

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("growth exponent must be positive")


def elastic_density(E, params: ElasticDensityParams) -> float:
    """|E|^r + 1/det E for det E > 0, +inf otherwise (legal return)."""
    E = np.asarray(E, dtype=float)
    det = float(np.linalg.det(E))
    if det <= 0.0:
        return np.inf
    return float(np.sum(E * E) ** (params.r / 2.0) + 1.0 / det)


def _gauss01(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


class HexMesh:
    """Uniform trilinear hexahedral mesh on the closed unit cube."""

    def __init__(self, n_cells: int, order: int = 2):
        if n_cells < 1:
            raise ValueError("mesh needs at least one cell per axis")
        self.n_cells = n_cells
        self.h = 1.0 / n_cells
        n = n_cells + 1
        ax = np.linspace(0.0, 1.0, n)
        X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
        self.nodes = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
        self.n_nodes = self.nodes.shape[0]

        def nid(i, j, k):
            return (i * n + j) * n + k

        cells = []
        for i in range(n_cells):
            for j in range(n_cells):
                for k in range(n_cells):
                    cells.append([nid(i + di, j + dj, k + dk)
                                  for di in (0, 1) for dj in (0, 1) for dk in (0, 1)])
        self.conn = np.asarray(cells, dtype=np.int64)

        interior = (X > 0) & (X < 1) & (Y > 0) & (Y < 1) & (Z > 0) & (Z < 1)
        self.interior_mask = interior.ravel()

        self.order = order
        self.N, self.gradN, self.qw = self._tabulate(order)
        # per-quadrature-point volume factor; order 2 has uniform weights 1/8
        self.detJ = self.h ** 3 / self.qw.size
        # physical quadrature coordinates (ne, nq, 3)
        corner = self.nodes[self.conn[:, 0]]
        gx, _ = _gauss01(order)
        pts = np.array([[x, y, z] for x in gx for y in gx for z in gx])
        self.qpoints = corner[:, None, :] + self.h * pts[None, :, :]

    def _tabulate(self, order):
        gx, gw = _gauss01(order)
        pts = [(x, y, z) for x in gx for y in gx for z in gx]
        wts = [wx * wy * wz for wx in gw for wy in gw for wz in gw]
        nq = len(pts)
        N = np.empty((nq, 8))
        gradN = np.empty((nq, 8, 3))
        corners = [(di, dj, dk) for di in (0, 1) for dj in (0, 1) for dk in (0, 1)]
        for q, (x, y, z) in enumerate(pts):
            for a, (di, dj, dk) in enumerate(corners):
                fx = x if di else 1.0 - x
                fy = y if dj else 1.0 - y
                fz = z if dk else 1.0 - z
                dfx = 1.0 if di else -1.0
                dfy = 1.0 if dj else -1.0
                dfz = 1.0 if dk else -1.0
                N[q, a] = fx * fy * fz
                gradN[q, a] = (dfx * fy * fz / self.h,
                               fx * dfy * fz / self.h,
                               fx * fy * dfz / self.h)
        return N, gradN, np.asarray(wts)


@dataclass
class DeformationField:
    """Nodal map values; boundary rows carry the prescribed trace."""

    mesh: HexMesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_nodes, 3):
            raise ValueError("deformation values must be nodal 3-vectors")

    def copy(self):
        return DeformationField(self.mesh, self.values.copy())


def affine_field(mesh: HexMesh, A=None, c=None) -> DeformationField:
    """Nodal interpolant of x -> A x + c (identity trace by default)."""
    A = np.eye(3) if A is None else np.asarray(A, dtype=float)
    c = np.zeros(3) if c is None else np.asarray(c, dtype=float)
    return DeformationField(mesh, mesh.nodes @ A.T + c)


# ---------------------------------------------------------------------------
# loading


@dataclass
class Ramp:
    """Scalar ramp with analytic derivative: rate * t^power."""

    rate: float = 1.0
    power: int = 1

    def value(self, t: float) -> float:
        return self.rate * t ** self.power

    def derivative(self, t: float) -> float:
        if self.power == 0:
            return 0.0
        return self.rate * self.power * t ** (self.power - 1)


@dataclass
class Loading:
    """Separable body force f(t, x) = ramp(t) * f1(x)."""

    profile: object            # callable (n, 3) points -> (n, 3) values
    ramp: Ramp

    def f1_at(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(self.profile(pts), dtype=float)


def constant_profile(vector):
    vec = np.asarray(vector, dtype=float)

    def f1(pts):
        return np.broadcast_to(vec, (*pts.shape[:-1], 3)).copy()

    return f1


def shear_profile(amplitude, force_axis=0, gradient_axis=2):
    """f1(x) = amplitude * (x[gradient_axis] - 1/2) e_{force_axis}."""

    def f1(pts):
        out = np.zeros((*pts.shape[:-1], 3))
        out[..., force_axis] = amplitude * (pts[..., gradient_axis] - 0.5)
        return out

    return f1


def zero_loading() -> Loading:
    return Loading(profile=constant_profile((0.0, 0.0, 0.0)), ramp=Ramp(rate=0.0))


# ---------------------------------------------------------------------------
# assembly helpers


def _pinv_at_qp(P: PlasticField, mesh: HexMesh) -> np.ndarray:
    """Inverse of the renormalized interpolated plastic field at Gauss points.

    det = 1 after renormalization, so the inverse is the transposed cofactor."""
    pts = mesh.qpoints.reshape(-1, 3)
    Pq = interpolate_to_points(P.values, P.grid, pts, renormalize=True)
    pinv = np.swapaxes(_cof3_batch(Pq), -1, -2)
    return np.ascontiguousarray(pinv.reshape(mesh.qpoints.shape[0], -1, 3, 3))


def _load_at_qp(mesh: HexMesh, loading: Loading, t: float) -> np.ndarray:
    if loading is None:
        return np.zeros((mesh.qpoints.shape[0], mesh.N.shape[0], 3))
    return loading.ramp.value(t) * loading.f1_at(mesh.qpoints)


def objective_and_grad(y: DeformationField, Pinv_q, params, fvals,
                       det_floor=1e-6, want_grad=True):
    """W_e(y, P) - <f, y> and its nodal gradient (8-point Gauss kernel)."""
    mesh = y.mesh
    if mesh.order != 2:
        raise ValueError("the assembly kernel is tabulated for 2-point Gauss")
    return elastic_energy_grad(y.values, mesh.conn, mesh.gradN, mesh.N,
                               mesh.detJ, Pinv_q, params.r, det_floor, fvals,
                               want_grad)


def elastic_energy(y: DeformationField, P: PlasticField,
                   params: ElasticDensityParams, order: int = 2) -> float:
    """Gauss quadrature of the density W(grad y P^-1); +inf past the barrier."""
    if order == y.mesh.order == 2:
        Pinv_q = _pinv_at_qp(P, y.mesh)
        fvals = np.zeros((y.mesh.qpoints.shape[0], y.mesh.N.shape[0], 3))
        e, _, _ = objective_and_grad(y, Pinv_q, params, fvals, want_grad=False)
        return e
    mesh = HexMesh(y.mesh.n_cells, order=order)
    ye = y.values[mesh.conn]
    F = np.einsum("eai,qak->eqik", ye, mesh.gradN)
    pts = mesh.qpoints.reshape(-1, 3)
    Pq = interpolate_to_points(P.values, P.grid, pts, renormalize=True)
    Pinv = np.swapaxes(_cof3_batch(Pq), -1, -2).reshape(F.shape)
    E = F @ Pinv
    det = _det3_batch(E)
    if det.min() <= 0.0:
        return np.inf
    dens = (E * E).sum(axis=(-2, -1)) ** (params.r / 2.0) + 1.0 / det
    return float((dens * mesh.qw[None, :]).sum()) * mesh.h ** 3


def load_pairing(y: DeformationField, loading: Loading, t: float) -> float:
    """<f(t), y> = ramp(t) * integral f1 . y dx by mesh quadrature."""
    if loading is None:
        return 0.0
    mesh = y.mesh
    yq = np.einsum("eai,qa->eqi", y.values[mesh.conn], mesh.N)
    f1 = loading.f1_at(mesh.qpoints)
    return loading.ramp.value(t) * float((f1 * yq).sum()) * mesh.detJ


def spatial_pairing(y: DeformationField, loading: Loading) -> float:
    """integral f1 . y dx (the ramp factor taken out)."""
    if loading is None:
        return 0.0
    mesh = y.mesh
    yq = np.einsum("eai,qa->eqi", y.values[mesh.conn], mesh.N)
    f1 = loading.f1_at(mesh.qpoints)
    return float((f1 * yq).sum()) * mesh.detJ


@dataclass
class MinimizeResult:
    field: DeformationField
    objective: float           # W_e - <f, y>
    elastic: float
    load: float                # -<f, y>
    iterations: int
    converged: bool
    grad_norm: float


def minimize_elastic(P: PlasticField, params: ElasticDensityParams,
                     warm: DeformationField, loading: Loading = None,
                     t: float = 0.0, gtol: float = 1e-6, max_iter: int = 5000,
                     det_floor: float = 1e-6) -> MinimizeResult:
    """Approximate minimizer of W_e(., P) - <f(t), .> over interior nodes.

    Gradient descent with Armijo backtracking; monotone by construction, so
    the result never exceeds the warm-start energy."""
    mesh = warm.mesh
    Pinv_q = _pinv_at_qp(P, mesh)
    fvals = _load_at_qp(mesh, loading, t)
    y = warm.copy()
    interior = mesh.interior_mask

    obj, grad, _ = objective_and_grad(y, Pinv_q, params, fvals, det_floor)
    if not np.isfinite(obj):
        raise InitializationError("warm start violates the determinant barrier")

    alpha = 1e-3
    prev_step = None           # for the Barzilai-Borwein trial step
    prev_dgrad = None
    it = 0
    gnorm = np.inf
    while it < max_iter:
        d = np.where(interior[:, None], grad, 0.0)
        gnorm = float(np.abs(d).max())
        if gnorm < gtol:
            break
        slope = float((d * d).sum())
        # spectral (BB1) trial step, Armijo-safeguarded; plain descent otherwise
        if prev_step is not None:
            denom = float((prev_step * prev_dgrad).sum())
            if denom > 0.0:
                alpha = min(max(float((prev_step * prev_step).sum()) / denom,
                                1e-12), 1e2)
        accepted = False
        for _ in range(60):
            trial = y.values - alpha * d
            e_try, g_try, _ = objective_and_grad(
                DeformationField(mesh, trial), Pinv_q, params, fvals, det_floor)
            if np.isfinite(e_try) and e_try <= obj - 1e-4 * alpha * slope:
                prev_step = trial - y.values
                prev_dgrad = g_try - grad
                y = DeformationField(mesh, trial)
                obj, grad = e_try, g_try
                accepted = True
                break
            alpha *= 0.5
        it += 1
        if not accepted:
            break
    load = -load_pairing(y, loading, t)
    return MinimizeResult(field=y, objective=obj, elastic=obj - load, load=load,
                          iterations=it, converged=gnorm < gtol, grad_norm=gnorm)


# ---------------------------------------------------------------------------
# core and total energy


def core_energy(system: DislocationSystem, zeta: float) -> float:
    """zeta times the joint dislocation mass (atomistic line energy)."""
    if zeta <= 0:
        raise ValueError("core energy strength must be positive")
    return zeta * system_mass(system)


@dataclass
class EnergyBreakdown:
    elastic: float
    load: float                # -<f(t), y>, entering the total additively
    core: float
    total: float


def total_energy(t: float, y: DeformationField, P: PlasticField,
                 system: DislocationSystem, params: ElasticDensityParams,
                 zeta: float, loading: Loading = None) -> EnergyBreakdown:
    el = elastic_energy(y, P, params)
    ld = -load_pairing(y, loading, t)
    co = core_energy(system, zeta)
    return EnergyBreakdown(elastic=el, load=ld, core=co, total=el + ld + co)


# ---------------------------------------------------------------------------
# coercivity certificate


@dataclass
class CoercivityReport:
    energy: float
    lower_bound: float
    margin: float
    constant: float
    s: float


def coercivity_check(t, y: DeformationField, P: PlasticField,
                     system: DislocationSystem, params: ElasticDensityParams,
                     zeta: float, loading: Loading = None, p: float = 4.0,
                     boundary_A=None, boundary_c=None) -> CoercivityReport:
    """Evaluate E >= C^-1 (||y||_{W^{1,p}}^p + M(Phi)) - C (||P||_s^s + ||f||^{p'} + 1).

    The constant comes from the Young-inequality chain: |grad y| <= |E| |P|
    splits as |grad y|^p <= (1/2)|E|^r + (c_P/2)|P|^s with 1/s = 1/p - 1/r,
    the load pairing is absorbed with a second Young step, and the lower-order
    term of ||y||_{W^{1,p}} is controlled along coordinate lines against the
    affine boundary lift."""
    r = params.r
    if not r > p:
        raise ValueError("coercivity chain needs r > p")
    s = p * r / (r - p)
    mesh = y.mesh

    # quadrature values shared with the energy itself
    ye = y.values[mesh.conn]
    F = np.einsum("eai,qak->eqik", ye, mesh.gradN)
    yq = np.einsum("eai,qa->eqi", ye, mesh.N)
    pts = mesh.qpoints.reshape(-1, 3)
    Pq = interpolate_to_points(P.values, P.grid, pts, renormalize=True)

    vol = mesh.detJ
    grad_p = float(((F * F).sum(axis=(-2, -1)) ** (p / 2.0)).sum()) * vol
    y_p = float(((yq * yq).sum(axis=-1) ** (p / 2.0)).sum()) * vol
    y_w1p = y_p + grad_p
    P_s = float(((Pq * Pq).sum(axis=(-2, -1)) ** (s / 2.0)).sum()) * vol
    mass = system_mass(system)

    # Young split of |grad y|^p <= (t |E|^p)(|P|^p / t), exponents r/p, r/(r-p)
    tau = (r / (2.0 * p)) ** (p / r)
    c_P = 2.0 * ((r - p) / r) * tau ** (-r / (r - p))

    # affine lift norms for the Poincare-Friedrichs step
    lift = affine_field(mesh, boundary_A, boundary_c)
    le = lift.values[mesh.conn]
    lF = np.einsum("eai,qak->eqik", le, mesh.gradN)
    lq = np.einsum("eai,qa->eqi", le, mesh.N)
    G = (float(((lF * lF).sum(axis=(-2, -1)) ** (p / 2.0)).sum()) * vol) ** (1.0 / p) \
        + (float(((lq * lq).sum(axis=-1) ** (p / 2.0)).sum()) * vol) ** (1.0 / p)
    c_y = 1.0 / (2.0 ** (p - 1.0) + 1.0)
    c_g = (2.0 ** (p - 1.0)) * G ** p * c_y

    # load dual bound ||f||_* = ramp * ||f1||_{p'}
    pp = p / (p - 1.0)
    if loading is None:
        f_dual = 0.0
    else:
        f1 = loading.f1_at(mesh.qpoints)
        f_dual = abs(loading.ramp.value(t)) * (
            float(((f1 * f1).sum(axis=-1) ** (pp / 2.0)).sum()) * vol) ** (1.0 / pp)

    eps = c_y
    c_eps = (1.0 / pp) * (eps * p) ** (-pp / p)

    C = max(1.0 / c_y, 1.0 / zeta, c_P, c_eps, 2.0 * c_g, 1.0)
    energy = total_energy(t, y, P, system, params, zeta, loading).total
    lower = (y_w1p + mass) / C - C * (P_s + f_dual ** pp + 1.0)
    return CoercivityReport(energy=energy, lower_bound=lower,
                            margin=energy - lower, constant=C, s=s)


def write_deformation_csv(path, y: DeformationField):
    with open(path, "w") as fh:
        fh.write("x,y,z,y1,y2,y3\n")
        for p, v in zip(y.mesh.nodes, y.values):
            fh.write(f"{float(p[0])!r},{float(p[1])!r},{float(p[2])!r},"
                     f"{float(v[0])!r},{float(v[1])!r},{float(v[2])!r}\n")


def read_deformation_csv(path, mesh: HexMesh) -> DeformationField:
    rows = np.genfromtxt(path, delimiter=",", skip_header=1, ndmin=2)
    return DeformationField(mesh, rows[:, 3:6])
