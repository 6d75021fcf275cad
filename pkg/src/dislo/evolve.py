"""Time-incremental minimization driver and energetic-solution verifiers.

Each step minimizes, over a finite dictionary of candidate moves always
containing the neutral (static) one,

    J(y_hat, Sigma_hat) = W_e(y_hat, P_hat) - <f(t_k), y_hat> + W_c(Phi_hat)
                          + Diss(Sigma_hat),

where P_hat and Phi_hat are the plastic and dislocation forward images of the
previous state under the candidate sweep.  Because the neutral candidate is
always admissible, the accepted objective never exceeds the neutral one,
which is exactly the inequality the a-priori analysis rests on.

The per-step ledger drives the arc-length-like reparameterization

    s_k = t_k + sum_j ( max{e_j - e_{j-1}, 0} + d_j ),

whose inverse (the piecewise-linear rescaling function) has slopes in (0, 1]
and stretches every step enough that the rescaled dissipation per unit s is
at most one.  The same ledger feeds a blow-up certificate: the run-derived
constant C makes every difference quotient satisfy
(b_k - b_{k-1})/dt <= C exp(b_{k-1}), and the iterates stay below the maximal
solution -log(exp(-a0) - C t), which blows up at exp(-a0)/C.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import dissipation as dissip, energy as energy_mod, slipfield
from .currents import (DislocationSystem, SlipTrajectory, PiecewiseLinearMap,
                       loop_mass, rescale_trajectory, sweep_system, system_mass)
from .dissipation import DissipationParams
from .energy import (DeformationField, ElasticDensityParams, HexMesh, Loading,
                     affine_field, minimize_elastic, spatial_pairing)
from .grid import Grid
from .plastic import PlasticField, PlasticPath, det_residual, integrate_P
from .slipfield import BurgersTable, Mollifier


class StepError(RuntimeError):
    """Inner solve failure during a time-incremental step."""


@dataclass
class Model:
    """Everything a step needs besides the evolving state."""

    grid: Grid
    mesh: HexMesh
    table: BurgersTable
    eta: Mollifier
    elastic: ElasticDensityParams
    dparams: DissipationParams
    zeta: float = 0.1
    loading: Loading = None
    gamma_cap: float = np.inf
    p: float = 4.0
    q: float = 4.0
    boundary_A: np.ndarray = None
    boundary_c: np.ndarray = None
    substeps: int = 8
    edge_gauss: int = 2
    delta: float = None            # coordinate move size; default one grid spacing
    n_random: int = 16
    refine: bool = True
    gtol: float = 1e-6
    max_iter: int = 5000
    det_floor: float = 1e-6
    stability_probe_moves: int = 6

    def __post_init__(self):
        if self.delta is None:
            self.delta = self.grid.h

    def boundary_field(self) -> DeformationField:
        return affine_field(self.mesh, self.boundary_A, self.boundary_c)


@dataclass
class EvolutionState:
    k: int
    t: float
    y: DeformationField
    P: PlasticField
    system: DislocationSystem
    energy: float                   # total energy at (t, y, P, system)
    objective: float                # W_e - <f, y> part of the energy


@dataclass
class MoveCandidate:
    displacements: list             # one (n_i, 3) array per loop
    tag: str                        # neutral | coordinate | random | refined
    index: int


def _zero_move(system, index=0, tag="neutral"):
    return MoveCandidate([np.zeros_like(lp.nodes) for lp in system.loops],
                         tag, index)


def _admissible(system: DislocationSystem, cand: MoveCandidate, gamma_cap: float) -> bool:
    """Endpoint checks suffice: node paths are linear and slice lengths are
    convex in time, so interior positions and masses are dominated by the
    endpoints."""
    cap0 = 0.0
    for lp, d in zip(system.loops, cand.displacements):
        end = lp.nodes + d
        if np.any(end <= 0.0) or np.any(end >= 1.0):
            return False
        length = float(np.linalg.norm(np.roll(end, -1, axis=0) - end, axis=1).sum())
        cap0 = max(cap0, length * lp.multiplicity, loop_mass(lp))
    return cap0 <= gamma_cap


def candidate_dictionary(system: DislocationSystem, model: Model, rng,
                         base: MoveCandidate = None, delta: float = None):
    """Neutral + single-node coordinate displacements (+-delta along each
    axis, every loop node) + random Gaussian nodal fields, optionally offset
    around an incumbent (the refinement pass at half step size)."""
    delta = model.delta if delta is None else delta
    cands = []
    idx = 0
    if base is None:
        cands.append(_zero_move(system, idx))
        idx += 1
    zero = [np.zeros_like(lp.nodes) for lp in system.loops]
    base_disp = base.displacements if base is not None else zero
    tag = "refined" if base is not None else "coordinate"
    for li, lp in enumerate(system.loops):
        for node in range(lp.n_nodes):
            for axis in range(3):
                for sign in (1.0, -1.0):
                    disp = [d.copy() for d in base_disp]
                    disp[li][node, axis] += sign * delta
                    cands.append(MoveCandidate(disp, tag, idx))
                    idx += 1
    if base is None and model.n_random > 0 and rng is not None:
        for _ in range(model.n_random):
            disp = []
            for lp in system.loops:
                g = rng.standard_normal(lp.nodes.shape)
                peak = float(np.abs(g).max())
                disp.append(g * (delta / peak) if peak > 0 else g)
            cands.append(MoveCandidate(disp, "random", idx))
            idx += 1
    return cands


@dataclass
class CandidateEval:
    cand: MoveCandidate
    objective: float               # full step objective J
    traj: SlipTrajectory
    path: PlasticPath
    system: DislocationSystem
    minimize: energy_mod.MinimizeResult
    diss: float
    core: float


def evaluate_candidate(state: EvolutionState, t_k: float, cand: MoveCandidate,
                       model: Model, warm: DeformationField = None) -> CandidateEval:
    traj = sweep_system(state.system, cand.displacements, (0.0, 1.0),
                        domain=(0.0, 1.0))
    is_static = all(not np.any(d) for d in cand.displacements)
    if is_static:
        # zero velocity: the drift vanishes identically and the path is constant
        times = np.linspace(0.0, 1.0, model.substeps + 1)
        path = PlasticPath(times=times,
                           fields=[state.P.copy() for _ in times],
                           max_trace_residual=0.0)
    else:
        path = integrate_P(state.P, traj, model.table, model.eta, (0.0, 1.0),
                           model.substeps, model.edge_gauss)
    new_system = traj.final_system()
    try:
        res = minimize_elastic(path.endpoint(), model.elastic,
                               warm if warm is not None else state.y,
                               model.loading, t_k, model.gtol, model.max_iter,
                               model.det_floor)
    except energy_mod.InitializationError as exc:
        raise StepError(f"inner elastic solve failed: {exc}") from exc
    d = dissip.dissipation(traj, path, model.dparams)
    core = energy_mod.core_energy(new_system, model.zeta)
    return CandidateEval(cand=cand, objective=res.objective + core + d,
                         traj=traj, path=path, system=new_system,
                         minimize=res, diss=d, core=core)


@dataclass
class StepResult:
    state: EvolutionState
    accepted: CandidateEval
    objective_neutral: float
    objective_accepted: float
    n_candidates: int
    flow_residual: float
    trace_residual: float


def incremental_step(state: EvolutionState, t_k: float, model: Model,
                     rng) -> StepResult:
    """One pass of the dictionary search; the neutral candidate is always in
    the set, so the accepted objective is at most the neutral objective."""
    cands = [c for c in candidate_dictionary(state.system, model, rng)
             if _admissible(state.system, c, model.gamma_cap)]
    if not cands or cands[0].tag != "neutral":
        raise StepError("neutral candidate inadmissible; check the slice-mass cap")
    best = None
    neutral_eval = None
    warm = None
    for cand in cands:
        ev = evaluate_candidate(state, t_k, cand, model, warm)
        if cand.tag == "neutral":
            neutral_eval = ev
            warm = ev.minimize.field     # candidates share the step's load state
        if best is None or ev.objective < best.objective:
            best = ev
    if model.refine and best.cand.tag != "neutral":
        refined = [c for c in candidate_dictionary(state.system, model, None,
                                                   base=best.cand,
                                                   delta=0.5 * model.delta)
                   if _admissible(state.system, c, model.gamma_cap)]
        for cand in refined:
            ev = evaluate_candidate(state, t_k, cand, model, warm)
            if ev.objective < best.objective:
                best = ev
    flow_res = 0.0
    if best.cand.tag != "neutral":
        flow_res = flow_residual(best.path, best.traj, model)
    new_state = EvolutionState(k=state.k + 1, t=t_k, y=best.minimize.field,
                               P=best.path.endpoint(), system=best.system,
                               energy=best.objective - best.diss,
                               objective=best.minimize.objective)
    return StepResult(state=new_state, accepted=best,
                      objective_neutral=neutral_eval.objective,
                      objective_accepted=best.objective,
                      n_candidates=len(cands),
                      flow_residual=flow_res,
                      trace_residual=best.path.max_trace_residual)


# ---------------------------------------------------------------------------
# rescaling function and blow-up certificate


@dataclass
class RescalingFunction:
    """Piecewise-linear map s -> t with breakpoints (s_k, t_k), constant T
    after the last breakpoint."""

    s_points: np.ndarray
    t_points: np.ndarray

    def __post_init__(self):
        self.s_points = np.asarray(self.s_points, dtype=float)
        self.t_points = np.asarray(self.t_points, dtype=float)
        if np.any(np.diff(self.s_points) <= 0):
            raise ValueError("rescaling breakpoints must be strictly increasing")

    def __call__(self, s):
        return np.interp(s, self.s_points, self.t_points)

    @property
    def sigma(self) -> float:
        return float(self.s_points[-1])

    def slopes(self) -> np.ndarray:
        return np.diff(self.t_points) / np.diff(self.s_points)


def build_rescaling(rows) -> RescalingFunction:
    """s_k = t_k + sum of positive energy increments plus dissipations."""
    s = [rows[0]["t"]]
    for prev, row in zip(rows[:-1], rows[1:]):
        ds = (row["t"] - prev["t"]) + max(row["e"] - prev["e"], 0.0) + row["d"]
        s.append(s[-1] + ds)
    return RescalingFunction(np.asarray(s), np.asarray([r["t"] for r in rows]))


@dataclass
class GronwallTable:
    times: np.ndarray
    iterates: np.ndarray           # a_k from the difference recursion
    bounds: np.ndarray             # maximal solution -log(exp(-a0) - C t)
    t_infinity: float
    constant: float
    alpha0: float
    passed: bool


def gronwall_certificate(alpha0: float, C: float, T: float, N: int) -> GronwallTable:
    """Iterate a_k = a_{k-1} + dT C exp(a_{k-1}) against the closed-form
    maximal solution; finite blow-up horizon exp(-alpha0)/C."""
    if C < 0:
        raise ValueError("Gronwall constant must be nonnegative")
    if N < 1:
        raise ValueError("need at least one step")
    dt = T / N
    times = dt * np.arange(N + 1)
    a = np.empty(N + 1)
    a[0] = alpha0
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        for k in range(1, N + 1):
            a[k] = a[k - 1] + dt * C * np.exp(a[k - 1])
        t_inf = float(np.exp(-alpha0)) / C if C > 0 else np.inf
        arg = np.exp(-alpha0) - C * times
        bounds = np.where(arg > 0.0, -np.log(np.maximum(arg, 1e-300)), np.inf)
    slack = np.where(np.isfinite(bounds), 1e-12 * (1.0 + np.abs(bounds)), 0.0)
    ok = (times >= t_inf) | (a <= bounds + slack)
    return GronwallTable(times=times, iterates=a, bounds=bounds,
                         t_infinity=t_inf, constant=C, alpha0=alpha0,
                         passed=bool(np.all(ok)))


def gronwall_bound_value(alpha0: float, C: float, t: float) -> float:
    """Maximal solution -log(exp(-alpha0) - C t); +inf past the blow-up time."""
    with np.errstate(over="ignore"):
        arg = float(np.exp(-alpha0)) - C * t
    if arg <= 0.0:
        return float("inf")
    return float(-np.log(arg))


def run_gronwall_constant(rows, dt: float) -> float:
    """Smallest constant making every observed beta difference quotient
    satisfy the exponential difference inequality."""
    C = 0.0
    for prev, row in zip(rows[:-1], rows[1:]):
        inc = row["beta"] - prev["beta"]
        if inc > 0.0:
            C = max(C, inc / (dt * math.exp(prev["beta"])))
    return C


# ---------------------------------------------------------------------------
# full run


@dataclass
class RunResult:
    rows: list                      # JSON-ready ledger rows, k = 0..N
    states: list                    # EvolutionState per row
    trajs: list                     # accepted trajectory per step (None at k=0)
    paths: list                     # plastic path per step (None at k=0)
    model: Model
    T: float
    N: int
    seed: int
    psi: RescalingFunction
    gronwall_constant: float
    initial_stability: object
    error: str = None               # set when a step aborted the run


def _total_state_energy(state: EvolutionState, model: Model):
    return state.energy


def _stability_probe(state: EvolutionState, model: Model, rng, n_random=0,
                     max_moves=None):
    """Sampled test of the stability relation at the state's own time."""
    max_moves = model.stability_probe_moves if max_moves is None else max_moves
    cands = [_zero_move(state.system)]
    coords = candidate_dictionary(state.system, model, None)[1:]
    coords = [c for c in coords if c.tag == "coordinate"][:max_moves]
    cands.extend(coords)
    if n_random > 0 and rng is not None:
        extra = [c for c in candidate_dictionary(state.system, model, rng)
                 if c.tag == "random"][:n_random]
        cands.extend(extra)
    worst = -np.inf
    per = []
    for cand in cands:
        if not _admissible(state.system, cand, model.gamma_cap):
            continue
        ev = evaluate_candidate(state, state.t, cand, model)
        violation = state.energy - ev.objective
        per.append({"tag": cand.tag, "index": cand.index,
                    "violation": float(violation)})
        worst = max(worst, violation)
    return worst, per


def run(model: Model, system0: DislocationSystem, T: float, N: int,
        seed: int = 0, P0: PlasticField = None) -> RunResult:
    """Drive the incremental scheme over N uniform steps and assemble the
    ledger, the rescaling function, and the blow-up certificate."""
    if model.gamma_cap < system_mass(system0):
        raise ValueError("slice-mass cap below the initial dislocation mass")
    root = np.random.SeedSequence(seed)
    seq_steps, seq_stab = root.spawn(2)
    rng_steps = np.random.Generator(np.random.Philox(seq_steps))
    rng_stab = np.random.Generator(np.random.Philox(seq_stab))

    P0 = P0 if P0 is not None else PlasticField.identity(model.grid)
    warm = model.boundary_field()
    res0 = minimize_elastic(P0, model.elastic, warm, model.loading, 0.0,
                            model.gtol, model.max_iter, model.det_floor)
    core0 = energy_mod.core_energy(system0, model.zeta)
    state = EvolutionState(k=0, t=0.0, y=res0.field, P=P0, system=system0,
                           energy=res0.objective + core0,
                           objective=res0.objective)

    init_margin, init_table = _stability_probe(state, model, rng_stab)
    rows = [{
        "k": 0, "t": 0.0, "s": 0.0, "e": state.energy, "d": 0.0,
        "alpha": 1.0 + state.energy, "beta": 1.0 + state.energy,
        "gronwall_bound": None, "accepted_candidate": None,
        "stability_margin": float(-init_margin),
        "flow_residual": 0.0,
        "objective_neutral": None, "objective_accepted": None,
        "elastic": res0.elastic, "load": res0.load, "core": core0,
        "pairing": spatial_pairing(state.y, model.loading),
        "det_residual": det_residual(state.P),
        "trace_residual": 0.0,
        "inner_iterations": res0.iterations,
        "inner_converged": bool(res0.converged),
    }]
    states = [state]
    trajs = [None]
    paths = [None]

    dt = T / N
    diss_total = 0.0
    error = None
    for k in range(1, N + 1):
        t_k = k * dt
        try:
            step = incremental_step(state, t_k, model, rng_steps)
        except StepError as exc:
            error = f"step {k}: {exc}"
            break
        state = step.state
        diss_total += step.accepted.diss
        alpha = 1.0 + state.energy + diss_total
        prev = rows[-1]
        beta = prev["beta"] + max(alpha - prev["alpha"], 0.0)
        margin = None
        if model.stability_probe_moves > 0:
            worst, _ = _stability_probe(state, model, None)
            margin = float(-worst)
        rows.append({
            "k": k, "t": t_k, "s": None, "e": state.energy,
            "d": step.accepted.diss, "alpha": alpha, "beta": beta,
            "gronwall_bound": None,
            "accepted_candidate": {
                "tag": step.accepted.cand.tag,
                "index": step.accepted.cand.index,
                "displacements": [d.tolist() for d in step.accepted.cand.displacements],
            },
            "stability_margin": margin,
            "flow_residual": step.flow_residual,
            "objective_neutral": step.objective_neutral,
            "objective_accepted": step.objective_accepted,
            "elastic": step.accepted.minimize.elastic,
            "load": step.accepted.minimize.load,
            "core": step.accepted.core,
            "pairing": spatial_pairing(state.y, model.loading),
            "det_residual": det_residual(state.P),
            "trace_residual": step.trace_residual,
            "inner_iterations": step.accepted.minimize.iterations,
            "inner_converged": bool(step.accepted.minimize.converged),
        })
        states.append(state)
        trajs.append(step.accepted.traj)
        paths.append(step.accepted.path)

    psi = build_rescaling(rows)
    for row, s in zip(rows, psi.s_points):
        row["s"] = float(s)
    C_run = run_gronwall_constant(rows, dt)
    for row in rows:
        row["gronwall_bound"] = gronwall_bound_value(rows[0]["alpha"], C_run, row["t"])
    return RunResult(rows=rows, states=states, trajs=trajs, paths=paths,
                     model=model, T=T, N=N, seed=seed, psi=psi,
                     gronwall_constant=C_run,
                     initial_stability={"margin": float(-init_margin),
                                        "candidates": init_table},
                     error=error)


# ---------------------------------------------------------------------------
# verifiers


@dataclass
class BalanceReport:
    lhs: np.ndarray                # e_k
    rhs: np.ndarray                # e_0 - sum Diss - power integral
    gaps: np.ndarray               # rhs - lhs, >= -tolerance
    tolerance: float
    passed: bool


def verify_energy_balance(rows, loading: Loading, tol: float = 1e-8) -> BalanceReport:
    """Discrete lower energy estimate: e_k + sum_j d_j + power <= e_0.

    The power integral uses the per-step trapezoid of the analytic ramp
    derivative against the frozen spatial pairing of y_{j-1}."""
    lhs = []
    rhs = []
    acc_d = 0.0
    acc_p = 0.0
    e0 = rows[0]["e"]
    for prev, row in zip(rows[:-1], rows[1:]):
        acc_d += row["d"]
        if loading is not None:
            dtau = row["t"] - prev["t"]
            dramp = 0.5 * dtau * (loading.ramp.derivative(prev["t"])
                                  + loading.ramp.derivative(row["t"]))
            acc_p += dramp * prev["pairing"]
        lhs.append(row["e"])
        rhs.append(e0 - acc_d - acc_p)
    lhs = np.asarray(lhs)
    rhs = np.asarray(rhs)
    gaps = rhs - lhs
    return BalanceReport(lhs=lhs, rhs=rhs, gaps=gaps, tolerance=tol,
                         passed=bool(np.all(gaps >= -tol)))


@dataclass
class StabilityReport:
    worst_violation: float
    candidates: list
    tolerance: float
    passed: bool


def verify_stability(state: EvolutionState, model: Model, samples: int = 8,
                     tol: float = 1e-9, seed: int = 0) -> StabilityReport:
    """Sampled stability check; inherently incomplete (the continuous relation
    quantifies over all test trajectories)."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    worst, per = _stability_probe(state, model, rng, n_random=samples,
                                  max_moves=6 * len(state.system.loops))
    return StabilityReport(worst_violation=float(worst), candidates=per,
                           tolerance=tol, passed=bool(worst <= tol))


@dataclass
class FlowReport:
    max_residual: float
    residuals: np.ndarray


def flow_residual(path: PlasticPath, traj: SlipTrajectory, model: Model) -> float:
    return verify_flow(path, traj, model).max_residual


def verify_flow(path: PlasticPath, traj_or_rates, model: Model) -> FlowReport:
    """Finite-difference time derivative of P against the drift at substep
    midpoints; order-2 in the substep width."""
    from ._kernels import _drift_numpy

    if callable(traj_or_rates):
        rates = traj_or_rates
    else:
        rates = slipfield.flow_rates(traj_or_rates, model.grid, model.eta,
                                     model.table, model.edge_gauss)
    bvecs = model.table.representatives
    times = path.times
    res = np.empty(len(times) - 1)
    for i in range(len(times) - 1):
        dt = times[i + 1] - times[i]
        Pi = path.fields[i].flat()
        Pj = path.fields[i + 1].flat()
        fd = (Pj - Pi) / dt
        g = rates(times[i] + 0.5 * dt)
        D = _drift_numpy(g, bvecs, 0.5 * (Pi + Pj))
        diff = fd - D
        res[i] = np.sqrt((diff * diff).sum(axis=(-2, -1))).max()
    return FlowReport(max_residual=float(res.max()) if res.size else 0.0,
                      residuals=res)


@dataclass
class RateIndependenceReport:
    p_difference: float
    loops_identical: bool
    tolerance: float
    passed: bool


def verify_rate_independence(P0: PlasticField, traj: SlipTrajectory, model: Model,
                             amap: PiecewiseLinearMap, substeps: int = 256,
                             tol: float = 1e-8) -> RateIndependenceReport:
    """Endpoints of the plastic integration agree under monotone time
    reparameterization; loop endpoints agree exactly (the remap never moves
    vertices spatially).

    The rescaled integration runs on the image of the base substep grid: the
    partition transforms with the time variable, which keeps the graded mesh
    resolving rate spikes where the map flattens (e.g. t^2 near zero)."""
    base = integrate_P(P0, traj, model.table, model.eta, traj.interval, substeps,
                       model.edge_gauss)
    rtraj = rescale_trajectory(traj, amap)
    # image grid plus the map's own breakpoints: rate kinks land on substep
    # boundaries, keeping the midpoint rule at second order
    rtimes = np.union1d(amap(base.times), amap.t_out)
    resc = integrate_P(P0, rtraj, model.table, model.eta, rtraj.interval,
                       n_gauss=model.edge_gauss, times=rtimes)
    dP = base.endpoint().flat() - resc.endpoint().flat()
    p_diff = float(np.sqrt((dP * dP).sum(axis=(-2, -1))).max())
    loops_ok = all(
        np.array_equal(a.nodes, b.nodes)
        for a, b in zip(traj.final_system().loops, rtraj.final_system().loops))
    return RateIndependenceReport(p_difference=p_diff, loops_identical=loops_ok,
                                  tolerance=tol,
                                  passed=bool(p_diff <= tol and loops_ok))


@dataclass
class RescalingReport:
    min_increment: float
    dt: float
    slopes: np.ndarray
    unit_dissipation: np.ndarray
    passed: bool


def verify_rescaling(result: RunResult, tol: float = 1e-8) -> RescalingReport:
    """s-increments at least dT, slopes in (0, 1], rescaled per-unit-s
    dissipation at most one.  The per-step dissipation is recomputed after an
    actual rescale of the accepted trajectory onto its s-interval."""
    rows = result.rows
    psi = result.psi
    dt = result.T / result.N
    incs = np.diff(psi.s_points)
    slopes = psi.slopes()
    unit = []
    for k in range(1, len(rows)):
        traj = result.trajs[k]
        if traj is None or rows[k]["d"] == 0.0:
            unit.append(0.0)
            continue
        amap = PiecewiseLinearMap.affine(traj.interval,
                                         (psi.s_points[k - 1], psi.s_points[k]))
        rtraj = rescale_trajectory(traj, amap)
        path = result.paths[k]
        rpath = PlasticPath(times=amap(path.times), fields=path.fields,
                            max_trace_residual=path.max_trace_residual)
        d = dissip.dissipation(rtraj, rpath, result.model.dparams,
                               interval=(psi.s_points[k - 1], psi.s_points[k]))
        unit.append(d / incs[k - 1])
    unit = np.asarray(unit)
    ok = ((incs >= dt - 1e-12).all() and (slopes > 0).all()
          and (slopes <= 1.0 + 1e-12).all() and (unit <= 1.0 + tol).all())
    return RescalingReport(min_increment=float(incs.min()), dt=dt, slopes=slopes,
                           unit_dissipation=unit, passed=bool(ok))


def verify_difference_inequality(rows, dt: float, C: float) -> bool:
    """beta difference quotients against C exp(beta_{k-1})."""
    for prev, row in zip(rows[:-1], rows[1:]):
        q = (row["beta"] - prev["beta"]) / dt
        if q > C * math.exp(prev["beta"]) + 1e-10 * (1.0 + abs(C)):
            return False
    return True
