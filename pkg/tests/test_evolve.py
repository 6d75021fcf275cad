import numpy as np
import pytest

from conftest import make_model, square_loop
from dislo.currents import (DislocationSystem, PiecewiseLinearMap,
                            sweep_system)
from dislo.evolve import (EvolutionState, MoveCandidate, _admissible,
                          build_rescaling, candidate_dictionary,
                          gronwall_certificate,
                          incremental_step, run, verify_difference_inequality,
                          verify_energy_balance, verify_flow,
                          verify_rate_independence, verify_rescaling,
                          verify_stability)
from dislo.plastic import PlasticField, integrate_P
from dislo.slipfield import BurgersTable


def _initial_state(model, system):
    from dislo.energy import core_energy, minimize_elastic
    res = minimize_elastic(PlasticField.identity(model.grid), model.elastic,
                           model.boundary_field(), model.loading, 0.0)
    core = core_energy(system, model.zeta)
    return EvolutionState(k=0, t=0.0, y=res.field,
                          P=PlasticField.identity(model.grid), system=system,
                          energy=res.objective + core, objective=res.objective)


# ---------------------------------------------------------------------------
# incremental step


def test_zero_load_neutral_wins():
    model = make_model(grid_cells=4, mesh_cells=4, n_random=2)
    system = DislocationSystem([square_loop()])
    state = _initial_state(model, system)
    rng = np.random.Generator(np.random.Philox(1))
    step = incremental_step(state, 0.5, model, rng)
    assert step.accepted.cand.tag == "neutral"
    assert step.accepted.diss == 0.0
    assert step.state.energy == pytest.approx(state.energy, abs=1e-12)


def test_objective_never_worse_than_neutral(shear_result):
    for row in shear_result.rows[1:]:
        assert row["objective_accepted"] <= row["objective_neutral"]


def test_neutral_test_inequality(shear_result):
    # e_k + d_k <= E(t_k, y_{k-1}, z_{k-1}) exactly, by candidate-set design
    loading = shear_result.model.loading
    rows = shear_result.rows
    for prev, row in zip(rows[:-1], rows[1:]):
        dramp = loading.ramp.value(row["t"]) - loading.ramp.value(prev["t"])
        rhs = prev["e"] - dramp * prev["pairing"]
        assert row["e"] + row["d"] <= rhs + 1e-10


def test_onset_is_rate_independent(shear_result, shear_slow_result):
    def onset(res):
        for row in res.rows[1:]:
            if row["accepted_candidate"]["tag"] != "neutral":
                return row["k"]
        return None

    k_fast = onset(shear_result)
    k_slow = onset(shear_slow_result)
    assert k_fast is not None
    assert abs(k_fast - k_slow) <= 1


def test_candidate_admissibility_cap():
    system = DislocationSystem([square_loop()])
    cand = MoveCandidate([np.zeros((4, 3))], "neutral", 0)
    assert _admissible(system, cand, 4.0)
    assert not _admissible(system, cand, 1.0)       # cap below current mass
    big = MoveCandidate([np.tile([0.4, 0, 0], (4, 1))], "coordinate", 1)
    assert not _admissible(system, big, 4.0)        # leaves the open cube


def test_candidate_dictionary_contents():
    model = make_model(grid_cells=4, mesh_cells=4, n_random=3)
    system = DislocationSystem([square_loop()])
    rng = np.random.Generator(np.random.Philox(0))
    cands = candidate_dictionary(system, model, rng)
    tags = [c.tag for c in cands]
    assert tags[0] == "neutral"
    assert tags.count("coordinate") == 4 * 6   # per node, axis, sign
    assert tags.count("random") == 3
    refined = candidate_dictionary(system, model, None, base=cands[1],
                                   delta=0.5 * model.delta)
    assert all(c.tag == "refined" for c in refined)


def test_step_error_when_neutral_inadmissible():
    from dislo.evolve import StepError
    model = make_model(grid_cells=4, mesh_cells=4, gamma_cap=4.0)
    system = DislocationSystem([square_loop()])
    state = _initial_state(model, system)
    model.gamma_cap = 0.5
    with pytest.raises(StepError):
        incremental_step(state, 0.5, model, None)


# ---------------------------------------------------------------------------
# run-level ledger


def test_quiescent_run_trivial(quiescent_result):
    rows = quiescent_result.rows
    for row in rows[1:]:
        assert row["accepted_candidate"]["tag"] == "neutral"
        assert row["d"] == 0.0
        assert row["e"] == pytest.approx(rows[0]["e"], abs=1e-12)
        assert row["alpha"] == pytest.approx(rows[0]["alpha"], abs=1e-12)
    assert quiescent_result.gronwall_constant == 0.0


def test_single_step_no_load():
    model = make_model(grid_cells=4, mesh_cells=4, n_random=2,
                       stability_probe_moves=0)
    res = run(model, DislocationSystem([square_loop()]), T=1.0, N=1, seed=0)
    assert len(res.rows) == 2
    assert res.rows[1]["alpha"] == pytest.approx(res.rows[0]["alpha"], abs=1e-12)


def test_ledger_totals_recomputable(shear_result):
    rows = shear_result.rows
    acc = 0.0
    beta = rows[0]["alpha"]
    prev_alpha = rows[0]["alpha"]
    prev_beta = rows[0]["beta"]
    for i, row in enumerate(rows):
        acc += row["d"]
        alpha = 1.0 + row["e"] + acc
        assert row["alpha"] == pytest.approx(alpha, abs=1e-12)
        if i > 0:
            beta += max(alpha - prev_alpha, 0.0)
            assert row["beta"] == pytest.approx(beta, abs=1e-12)
            assert row["beta"] >= prev_beta      # monotone envelope
        assert row["alpha"] <= row["beta"] + 1e-12
        prev_alpha = alpha
        prev_beta = row["beta"]
    assert verify_difference_inequality(rows, shear_result.T / shear_result.N,
                                        shear_result.gronwall_constant)


def test_plastic_w1q_variation_controlled_by_dissipation(shear_result):
    # sum_k ||P_k - P_{k-1}||_{W^{1,q}} stays a bounded multiple of the total
    # dissipation (empirical constant; zero plastic change on neutral steps)
    from dislo.plastic import _w1q_norm

    rows = shear_result.rows
    states = shear_result.states
    grid = states[0].P.grid
    var_w1q = 0.0
    for a, b in zip(states[:-1], states[1:]):
        var_w1q += _w1q_norm(b.P.flat() - a.P.flat(), grid, 4.0)
    total_diss = sum(row["d"] for row in rows[1:])
    assert total_diss > 0.0
    for a, b, row in zip(states[:-1], states[1:], rows[1:]):
        if row["d"] == 0.0:
            assert np.array_equal(a.P.values, b.P.values)
    eta_sup = shear_result.model.eta.sup_norm
    c_vd = 1.0 / shear_result.model.dparams.min_eigenvalue()
    assert var_w1q <= 10.0 * eta_sup * c_vd * total_diss


def test_det_and_trace_residuals(shear_result):
    for row in shear_result.rows:
        assert row["det_residual"] <= 1e-10
        assert row["trace_residual"] <= 1e-12


# ---------------------------------------------------------------------------
# rescaling function


def test_rescaling_all_neutral_identity(quiescent_result):
    psi = quiescent_result.psi
    assert np.allclose(psi.s_points, psi.t_points, atol=1e-14)
    assert np.all(psi.slopes() == 1.0)


def test_rescaling_stretches_dissipative_steps(shear_result):
    rows = shear_result.rows
    psi = shear_result.psi
    dt = shear_result.T / shear_result.N
    for k in range(1, len(rows)):
        ds = psi.s_points[k] - psi.s_points[k - 1]
        expect = dt + max(rows[k]["e"] - rows[k - 1]["e"], 0.0) + rows[k]["d"]
        assert ds == pytest.approx(expect, abs=1e-12)
        assert ds >= dt - 1e-12


def test_rescaling_report(shear_result):
    rep = verify_rescaling(shear_result)
    assert rep.passed
    assert np.all(rep.slopes > 0.0)
    assert np.all(rep.slopes <= 1.0 + 1e-12)
    assert np.all(rep.unit_dissipation <= 1.0 + 1e-8)


def test_build_rescaling_rejects_nothing_monotone():
    rows = [{"t": 0.0, "e": 1.0, "d": 0.0}, {"t": 0.5, "e": 2.0, "d": 0.3}]
    psi = build_rescaling(rows)
    assert psi.s_points[1] == pytest.approx(0.5 + 1.0 + 0.3)
    assert psi(psi.s_points[1]) == pytest.approx(0.5)
    assert psi(100.0) == pytest.approx(0.5)   # constant after the last knot


# ---------------------------------------------------------------------------
# Gronwall certificate


def test_gronwall_closed_form():
    table = gronwall_certificate(0.0, 1.0, 0.9, 100)
    assert table.t_infinity == pytest.approx(1.0)
    assert table.passed
    assert np.allclose(table.bounds, -np.log(1.0 - table.times), atol=1e-12)


def test_gronwall_refinement_monotone_from_below():
    vals = []
    for N in (10, 100, 1000):
        table = gronwall_certificate(0.0, 1.0, 0.9, N)
        assert table.passed
        vals.append(table.iterates[-1])
    assert vals[0] < vals[1] < vals[2]
    assert vals[2] <= -np.log(1.0 - 0.9)


def test_gronwall_sentinel_empty_energy():
    table = gronwall_certificate(float("-inf"), 1.0, 1.0, 10)
    assert table.t_infinity == np.inf
    assert table.passed
    assert np.all(np.isneginf(table.iterates))


def test_gronwall_past_blowup_sentinel():
    table = gronwall_certificate(0.0, 1.0, 2.0, 10)
    assert np.any(np.isinf(table.bounds))
    assert table.passed


# ---------------------------------------------------------------------------
# verifiers


def test_energy_balance_no_load(quiescent_result):
    rep = verify_energy_balance(quiescent_result.rows,
                                quiescent_result.model.loading)
    assert rep.passed
    assert np.abs(rep.gaps).max() <= 1e-10


def test_energy_balance_ramped(shear_result):
    rep = verify_energy_balance(shear_result.rows, shear_result.model.loading)
    assert rep.passed
    assert np.all(rep.gaps >= -1e-8)


def test_energy_balance_gap_shrinks_with_time_refinement():
    # the one-sided gap accumulates O(dT^2) re-minimization brackets per step
    gaps = []
    for N in (2, 4, 8):
        model = make_model(grid_cells=4, mesh_cells=4, amplitude=100.0,
                           n_random=0, refine=False, stability_probe_moves=0)
        res = run(model, DislocationSystem([square_loop()]), T=1.0, N=N, seed=0)
        rep = verify_energy_balance(res.rows, model.loading)
        gaps.append(rep.gaps[-1])
    assert gaps[2] < gaps[1] < gaps[0]


def test_stability_accepted_state(shear_result):
    state = shear_result.states[-1]
    rep = verify_stability(state, shear_result.model, samples=4, seed=5)
    assert rep.passed
    neutral_rows = [c for c in rep.candidates if c["tag"] == "neutral"]
    assert all(abs(c["violation"]) <= 1e-10 for c in neutral_rows)


def test_stability_flags_crippled_search():
    # search too small to move the loop, then probed with real moves
    crippled = make_model(grid_cells=6, mesh_cells=6, amplitude=900.0,
                          n_random=0, refine=False, stability_probe_moves=0,
                          delta=1e-9)
    system = DislocationSystem([square_loop()])
    res = run(crippled, system, T=1.0, N=1, seed=0)
    probing = make_model(grid_cells=6, mesh_cells=6, amplitude=900.0,
                         n_random=0, refine=False)
    rep = verify_stability(res.states[-1], probing, samples=0, tol=1e-9, seed=1)
    assert not rep.passed
    assert rep.worst_violation > 1e-6


def test_flow_neutral_zero():
    model = make_model(grid_cells=4, mesh_cells=4)
    system = DislocationSystem([square_loop()])
    from dislo.currents import neutral as neutral_traj
    traj = neutral_traj(system)
    path = integrate_P(PlasticField.identity(model.grid), traj, model.table,
                       model.eta, substeps=4)
    rep = verify_flow(path, traj, model)
    assert rep.max_residual == 0.0


def test_flow_constant_rate_exact():
    model = make_model(grid_cells=4, mesh_cells=4)

    def rates(t):
        out = np.zeros((1, model.grid.n_nodes, 3))
        out[0, :, 2] = 1.0
        return out

    path = integrate_P(PlasticField.identity(model.grid), rates, model.table,
                       substeps=16)
    rep = verify_flow(path, rates, model)
    assert rep.max_residual <= 1e-6


def test_flow_single_system_residual_vanishes():
    # one slip system: the generator is exactly nilpotent (the projection is
    # orthogonal to R^-1 b), so the midpoint update is exact and the flow
    # residual sits at roundoff
    model = make_model(grid_cells=6, mesh_cells=4)
    system = DislocationSystem([square_loop()])
    disp = [np.zeros((4, 3))]
    disp[0][1] = [0.1, 0.05, 0.0]
    traj = sweep_system(system, disp)
    P0 = PlasticField.identity(model.grid)
    path = integrate_P(P0, traj, model.table, model.eta, substeps=16)
    assert verify_flow(path, traj, model).max_residual <= 1e-12


def test_flow_richardson_ratio_two_systems():
    table = BurgersTable([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    model = make_model(grid_cells=4, mesh_cells=4, table=table)
    om = 3.0

    def rates(t):
        out = np.zeros((2, model.grid.n_nodes, 3))
        out[0, :, 1] = np.sin(om * t)
        out[0, :, 2] = np.cos(om * t)
        out[1, :, 2] = np.cos(0.5 * om * t)
        out[1, :, 0] = 0.3 * np.sin(om * t)
        return out

    P0 = PlasticField.identity(model.grid)
    res = []
    for M in (16, 32):
        path = integrate_P(P0, rates, table, substeps=M)
        res.append(verify_flow(path, rates, model).max_residual)
    assert res[0] / res[1] == pytest.approx(4.0, abs=1.0)


def test_rate_independence_identity_exact():
    model = make_model(grid_cells=4, mesh_cells=4)
    system = DislocationSystem([square_loop()])
    traj = sweep_system(system, [np.tile([0.05, 0.02, 0], (4, 1))])
    rep = verify_rate_independence(PlasticField.identity(model.grid), traj,
                                   model, PiecewiseLinearMap.identity((0, 1)),
                                   substeps=8)
    assert rep.p_difference == 0.0
    assert rep.loops_identical


def test_rate_independence_t_squared():
    model = make_model(grid_cells=6, mesh_cells=4)
    system = DislocationSystem([square_loop()])
    traj = sweep_system(system, [np.tile([0.06, 0.02, 0], (4, 1))])
    M = 64
    amap = PiecewiseLinearMap.from_function(lambda t: t * t, (0.0, 1.0), M + 1)
    rep = verify_rate_independence(PlasticField.identity(model.grid), traj,
                                   model, amap, substeps=M)
    assert rep.passed
    assert rep.p_difference <= 1e-8
    assert rep.loops_identical


def test_initial_stability_reported(shear_result):
    assert "margin" in shear_result.initial_stability
    assert np.isfinite(shear_result.initial_stability["margin"])
