import numpy as np
import pytest

from dislo.currents import (CompositionError, DislocationSystem, GeometryError,
                            Loop, PiecewiseLinearMap, concatenate,
                            dislocation_forward, linf_norm, loop_mass, neutral,
                            rescale_trajectory, slice_loop, slice_mass_integral,
                            surface_mass, sweep, sweep_system, system_mass,
                            trajectory_variation, variation)
from dislo.multivec import mass_norm, spatial_projection, triangle_bivector


def unit_square(z=0.5, mult=1):
    return Loop(np.array([[0.0, 0.0, z], [1.0, 0.0, z],
                          [1.0, 1.0, z], [0.0, 1.0, z]]), mult, 0)


def translation(loop, vec):
    return np.tile(np.asarray(vec, dtype=float), (loop.n_nodes, 1))


# ---------------------------------------------------------------------------
# loop mass


def test_loop_mass_square():
    assert loop_mass(unit_square()) == pytest.approx(4.0, abs=1e-14)


def test_loop_mass_multiplicity():
    assert loop_mass(unit_square(mult=3)) == pytest.approx(12.0, abs=1e-13)


def test_loop_mass_ngon():
    n = 64
    theta = 2 * np.pi * np.arange(n) / n
    nodes = np.stack([np.cos(theta), np.sin(theta), np.zeros(n)], axis=1)
    expect = 2 * n * np.sin(np.pi / n)
    assert loop_mass(Loop(nodes)) == pytest.approx(expect, rel=1e-13)


def test_loop_validation():
    with pytest.raises(GeometryError):
        Loop(np.array([[0, 0, 0], [1, 0, 0]]))
    with pytest.raises(GeometryError):
        Loop(np.array([[0, 0, 0], [0, 0, 0], [1, 0, 0]]))
    with pytest.raises(GeometryError):
        Loop(unit_square().nodes, 0)


# ---------------------------------------------------------------------------
# sweeping and variation


def test_static_sweep_zero_variation():
    s = sweep(unit_square(), np.zeros((4, 3)))
    assert variation(s) == 0.0


def test_translated_square_variation():
    # only the two edges transverse to the motion sweep area
    h = 0.1
    s = sweep(unit_square(), translation(unit_square(), [h, 0, 0]))
    assert variation(s) == pytest.approx(2 * h, abs=1e-14)


def test_translated_square_variation_brute_force():
    # oracle: dense micro-triangulation of the same ruled motion
    h = 0.37
    lp = unit_square()
    disp = translation(lp, [h, 0, 0])
    s = sweep(lp, disp)
    K = 400
    total = 0.0
    for i in range(K):
        t0, t1 = i / K, (i + 1) / K
        piece = sweep(Loop(lp.nodes + t0 * disp), (t1 - t0) * disp, (t0, t1))
        total += variation(piece)
    assert variation(s) == pytest.approx(total, rel=1e-12)


def test_single_node_fan_variation():
    lp = unit_square()
    disp = np.zeros((4, 3))
    disp[2, 2] = 0.3
    s = sweep(lp, disp)
    # oracle: sum of the projected areas of the surface's own triangles
    acc = 0.0
    for tri in s.triangles:
        xi = triangle_bivector(tri[0], tri[1], tri[2])
        acc += 0.5 * mass_norm(spatial_projection(xi))
    assert variation(s) == pytest.approx(acc, rel=1e-14)


def test_sweep_rejects_escape():
    lp = unit_square()
    with pytest.raises(GeometryError):
        sweep(lp, translation(lp, [0.5, 0, 0]), domain=(0.0, 1.0))


def test_sweep_displacement_shape():
    with pytest.raises(GeometryError):
        sweep(unit_square(), np.zeros((3, 3)))


def test_variation_subintervals():
    h = 0.1
    s = sweep(unit_square(), translation(unit_square(), [h, 0, 0]))
    assert variation(s, (0.0, 1.0)) == pytest.approx(2 * h, abs=1e-14)
    assert variation(s, (0.0, 0.5)) == pytest.approx(h, abs=1e-14)
    assert variation(s, (0.25, 0.75)) == pytest.approx(h, abs=1e-14)


def test_surface_mass_static():
    # static sweep: mass = integral of the slice length over time
    s = sweep(unit_square(), np.zeros((4, 3)))
    assert surface_mass(s) == pytest.approx(4.0, rel=1e-13)
    assert surface_mass(s, (0.25, 0.5)) == pytest.approx(1.0, rel=1e-13)


def test_surface_mass_inequality():
    # M(S) <= int M(S(t)) dt + Var(S), both sides by the surface's own rules
    h = 0.3
    s = sweep(unit_square(), translation(unit_square(), [h, 0, 0]))
    m = surface_mass(s)
    bound = slice_mass_integral(s) + variation(s)
    assert m <= bound + 1e-10
    assert m >= max(slice_mass_integral(s) - 1e-10, variation(s))


def test_surface_mass_inequality_random():
    rng = np.random.default_rng(21)
    lp = unit_square()
    for _ in range(20):
        d = 0.3 * rng.standard_normal((4, 3))
        s = sweep(lp, d)
        assert surface_mass(s) <= slice_mass_integral(s) + variation(s) + 1e-10


def test_degenerate_sweep_zero_mass():
    s = sweep(unit_square(), np.zeros((4, 3)), (0.0, 1.0))
    clipped = surface_mass(s, (0.5, 0.5 + 1e-300))
    assert clipped == pytest.approx(0.0, abs=1e-250)


# ---------------------------------------------------------------------------
# slicing


def test_slice_near_trace():
    lp = unit_square()
    disp = translation(lp, [0.2, 0, 0])
    s = sweep(lp, disp)
    t = 1e-12
    assert np.allclose(slice_loop(s, t).nodes, lp.nodes, atol=1e-11)


def test_slice_midpoint():
    lp = unit_square()
    disp = translation(lp, [0.2, 0, 0])
    s = sweep(lp, disp)
    assert np.allclose(slice_loop(s, 0.5).nodes, lp.nodes + 0.1 * np.array([1, 0, 0]),
                       atol=1e-15)


def test_slice_mass_preserved_under_translation():
    lp = unit_square()
    s = sweep(lp, translation(lp, [0.2, 0, 0]))
    for t in (0.1, 0.37, 0.9):
        assert loop_mass(slice_loop(s, t)) == pytest.approx(4.0, rel=1e-13)


def test_slice_domain_error():
    s = sweep(unit_square(), np.zeros((4, 3)))
    with pytest.raises(GeometryError):
        slice_loop(s, -0.1)
    with pytest.raises(GeometryError):
        slice_loop(s, 1.0)


# ---------------------------------------------------------------------------
# concatenation


def _traj(loop, vec):
    return sweep_system(DislocationSystem([loop]), [translation(loop, vec)])


def test_concatenate_with_neutral_keeps_variation():
    lp = unit_square()
    t1 = _traj(lp, [0.1, 0, 0])
    lp2 = Loop(lp.nodes + [0.1, 0, 0])
    t2 = neutral(DislocationSystem([lp2]))
    cat = concatenate(t1, t2)
    assert trajectory_variation(cat) == pytest.approx(trajectory_variation(t1),
                                                      abs=1e-14)


def test_concatenate_variation_additive():
    lp = unit_square()
    t1 = _traj(lp, [0.1, 0, 0])
    t2 = _traj(Loop(lp.nodes + [0.1, 0, 0]), [0.1, 0, 0])
    cat = concatenate(t1, t2)
    assert trajectory_variation(cat) == pytest.approx(0.4, abs=1e-12)


def test_concatenate_linf_max():
    # stretch a 1x1 square into a 1x2 rectangle (perimeter 4 -> 6), then hold
    lp = unit_square()
    disp = np.zeros((4, 3))
    disp[2:, 1] = 1.0     # nodes at y=1 move to y=2
    grow = sweep_system(DislocationSystem([lp]), [disp])
    rect = grow.final_system()
    hold = neutral(rect)
    cat = concatenate(grow, hold)
    assert linf_norm(cat) == pytest.approx(6.0, abs=1e-13)


def test_concatenate_mismatch_error():
    lp = unit_square()
    with pytest.raises(CompositionError):
        concatenate(_traj(lp, [0.1, 0, 0]), _traj(lp, [0.1, 0, 0]))


def test_concatenate_random_additivity():
    rng = np.random.default_rng(11)
    lp = unit_square()
    for _ in range(20):
        d1 = 0.2 * rng.standard_normal((4, 3))
        d2 = 0.2 * rng.standard_normal((4, 3))
        t1 = sweep_system(DislocationSystem([lp]), [d1])
        t2 = sweep_system(t1.final_system(), [d2])
        cat = concatenate(t1, t2)
        expect = trajectory_variation(t1) + trajectory_variation(t2)
        assert trajectory_variation(cat) == pytest.approx(expect, abs=1e-12)


# ---------------------------------------------------------------------------
# rescaling


def test_rescale_identity():
    t1 = _traj(unit_square(), [0.1, 0, 0])
    r = rescale_trajectory(t1, PiecewiseLinearMap.identity((0.0, 1.0)))
    assert trajectory_variation(r) == trajectory_variation(t1)
    assert np.array_equal(r.surfaces[0].final_loop().nodes,
                          t1.surfaces[0].final_loop().nodes)


def test_rescale_t_squared_variation_invariant():
    t1 = _traj(unit_square(), [0.1, 0.05, 0])
    amap = PiecewiseLinearMap.from_function(lambda t: t * t, (0.0, 1.0), 33)
    r = rescale_trajectory(t1, amap)
    assert trajectory_variation(r) == pytest.approx(trajectory_variation(t1),
                                                    abs=1e-12)
    assert surface_mass(r.surfaces[0]) != pytest.approx(
        surface_mass(t1.surfaces[0]), abs=1e-6)   # mass is not invariant


def test_rescale_slice_remap():
    t1 = _traj(unit_square(), [0.2, 0, 0])
    amap = PiecewiseLinearMap.from_function(lambda t: t * t, (0.0, 1.0), 65)
    r = rescale_trajectory(t1, amap)
    for t in (0.3, 0.5, 0.8):
        a = slice_loop(r.surfaces[0], float(amap(t)))
        b = slice_loop(t1.surfaces[0], t)
        assert np.allclose(a.nodes, b.nodes, atol=1e-12)


def test_rescale_nonmonotone_rejected():
    with pytest.raises(GeometryError):
        PiecewiseLinearMap([0.0, 0.5, 1.0], [0.0, 0.6, 0.4])


# ---------------------------------------------------------------------------
# neutral trajectory and forward operator


def test_neutral_properties():
    sys0 = DislocationSystem([unit_square(), unit_square(z=0.25, mult=2)])
    nt = neutral(sys0)
    assert trajectory_variation(nt) == 0.0
    assert linf_norm(nt) == pytest.approx(8.0, abs=1e-13)  # mult-2 loop dominates
    mid = slice_loop(nt.surfaces[0], 0.5)
    assert np.array_equal(mid.nodes, sys0.loops[0].nodes)
    fwd = dislocation_forward(nt, sys0)
    for a, b in zip(fwd.loops, sys0.loops):
        assert np.array_equal(a.nodes, b.nodes)


def test_forward_translation():
    lp = unit_square()
    sys0 = DislocationSystem([lp])
    t1 = _traj(lp, [0.15, 0, 0])
    fwd = dislocation_forward(t1, sys0)
    assert np.array_equal(fwd.loops[0].nodes, lp.nodes + [0.15, 0, 0])


def test_forward_of_concatenation():
    lp = unit_square()
    sys0 = DislocationSystem([lp])
    t1 = _traj(lp, [0.1, 0, 0])
    t2 = _traj(Loop(lp.nodes + [0.1, 0, 0]), [0.0, 0.1, 0])
    cat = concatenate(t1, t2)
    f_cat = dislocation_forward(cat, sys0)
    f_seq = dislocation_forward(t2, dislocation_forward(t1, sys0))
    assert np.array_equal(f_cat.loops[0].nodes, f_seq.loops[0].nodes)


def test_forward_trace_mismatch():
    lp = unit_square()
    other = DislocationSystem([Loop(lp.nodes + [0.05, 0, 0])])
    with pytest.raises(CompositionError):
        dislocation_forward(_traj(lp, [0.1, 0, 0]), other)


def test_system_mass_sums_representatives():
    sys0 = DislocationSystem([unit_square(), unit_square(z=0.2, mult=2)])
    assert system_mass(sys0) == pytest.approx(12.0, abs=1e-12)


def test_variation_rescale_invariance_random():
    rng = np.random.default_rng(12)
    lp = unit_square()
    for _ in range(10):
        d = 0.25 * rng.standard_normal((4, 3))
        t1 = sweep_system(DislocationSystem([lp]), [d])
        knots = np.concatenate([[0.0], np.sort(rng.uniform(0.05, 0.95, 4)), [1.0]])
        vals = np.cumsum(np.concatenate([[0.0], rng.uniform(0.1, 1.0, 5)]))
        vals /= vals[-1]
        amap = PiecewiseLinearMap(knots, vals)
        r = rescale_trajectory(t1, amap)
        assert trajectory_variation(r) == pytest.approx(
            trajectory_variation(t1), abs=1e-12)
