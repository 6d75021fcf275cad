"""Backend parity: the numba kernels and the numpy fallbacks implement the
same arithmetic (up to accumulation order)."""

import numpy as np
import pytest

from dislo import backend
from dislo._kernels import (_det3_batch, _elastic_energy_grad_numpy,
                            _expm3_batch, _flow_substep_numpy,
                            _scatter_gamma_numpy, elastic_energy_grad, expm3,
                            flow_substep, scatter_gamma)
from dislo.energy import HexMesh, _pinv_at_qp, affine_field
from dislo.grid import Grid
from dislo.plastic import PlasticField

numba_only = pytest.mark.skipif(not backend.USE_NUMBA,
                                reason="numba backend disabled")


def test_expm3_nilpotent_exact():
    N = np.outer([1, 0, 0], [0, 0, 1.0])
    assert np.array_equal(expm3(N), np.eye(3) + N)
    assert np.array_equal(expm3(0.0 * N), np.eye(3))


def test_expm3_against_scipy():
    from scipy.linalg import expm as scipy_expm

    rng = np.random.default_rng(40)
    for _ in range(50):
        B = rng.standard_normal((3, 3))
        ref = scipy_expm(B)
        assert np.abs(expm3(B) - ref).max() <= 1e-12 * max(1.0, np.abs(ref).max())


def test_expm3_unit_det_for_tracefree():
    rng = np.random.default_rng(41)
    B = rng.standard_normal((64, 3, 3))
    B -= np.trace(B, axis1=-2, axis2=-1)[:, None, None] / 3.0 * np.eye(3)
    dets = _det3_batch(_expm3_batch(B))
    assert np.abs(dets - 1.0).max() <= 1e-12


@numba_only
def test_flow_substep_parity():
    rng = np.random.default_rng(42)
    n = 50
    P = _expm3_batch(0.3 * rng.standard_normal((n, 3, 3)))
    g = rng.standard_normal((2, n, 3))
    b = np.array([[1.0, 0, 0], [0.2, 1.0, 0.1]])
    out_nb, res_nb = flow_substep(P.copy(), g, b, 0.05)
    out_np, res_np = _flow_substep_numpy(P.copy(), g, b, 0.05)
    assert np.abs(out_nb - out_np).max() <= 1e-13
    assert abs(res_nb - res_np) <= 1e-13


@numba_only
def test_scatter_gamma_parity():
    rng = np.random.default_rng(43)
    n = 8
    xs = rng.uniform(0.2, 0.8, (20, 3))
    ws = rng.standard_normal((20, 3))
    a = np.zeros((n + 1, n + 1, n + 1, 3))
    b = np.zeros_like(a)
    scatter_gamma(xs, ws, 0.3, 5.0, 1.0 / n, n, a)
    _scatter_gamma_numpy(xs, ws, 0.3, 5.0, 1.0 / n, n, b)
    assert np.abs(a - b).max() <= 1e-13 * max(1.0, np.abs(b).max())


@numba_only
def test_elastic_energy_grad_parity():
    mesh = HexMesh(3)
    P = PlasticField.identity(Grid(3))
    rng = np.random.default_rng(44)
    y = affine_field(mesh)
    y.values += 0.03 * rng.standard_normal(y.values.shape)
    Pinv_q = _pinv_at_qp(P, mesh)
    fvals = rng.standard_normal((mesh.qpoints.shape[0], 8, 3))
    e_nb, g_nb, d_nb = elastic_energy_grad(y.values, mesh.conn, mesh.gradN,
                                           mesh.N, mesh.detJ, Pinv_q, 4.0,
                                           1e-6, fvals, True)
    e_np, g_np, d_np = _elastic_energy_grad_numpy(y.values, mesh.conn,
                                                  mesh.gradN, mesh.N, mesh.detJ,
                                                  Pinv_q, 4.0, 1e-6, fvals, True)
    assert abs(e_nb - e_np) <= 1e-11 * (1 + abs(e_np))
    assert np.abs(g_nb - g_np).max() <= 1e-11 * (1 + np.abs(g_np).max())
    assert abs(d_nb - d_np) <= 1e-13
