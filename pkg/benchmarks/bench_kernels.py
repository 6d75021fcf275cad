"""Timing comparison of the numba kernels against the pure-numpy fallbacks.

Run:  python benchmarks/bench_kernels.py
The numba variants are exercised only when the numba backend is importable
and enabled (DISLO_NUMBA unset or truthy).
"""

import time

import numpy as np

from dislo import backend
from dislo._kernels import (_elastic_energy_grad_numpy, _expm3_batch,
                            _flow_substep_numpy, _scatter_gamma_numpy)
from dislo.energy import HexMesh, _load_at_qp, _pinv_at_qp, affine_field
from dislo.grid import Grid
from dislo.plastic import PlasticField


def timeit(fn, repeat=20):
    fn()  # warm up (JIT compile)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def bench_elastic():
    mesh = HexMesh(8)
    P = PlasticField.identity(Grid(8))
    rng = np.random.default_rng(0)
    y = affine_field(mesh)
    y.values += 0.01 * rng.standard_normal(y.values.shape)
    Pinv_q = _pinv_at_qp(P, mesh)
    fvals = _load_at_qp(mesh, None, 0.0)
    args = (y.values, mesh.conn, mesh.gradN, mesh.N, mesh.detJ, Pinv_q, 4.0,
            1e-6, fvals, True)
    rows = []
    t_np = timeit(lambda: _elastic_energy_grad_numpy(*args))
    rows.append(("elastic_energy_grad", "numpy", t_np))
    if backend.USE_NUMBA:
        from dislo._kernels import elastic_energy_grad
        t_nb = timeit(lambda: elastic_energy_grad(*args))
        rows.append(("elastic_energy_grad", "numba", t_nb))
    return rows


def bench_flow():
    rng = np.random.default_rng(1)
    n = 9 ** 3
    P = _expm3_batch(0.2 * rng.standard_normal((n, 3, 3)))
    g = rng.standard_normal((2, n, 3))
    b = np.array([[1.0, 0, 0], [0.2, 1.0, 0.1]])
    rows = [("flow_substep", "numpy",
             timeit(lambda: _flow_substep_numpy(P, g, b, 0.05)))]
    if backend.USE_NUMBA:
        from dislo._kernels import flow_substep
        rows.append(("flow_substep", "numba",
                     timeit(lambda: flow_substep(P, g, b, 0.05))))
    return rows


def bench_scatter():
    rng = np.random.default_rng(2)
    n = 8
    xs = rng.uniform(0.2, 0.8, (64, 3))
    ws = rng.standard_normal((64, 3))

    def run_np():
        out = np.zeros((n + 1, n + 1, n + 1, 3))
        _scatter_gamma_numpy(xs, ws, 0.375, 40.0, 1.0 / n, n, out)

    rows = [("scatter_gamma", "numpy", timeit(run_np))]
    if backend.USE_NUMBA:
        from dislo._kernels import scatter_gamma

        def run_nb():
            out = np.zeros((n + 1, n + 1, n + 1, 3))
            scatter_gamma(xs, ws, 0.375, 40.0, 1.0 / n, n, out)

        rows.append(("scatter_gamma", "numba", timeit(run_nb)))
    return rows


def main():
    print(f"active backend: {backend.backend_name()}")
    print(f"{'kernel':<22} {'variant':<8} {'time/call':>12}")
    results = {}
    for rows in (bench_elastic(), bench_flow(), bench_scatter()):
        for name, variant, t in rows:
            print(f"{name:<22} {variant:<8} {t * 1e3:>10.3f} ms")
            results[(name, variant)] = t
        numpy_t = results.get((rows[0][0], "numpy"))
        numba_t = results.get((rows[0][0], "numba"))
        if numpy_t and numba_t:
            print(f"{'':<22} {'speedup':<8} {numpy_t / numba_t:>10.1f} x")
    return results


if __name__ == "__main__":
    main()
