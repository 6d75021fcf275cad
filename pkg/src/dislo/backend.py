"""Kernel backend selection.

Hot kernels exist in two variants: numba @njit loop kernels and vectorized
pure-numpy fallbacks.  The active variant is chosen once at import time from
the environment:

    DISLO_NUMBA=0     force the pure-numpy path (default: numba if importable)
    DISLO_THREADS=N   cap the numba threading layer at N threads

Results agree between backends to floating-point accumulation order; ledgers
are byte-reproducible per backend.
"""

import os

_flag = os.environ.get("DISLO_NUMBA", "1").strip().lower()
USE_NUMBA = _flag not in ("0", "false", "no", "off")

if USE_NUMBA:
    try:
        import numba
    except ImportError:
        USE_NUMBA = False

if USE_NUMBA:
    _threads = os.environ.get("DISLO_THREADS")
    if _threads:
        numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))

    def jit(func):
        return numba.njit(cache=True)(func)

else:

    def jit(func):
        # fallback marker only; numpy variants are dispatched in _kernels
        return func


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
