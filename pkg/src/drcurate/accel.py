"""Numba acceleration toggle.

Hot kernels in this package ship in two flavors: a plain-loop
implementation compiled with ``numba.njit`` and a vectorized numpy
fallback. Which one runs is decided once, at import time: the jitted
path is active when numba imports cleanly and the ``DRCURATE_NO_NUMBA``
environment variable is unset (or falsy). ``benchmarks/bench_kernels.py``
times both paths side by side.
"""

import os

__all__ = ["HAVE_NUMBA", "NUMBA_DISABLED", "using_numba", "maybe_jit"]


def _env_disabled() -> bool:
    return os.environ.get("DRCURATE_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


NUMBA_DISABLED = _env_disabled()

if NUMBA_DISABLED:
    HAVE_NUMBA = False
else:
    try:
        from numba import njit as _njit

        HAVE_NUMBA = True
    except ImportError:
        HAVE_NUMBA = False


def using_numba() -> bool:
    """True when the jitted kernel path is active for this process."""
    return HAVE_NUMBA


def maybe_jit(func):
    """Compile ``func`` with numba when active, else return it unchanged.

    The uncompiled function stays reachable as ``.py_func`` either way, so
    tests and benchmarks can pin down one specific path.
    """
    if HAVE_NUMBA:
        return _njit(cache=True)(func)
    func.py_func = func
    return func
