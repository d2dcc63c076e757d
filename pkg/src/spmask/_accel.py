"""Numba detection and backend selection.

The hot kernels in :mod:`spmask.kernels` come in two flavours: a numba
``@njit`` loop and a pure-numpy path. Which one the library uses is fixed at
import time:

* ``SPMASK_NO_NUMBA=1`` forces the numpy path;
* otherwise numba is used when it imports cleanly.

Both paths stay importable regardless, so tests and benchmarks can compare
them side by side.
"""
import os

try:
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    _numba_njit = None
    HAVE_NUMBA = False

_flag = os.environ.get("SPMASK_NO_NUMBA", "").strip().lower()
USE_NUMBA = HAVE_NUMBA and _flag in ("", "0", "false", "no")

BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when numba is installed, otherwise a no-op decorator."""
    if HAVE_NUMBA:
        return _numba_njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def _identity(fn):
        return fn

    return _identity
