"""Numba switch.

Set ``FERROPERIOD_DISABLE_JIT=1`` in the environment before import to force
the pure-numpy kernels even when numba is installed.
"""
import os

DISABLE_JIT = os.environ.get("FERROPERIOD_DISABLE_JIT", "0").lower() in ("1", "true", "yes")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _numba = None

HAS_NUMBA = _numba is not None
USE_NUMBA = HAS_NUMBA and not DISABLE_JIT


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAS_NUMBA:
        return _numba.njit(*args, cache=True, **kwargs)

    def wrap(fn):
        return fn

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrap
