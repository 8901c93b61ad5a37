"""Optional numba acceleration for the sequential kernels.

Kernels are written in the numba-compatible subset of Python so that the same
source runs compiled or interpreted.  Set ``KFRELAX_NO_JIT=1`` before import to
force the pure Python/numpy path (useful for debugging and for the benchmark).
"""
import os

_DISABLED = os.environ.get("KFRELAX_NO_JIT", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by KFRELAX_NO_JIT")
    import numba
    USE_NUMBA = True
except ImportError:
    numba = None
    USE_NUMBA = False


def njit(fn):
    """``numba.njit(cache=True)`` when available, identity otherwise."""
    if USE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


def python_impl(fn):
    """Return the interpreted implementation behind a (possibly jitted) kernel."""
    return getattr(fn, "py_func", fn)
