"""Numba switch for the hot kernels.

Setting ``MIDITONAL_DISABLE_JIT=1`` (or running without numba installed)
routes every kernel through its vectorised numpy twin instead.
"""

import os

_DISABLED = os.environ.get("MIDITONAL_DISABLE_JIT", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    JIT_ENABLED = True
except ImportError:
    JIT_ENABLED = False

    def njit(func=None, **kwargs):
        if func is not None:
            return func

        def wrapper(f):
            return f

        return wrapper


def select(jitted, fallback):
    """Return the kernel variant that matches the active backend."""
    return jitted if JIT_ENABLED else fallback
