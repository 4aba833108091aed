"""Numba toggle.

Hot kernels are decorated with :func:`njit`. Setting ``PCQM_DISABLE_NUMBA=1``
(or running without numba installed) turns the decorator into a no-op and the
dispatchers in :mod:`pcqm._kernels` select the vectorised numpy paths.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None

_flag = os.environ.get("PCQM_DISABLE_NUMBA", "").strip().lower()
NUMBA_ENABLED = numba is not None and _flag in ("", "0", "false", "no")
BACKEND = "numba" if NUMBA_ENABLED else "numpy"


def njit(func=None, **options):
    """``numba.njit(cache=True, nogil=True)`` or the identity when disabled."""
    def wrap(f):
        if not NUMBA_ENABLED:
            return f
        opts = {"cache": True, "nogil": True}
        opts.update(options)
        return numba.njit(**opts)(f)

    if func is None:
        return wrap
    return wrap(func)
