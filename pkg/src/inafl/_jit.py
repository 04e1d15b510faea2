"""Backend switch for the numba-accelerated kernels.

Set ``INAFL_DISABLE_NUMBA=1`` before import to force the pure-numpy paths.
"""
import os

_FLAG = os.environ.get("INAFL_DISABLE_NUMBA", "").strip().lower()

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(fn):
    """Compile ``fn`` with numba when available; otherwise return it unchanged."""
    if not HAVE_NUMBA:  # pragma: no cover
        return fn
    return _njit(cache=True, nogil=True)(fn)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
