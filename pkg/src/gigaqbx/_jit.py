"""Backend selection for the hot numeric kernels.

Every hot kernel exists twice: a numba ``@njit`` loop version and a
vectorized numpy version. ``GIGAQBX_BACKEND=numpy`` forces the numpy path
(useful for debugging and on platforms without numba); the default is
numba when it imports.
"""
import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

_requested = os.environ.get("GIGAQBX_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(f"GIGAQBX_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

USE_NUMBA = HAVE_NUMBA and _requested == "numba"
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise.

    The numba variants are always compiled on demand (tests compare both
    paths), so this only degrades gracefully when numba is missing.
    """
    kwargs.setdefault("cache", True)
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)


def pick(numba_impl, numpy_impl):
    return numba_impl if USE_NUMBA else numpy_impl
