"""Backend selection for the hot numeric kernels.

The accelerated (numba) path is used by default whenever numba is
importable.  Setting the environment variable ``AFTMEAN_NUMBA=0`` before
import forces the pure-NumPy fallback; both implementations stay
importable for benchmarking regardless of the flag.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _flag_enabled() -> bool:
    return os.environ.get("AFTMEAN_NUMBA", "1").strip().lower() not in ("0", "false", "no")


USE_NUMBA = HAVE_NUMBA and _flag_enabled()


def compile_kernel(py_func):
    """Return the numba-compiled version of ``py_func`` (None if unavailable)."""
    if not HAVE_NUMBA:
        return None
    return numba.njit(cache=True)(py_func)
