"""Engine selection for the hot kernels.

Set ``MLNWALK_ENGINE=python`` to run every kernel as plain Python (useful for
debugging and on platforms without numba).  The default is ``numba`` when it
imports cleanly.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

ENGINES = ("numba", "python")


def default_engine():
    requested = os.environ.get("MLNWALK_ENGINE", "").strip().lower()
    if requested == "python" or not HAVE_NUMBA:
        return "python"
    if requested not in ("", "numba"):
        raise ValueError(f"MLNWALK_ENGINE must be one of {ENGINES}, got {requested!r}")
    return "numba"


def jit(fn):
    """Compile ``fn`` with numba if available; return ``fn`` unchanged otherwise."""
    if not HAVE_NUMBA:
        return fn
    return numba.njit(nogil=True, cache=True)(fn)
