"""Optional numba acceleration for the hot numeric kernels.

Every kernel in this package is written in the numba-compatible subset of
numpy, so the exact same function body runs either JIT-compiled or as plain
numpy. Set ``POLYC_NUMBA=0`` in the environment to force the pure-numpy
path (useful for debugging and for the kernel benchmark, which times both).
"""

import os

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

NUMBA_ENABLED = _numba is not None and os.environ.get("POLYC_NUMBA", "1") != "0"


def njit(*args, **kwargs):
    """``numba.njit`` honoring the POLYC_NUMBA flag.

    In fallback mode the decorated function is returned unchanged, with a
    ``py_func`` attribute pointing at itself so callers (the benchmark) can
    always reach the pure-python version.
    """

    def wrap(func):
        if NUMBA_ENABLED:
            return _numba.njit(func, **kwargs)
        func.py_func = func
        return func

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return wrap(args[0])
    if args:
        raise TypeError("njit takes only keyword options besides the function")
    return wrap
