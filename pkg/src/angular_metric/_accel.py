"""Optional numba acceleration.

Hot kernels are written once as plain Python loops and compiled with
``njit`` when numba is importable and ``ANGULAR_METRIC_DISABLE_NUMBA`` is
unset (or ``0``).  Every kernel also has a vectorized numpy counterpart;
``USE_NUMBA`` picks which one the public functions dispatch to.
"""

import os

_flag = os.environ.get("ANGULAR_METRIC_DISABLE_NUMBA", "0").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA


def njit(func):
    # fastmath stays off: reductions must be reproducible bit for bit.
    if numba is None:
        return func
    return numba.njit(cache=True, fastmath=False)(func)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
