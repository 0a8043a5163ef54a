"""Numba/numpy backend selection.

Hot kernels ship in two variants: a numba ``@njit`` build and a pure-numpy
fallback. The fallback is selected by setting ``DRAGGEN_DISABLE_NUMBA=1``
in the environment (checked once at import), or automatically when numba
is not installed.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

_DISABLED = os.environ.get("DRAGGEN_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")

NUMBA_ENABLED = HAVE_NUMBA and not _DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when the numba path is active, identity otherwise."""
    if NUMBA_ENABLED:
        return numba.njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]
    return lambda f: f
