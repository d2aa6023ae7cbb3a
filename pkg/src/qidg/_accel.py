"""Kernel backend selection.

Hot assembly kernels are written twice: a numba ``@njit`` version and a
pure-numpy version. ``QIDG_NUMBA=0`` in the environment (or a missing numba
install) selects the numpy path. The choice is made once at import time;
``use_numba`` can be flipped at runtime by benchmarks and tests.
"""
import os

try:
    import numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

_flag = os.environ.get("QIDG_NUMBA", "1").strip().lower()
use_numba = HAVE_NUMBA and _flag not in ("0", "false", "no", "off")


def njit(*args, **kwargs):
    """``numba.njit`` with caching, or the identity when numba is absent."""
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"`` kernels for subsequent calls."""
    global use_numba
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba is not installed")
        use_numba = True
    elif name == "numpy":
        use_numba = False
    else:
        raise ValueError(f"unknown backend {name!r}")


def backend():
    return "numba" if use_numba else "numpy"
