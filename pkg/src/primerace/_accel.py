"""Backend switch for the hot kernels.

Set ``PRIMERACE_NUMBA=0`` to force the pure numpy path. When numba is missing
the numpy path is used regardless.
"""
import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False


def numba_requested() -> bool:
    return os.environ.get("PRIMERACE_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


def use_numba() -> bool:
    return HAVE_NUMBA and numba_requested()


def njit(*args, **kwargs):
    """numba.njit when available, identity decorator otherwise."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

    def wrapper(f):
        return f

    if args and callable(args[0]):
        return args[0]
    return wrapper


def backend_name() -> str:
    return "numba" if use_numba() else "numpy"
