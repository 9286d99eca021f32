"""Backend switch for the hot kernels.

Set ``AGENTIMP_NUMBA=0`` to force the pure-numpy path. Otherwise numba is used
when importable.
"""

import os

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and os.environ.get("AGENTIMP_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


def njit(fn):
    """Compile ``fn`` with numba when available, else return it unchanged.

    The compiled function is always built when numba is importable so tests and
    benchmarks can compare both paths regardless of the env flag.
    """
    if not _HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
