"""Backend switch for the hot kernels.

Set ``TUMORFEM_NUMBA=0`` before import to force the pure-numpy path. Numba is
used by default when it imports cleanly.
"""
import os

_FLAG = os.environ.get("TUMORFEM_NUMBA", "1").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and _FLAG not in ("0", "false", "no", "off")


def njit(fn):
    """Compile ``fn`` with numba, or return it unchanged when numba is off."""
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
