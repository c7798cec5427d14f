"""Backend selection for the hot kernels.

Set ``BANDUNITARY_NUMBA=0`` to force the pure-numpy path.  Numba is used
otherwise, when it imports.
"""

import os

try:
    import numba
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba ships with the test env
    numba = None
    NUMBA_AVAILABLE = False

_ENV_FLAG = "BANDUNITARY_NUMBA"
_state = {
    "backend": "numba"
    if NUMBA_AVAILABLE and os.environ.get(_ENV_FLAG, "1").lower() not in ("0", "false", "off", "no")
    else "numpy"
}


def backend() -> str:
    return _state["backend"]


def set_backend(name: str) -> str:
    """Switch backend at runtime; returns the previous one."""
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba is not installed")
    old, _state["backend"] = _state["backend"], name
    return old


def njit(fn):
    """Compile ``fn`` with numba when available, else return it unchanged."""
    if not NUMBA_AVAILABLE:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)
