"""Kernel backend selection: numba-jitted loops vs pure-numpy fallback.

The hot inner loops (max-autoregressive recursions) are implemented twice in
``_kernels``: once as ``@njit`` loops and once vectorized in plain numpy.
The active implementation is chosen at import time from the environment
variable ``EXCEEDANCE_LAB_BACKEND``:

    EXCEEDANCE_LAB_BACKEND=numba   force numba (raises if not importable)
    EXCEEDANCE_LAB_BACKEND=numpy   force the pure-numpy path
    unset / "auto"                 numba when importable, else numpy

``set_backend`` allows switching at runtime (used by tests and the
benchmark script). Both backends are deterministic given the same inputs;
they agree to ~1e-12 relative (not bitwise: different fused arithmetic).
"""

from __future__ import annotations

import os

_VALID = ("auto", "numba", "numpy")

try:
    import numba  # noqa: F401
    _HAVE_NUMBA = True
except ImportError:
    _HAVE_NUMBA = False

_active = None


def _resolve(requested: str) -> str:
    if requested not in _VALID:
        raise ValueError(f"unknown backend {requested!r}; expected one of {_VALID}")
    if requested == "numba" and not _HAVE_NUMBA:
        raise RuntimeError("EXCEEDANCE_LAB_BACKEND=numba but numba is not importable")
    if requested == "auto":
        return "numba" if _HAVE_NUMBA else "numpy"
    return requested


def active_backend() -> str:
    """Name of the kernel backend in use: 'numba' or 'numpy'."""
    global _active
    if _active is None:
        _active = _resolve(os.environ.get("EXCEEDANCE_LAB_BACKEND", "auto").lower())
    return _active


def set_backend(name: str) -> str:
    """Switch the kernel backend at runtime. Returns the previous backend."""
    global _active
    prev = active_backend()
    _active = _resolve(name)
    return prev


def have_numba() -> bool:
    return _HAVE_NUMBA
