"""Backend selection for the per-sample kernels.

The compiled extension is used when it imports; set ``SONARPOINT_PURE=1`` to
force the pure-Python implementation.
"""
import os

from . import _kernels_py
from ._kernels_py import (  # noqa: F401  layout constants shared by both backends
    CH_STRIDE,
    LEVD_STATE_LEN,
    STATIC,
    STATIC_OK,
    REFRESH_T,
    UNWRAPPED,
    new_levd_state,
)

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("SONARPOINT_PURE"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass

levd_unwrap = _impl.levd_unwrap
hp_threshold_detect = _impl.hp_threshold_detect


def backends():
    """All importable backends, keyed by name (used by tests and benchmarks)."""
    found = {"python": _kernels_py}
    try:
        from . import _ckernels

        found["cython"] = _ckernels
    except ImportError:
        pass
    return found


def use_backend(name: str) -> str:
    """Switch the active backend at runtime; returns the previous one."""
    global BACKEND, _impl, levd_unwrap, hp_threshold_detect
    found = backends()
    if name not in found:
        raise ValueError(f"backend {name!r} is not available (have {sorted(found)})")
    prev = BACKEND
    BACKEND, _impl = name, found[name]
    levd_unwrap = _impl.levd_unwrap
    hp_threshold_detect = _impl.hp_threshold_detect
    return prev
