"""Kernel backend selection.

The compiled extension ``safezo._core`` is used when it imports; otherwise
the numpy implementation in ``safezo._kernels_py`` is used. Setting
``SAFEZO_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _kernels_py

_NAMES = (
    "fd_gradients",
    "barrier_value",
    "barrier_direction",
    "local_smoothness",
    "effective_slack",
    "probe_radius",
    "step_size",
    "barrier_step",
)


def _load():
    if os.environ.get("SAFEZO_PURE_PYTHON", "") not in ("", "0"):
        return _kernels_py, "python"
    try:
        from . import _core
    except ImportError:
        return _kernels_py, "python"
    return _core, "cython"


_impl, BACKEND = _load()

fd_gradients = _impl.fd_gradients
barrier_value = _impl.barrier_value
barrier_direction = _impl.barrier_direction
local_smoothness = _impl.local_smoothness
effective_slack = _impl.effective_slack
probe_radius = _impl.probe_radius
step_size = _impl.step_size
barrier_step = _impl.barrier_step


def backends():
    """Return ``{name: module}`` for every importable backend."""
    out = {"python": _kernels_py}
    try:
        from . import _core
    except ImportError:
        pass
    else:
        out["cython"] = _core
    return out


__all__ = ["BACKEND", "backends", *_NAMES]
