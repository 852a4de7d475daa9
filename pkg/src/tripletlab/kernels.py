"""Backend selection for the solver kernels.

The compiled extension is used when it imports; setting
``TRIPLETLAB_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

from . import _fallback
from ._fallback import OBJ_HAUS, OBJ_ISO, OBJ_SUP

__all__ = [
    "BACKEND", "OBJ_HAUS", "OBJ_ISO", "OBJ_SUP",
    "descend", "hard_objective", "hard_violation", "smooth_value_grad",
]

_impl = _fallback
BACKEND = "python"
if not os.environ.get("TRIPLETLAB_PURE_PYTHON"):
    try:
        from . import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _fallback

descend = _impl.descend
hard_objective = _impl.hard_objective
hard_violation = _impl.hard_violation
smooth_value_grad = _impl.smooth_value_grad


def worker_count() -> int:
    """Thread cap from ``TRIPLETLAB_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("TRIPLETLAB_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n
