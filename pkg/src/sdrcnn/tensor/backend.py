"""Kernel backend selection.

The compiled extension is preferred when importable; SDRCNN_KERNELS
overrides the choice (auto | compiled | python).  Selection happens once,
at import time.
"""
import os

from . import kernels_py

_choice = os.environ.get("SDRCNN_KERNELS", "auto").strip().lower()
if _choice not in ("auto", "compiled", "python"):
    raise ValueError(
        f"SDRCNN_KERNELS must be one of auto|compiled|python, got {_choice!r}"
    )

kernel_backend = "python"
_impl = kernels_py
if _choice in ("auto", "compiled"):
    try:
        from . import _kernels as _compiled
        _impl = _compiled
        kernel_backend = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise ImportError(
                "SDRCNN_KERNELS=compiled but the compiled extension is not built; "
                "reinstall with Cython available or use SDRCNN_KERNELS=python"
            )

pointwise_forward = _impl.pointwise_forward
pointwise_backward = _impl.pointwise_backward
depthwise_forward = _impl.depthwise_forward
depthwise_backward = _impl.depthwise_backward
