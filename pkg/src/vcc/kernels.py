"""Kernel dispatch: compiled extension when built, numpy fallback otherwise.

Set ``VCC_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
component_boxes = _kernels_py.component_boxes
resize_bilinear = _kernels_py.resize_bilinear
block_match = _kernels_py.block_match

if os.environ.get("VCC_PURE_PYTHON") != "1":
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        component_boxes = _ckernels.component_boxes
        resize_bilinear = _ckernels.resize_bilinear
        block_match = _ckernels.block_match

__all__ = ["BACKEND", "block_match", "component_boxes", "resize_bilinear"]
