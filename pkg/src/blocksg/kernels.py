"""Backend selection for the hot coordinate-sweep kernel.

The compiled extension is used when it imports; setting the environment
variable ``BLOCKSG_PURE_PYTHON=1`` forces the pure-Python twin.
"""
from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("BLOCKSG_PURE_PYTHON", "") not in ("", "0"):
    coordinate_sweep = _kernels_py.coordinate_sweep
    BACKEND = "python"
else:
    try:
        from ._kernels import coordinate_sweep
        BACKEND = "cython"
    except ImportError:
        coordinate_sweep = _kernels_py.coordinate_sweep
        BACKEND = "python"

python_coordinate_sweep = _kernels_py.coordinate_sweep

__all__ = ["coordinate_sweep", "python_coordinate_sweep", "BACKEND"]
