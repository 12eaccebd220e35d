"""Kernel backend selection.

The compiled extension is used when importable; setting the environment
variable ``LCAOBOUND_PURE_PYTHON`` to a non-empty value forces the NumPy
fallback.
"""
import os

from . import _kernels_py

if os.environ.get("LCAOBOUND_PURE_PYTHON"):
    kernels = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        kernels = _kernels_py
        BACKEND = "python"

__all__ = ["kernels", "BACKEND", "_kernels_py"]
