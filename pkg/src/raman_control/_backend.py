"""Kernel selection: compiled extension when importable, else pure Python.

Set ``RAMAN_CONTROL_BACKEND=python`` to force the fallback.
"""
import os

from . import _kernels_py

python_kernels = _kernels_py

try:
    from . import _kernels as compiled_kernels
except ImportError:  # extension not built
    compiled_kernels = None

if compiled_kernels is not None and os.environ.get("RAMAN_CONTROL_BACKEND", "") != "python":
    kernels = compiled_kernels
    BACKEND = "cython"
else:
    kernels = _kernels_py
    BACKEND = "python"
