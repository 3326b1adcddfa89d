"""Kernel dispatch: compiled Cython core when built, otherwise the fallback.

Set ``DISTAUDIT_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py as python_backend

compiled_backend = None
if not os.environ.get("DISTAUDIT_PURE_PYTHON"):
    try:
        from . import _kernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:  # extension not built
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend

BACKEND: str = _active.BACKEND
sobol_points = _active.sobol_points
block_digests = _active.block_digests
mix64 = python_backend.mix64

__all__ = ["BACKEND", "sobol_points", "block_digests", "mix64",
           "python_backend", "compiled_backend"]
