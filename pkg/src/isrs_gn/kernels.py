"""Kernel dispatch: compiled extension when importable, NumPy otherwise.

Set ``ISRS_GN_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
phasor_power = _kernels_py.phasor_power

if os.environ.get("ISRS_GN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        phasor_power = _compiled.phasor_power
        BACKEND = "cython"

__all__ = ["BACKEND", "phasor_power"]
