"""Thermal solver selection: compiled extension when importable, pure Python otherwise.

``ELASTIQ_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os

from . import _thermal_py

BACKEND = "python"
solve_thermal = _thermal_py.solve_thermal

if not os.environ.get("ELASTIQ_PURE_PYTHON"):
    try:
        from . import _thermal_ext
    except ImportError:
        _thermal_ext = None
    else:
        BACKEND = "compiled"
        solve_thermal = _thermal_ext.solve_thermal


def get_solver(name: str | None = None):
    if name is None:
        return solve_thermal
    if name == "python":
        return _thermal_py.solve_thermal
    if name == "compiled":
        from . import _thermal_ext as ext

        return ext.solve_thermal
    raise ValueError(f"unknown backend {name!r}")
