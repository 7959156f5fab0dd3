"""Kernel selection: compiled extension when importable, numpy otherwise.

Set ``ELASTIQ_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _lstm_py

BACKEND = "python"
lstm_forward = _lstm_py.lstm_forward
lstm_backward = _lstm_py.lstm_backward

if not os.environ.get("ELASTIQ_PURE_PYTHON"):
    try:
        from . import _lstm_ext
    except ImportError:
        _lstm_ext = None
    else:
        BACKEND = "compiled"
        lstm_forward = _lstm_ext.lstm_forward
        lstm_backward = _lstm_ext.lstm_backward


def get_backend(name: str | None = None):
    """Return ``(forward, backward)`` for ``'python'``, ``'compiled'`` or the active default."""
    if name is None:
        return lstm_forward, lstm_backward
    if name == "python":
        return _lstm_py.lstm_forward, _lstm_py.lstm_backward
    if name == "compiled":
        from . import _lstm_ext as ext

        return ext.lstm_forward, ext.lstm_backward
    raise ValueError(f"unknown backend {name!r}")
