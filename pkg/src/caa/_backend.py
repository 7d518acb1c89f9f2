"""Select the kernel implementation at import time.

The compiled extension is preferred.  Setting ``CAA_PURE_PYTHON=1`` in the
environment forces the numpy fallback, which is also used automatically when
the extension was not built.
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels


def _load_compiled() -> ModuleType | None:
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


def available() -> dict[str, ModuleType]:
    """All importable backends keyed by name."""
    out = {"python": _pykernels}
    compiled = _load_compiled()
    if compiled is not None:
        out["cython"] = compiled
    return out


def _select() -> ModuleType:
    if os.environ.get("CAA_PURE_PYTHON", "") not in ("", "0"):
        return _pykernels
    return _load_compiled() or _pykernels


kernels = _select()
BACKEND = kernels.NAME
