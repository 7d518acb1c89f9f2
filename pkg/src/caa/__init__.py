"""Canonical autocorrelation analysis (CAA) and CAA-based anomaly detection."""
from __future__ import annotations

from ._backend import BACKEND
from .errors import CaaError

__version__ = "0.1.0"

__all__ = ["BACKEND", "CaaError", "__version__"]
