"""Dense-matrix primitives shared by the rest of the package.

Matrices are plain ``float64`` numpy arrays.  :func:`as_matrix` is the single
entry point that validates shape and finiteness, so the other modules can
assume clean input.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstantColumn, ConvergenceFailure, DimensionMismatch, InsufficientData, NonFinite


@dataclass(frozen=True)
class StandardizationParams:
    means: np.ndarray
    stdevs: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float).ravel()
        stdevs = np.asarray(self.stdevs, dtype=float).ravel()
        if means.shape != stdevs.shape:
            raise DimensionMismatch(f"{means.size} means vs {stdevs.size} stdevs")
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(stdevs))):
            raise NonFinite("standardization parameters must be finite")
        bad = np.flatnonzero(stdevs <= 0)
        if bad.size:
            raise ConstantColumn(int(bad[0]))
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stdevs", stdevs)

    @property
    def m(self) -> int:
        return self.means.size


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``X = U @ diag(S) @ V.T`` with ``r = min(n, m)`` columns."""

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray


def as_matrix(X, name: str = "X") -> np.ndarray:
    """Return ``X`` as a finite 2-D float64 array with at least one row and column."""
    A = np.asarray(X, dtype=float)
    if A.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {A.shape}")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise DimensionMismatch(f"{name} must be non-empty, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFinite(f"{name} contains NaN or infinite entries")
    return A


def standardize(X) -> tuple[np.ndarray, StandardizationParams]:
    """Center each column and scale it to unit sample standard deviation (n-1)."""
    A = as_matrix(X)
    if A.shape[0] < 2:
        raise InsufficientData("standardize needs at least 2 rows")
    means = A.mean(axis=0)
    stdevs = A.std(axis=0, ddof=1)
    # A column of identical values can leave a rounding-level spread, so
    # compare against the column scale rather than exact zero.
    scale = np.maximum(np.abs(means), 1.0)
    const = np.flatnonzero(stdevs <= 1e-14 * scale)
    if const.size:
        raise ConstantColumn(int(const[0]))
    params = StandardizationParams(means, stdevs)
    return (A - means) / stdevs, params


def apply_standardization(X, p: StandardizationParams) -> np.ndarray:
    A = as_matrix(X)
    if A.shape[1] != p.m:
        raise DimensionMismatch(f"data has {A.shape[1]} columns, parameters have {p.m}")
    return (A - p.means) / p.stdevs


def _fix_signs(U: np.ndarray, V: np.ndarray) -> None:
    # Magnitudes within a relative 1e-12 of the column maximum count as tied,
    # so rounding noise cannot flip the choice; the lowest such index wins.
    A = np.abs(V)
    idx = np.argmax(A >= A.max(axis=0) * (1 - 1e-12), axis=0)
    flip = V[idx, np.arange(V.shape[1])] < 0
    V[:, flip] *= -1.0
    U[:, flip] *= -1.0


def svd(X, full: bool = False) -> SvdResult:
    """Singular value decomposition with a deterministic sign convention.

    For each column of ``V`` the entry of largest magnitude is made positive
    and the matching column of ``U`` is flipped with it.  With ``full=True``
    ``V`` is the complete ``m x m`` orthonormal basis and ``S`` is padded with
    zeros to length ``m``; ``U`` keeps its thin shape and is padded with zero
    columns, so the product still reconstructs ``X``.
    """
    A = as_matrix(X)
    n, m = A.shape
    try:
        if full and n < m:
            U, S, Vt = np.linalg.svd(A, full_matrices=True)
            S = np.concatenate([S, np.zeros(m - n)])
            U = np.hstack([U, np.zeros((n, m - n))])
        else:
            U, S, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"SVD did not converge: {exc}") from exc
    V = np.ascontiguousarray(Vt.T)
    U = np.array(U, copy=True)
    _fix_signs(U, V)
    return SvdResult(U=U, S=S, V=V)


def soft_threshold(x, delta):
    """``sign(x) * max(|x| - delta, 0)``; works elementwise on arrays."""
    if np.any(np.asarray(delta) < 0):
        raise ValueError("delta must be nonnegative")
    out = np.sign(x) * np.maximum(np.abs(x) - delta, 0.0)
    if np.ndim(out) == 0:
        return float(out)
    return out
