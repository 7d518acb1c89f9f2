"""Canonical autocorrelation analysis.

Finds pairs of sparse, disjoint-support direction vectors ``(u, v)`` in one
feature space such that the projections ``X u`` and ``X v`` are strongly
correlated.  Each pair comes from a sparse CCA of the kernel
``X'X - lambda I``, with ``lambda`` raised along a grid until the two vectors
stop sharing coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import DimensionMismatch, InsufficientData, InvalidSpec, NoPairsFound
from .matrix_core import SvdResult, as_matrix, svd

ZERO_CUTOFF = 1e-10
MIN_OBJECTIVE = 1e-8


@dataclass(frozen=True)
class CanonicalPair:
    u: np.ndarray
    v: np.ndarray
    lam: float
    sparseness: float
    correlation: float
    objective: float = 0.0

    @property
    def support_u(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(np.abs(self.u) > ZERO_CUTOFF))

    @property
    def support_v(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(np.abs(self.v) > ZERO_CUTOFF))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.support_u) | set(self.support_v)))


@dataclass(frozen=True)
class CaaConfig:
    """Settings for :func:`fit_caa`.

    ``c1``/``c2`` are L1 caps on ``u``/``v`` (clamped to ``sqrt(m)``);
    ``max_pairs=None`` means up to ``m`` pairs.  A solution is accepted once
    ``t(u, v) >= 1 - sparseness_tol``; overlapping coordinates are then
    assigned to whichever vector holds the larger weight, so returned pairs
    always have disjoint supports.
    """

    c1: float = 1.3
    c2: float = 1.3
    max_pairs: int | None = None
    lambda_grid_size: int = 100
    sparseness_tol: float = 0.02
    min_correlation: float = 0.3
    max_iter: int = 200
    tol: float = 1e-8
    deflation: str = "symmetric"

    def __post_init__(self):
        if self.lambda_grid_size < 2:
            raise InvalidSpec("lambda_grid_size must be at least 2")
        if not 0 < self.sparseness_tol < 1:
            raise InvalidSpec("sparseness_tol must lie in (0, 1)")
        if self.c1 < 1 or self.c2 < 1:
            raise InvalidSpec("L1 caps must be at least 1")
        if self.max_pairs is not None and self.max_pairs < 1:
            raise InvalidSpec("max_pairs must be at least 1")
        if not -1 <= self.min_correlation <= 1:
            raise InvalidSpec("min_correlation must lie in [-1, 1]")
        if self.deflation not in ("symmetric", "one-sided"):
            raise InvalidSpec(f"unknown deflation {self.deflation!r}")
        if self.max_iter < 1 or not self.tol > 0:
            raise InvalidSpec("max_iter must be >= 1 and tol > 0")

    def caps(self, m: int) -> tuple[float, float]:
        top = math.sqrt(m)
        return min(self.c1, top), min(self.c2, top)


@dataclass(frozen=True)
class HatMatrices:
    x_hat: np.ndarray
    y_hat: np.ndarray
    lam: float

    def kernel(self) -> np.ndarray:
        return self.x_hat.T @ self.y_hat


def build_hat_matrices(X_std, lam: float, decomposition: SvdResult | None = None) -> HatMatrices:
    """``x_hat = [V (S^2 - lam I)]'`` and ``y_hat = V'`` so ``x_hat' y_hat = X'X - lam I``.

    ``V`` is the full ``m x m`` right singular basis.  Pass a precomputed
    ``svd(X_std, full=True)`` to reuse it across many ``lam`` values.
    """
    if lam < 0:
        raise InvalidSpec("lambda must be nonnegative")
    if decomposition is None:
        decomposition = svd(as_matrix(X_std), full=True)
    V, S = decomposition.V, decomposition.S
    if V.shape[0] != V.shape[1]:
        raise DimensionMismatch("hat matrices need the full right singular basis")
    x_hat = (V * (S**2 - lam)).T
    return HatMatrices(x_hat=x_hat, y_hat=V.T.copy(), lam=float(lam))


def relative_sparseness(u, v) -> float:
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape != v.shape:
        raise DimensionMismatch(f"u has length {u.size}, v has length {v.size}")
    return float(1.0 - np.abs(u * v).sum())


def project(X_std, pair: CanonicalPair) -> np.ndarray:
    A = as_matrix(X_std)
    if A.shape[1] != pair.u.size:
        raise DimensionMismatch(f"data has {A.shape[1]} columns, pair has {pair.u.size}")
    return np.column_stack([A @ pair.u, A @ pair.v])


def lambda_grid(sigma1_sq: float, size: int) -> np.ndarray:
    """``0`` followed by ``size`` geometric points from ``1e-4 * sigma1_sq`` to ``sigma1_sq``."""
    if sigma1_sq <= 0:
        return np.zeros(1)
    return np.concatenate([[0.0], np.geomspace(sigma1_sq * 1e-4, sigma1_sq, size)])


def _starts(M: np.ndarray) -> np.ndarray:
    """Top right singular vector of ``M`` followed by every coordinate vector.

    On a symmetric kernel the alternating updates from a symmetric start keep
    ``u = +-v``; coordinate starts break that symmetry.
    """
    m = M.shape[0]
    return np.vstack([svd(M).V[:, 0], np.eye(m)])


def _snap_disjoint(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u = np.where(np.abs(u) > ZERO_CUTOFF, u, 0.0)
    v = np.where(np.abs(v) > ZERO_CUTOFF, v, 0.0)
    overlap = (u != 0) & (v != 0)
    keep_u = np.abs(u) >= np.abs(v)
    u = np.where(overlap & ~keep_u, 0.0, u)
    v = np.where(overlap & keep_u, 0.0, v)
    return u / np.linalg.norm(u), v / np.linalg.norm(v)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float(a @ a) * float(b @ b))
    return float(a @ b) / den if den > 0 else 0.0


def accepting_solution(M: np.ndarray, cfg: CaaConfig):
    """Best multi-start solution of ``M`` that meets the sparseness target, or ``None``."""
    c1, c2 = cfg.caps(M.shape[0])
    idx, u, v, d = kernels.best_disjoint(M, c1, c2, _starts(M), cfg.sparseness_tol,
                                          cfg.max_iter, cfg.tol, MIN_OBJECTIVE)
    if idx < 0:
        return None
    return u, v, d


def fit_caa(X_std, cfg: CaaConfig = CaaConfig()) -> list[CanonicalPair]:
    """Canonical pairs of ``X_std`` in discovery order.

    Raises :class:`NoPairsFound` if the first sweep over the lambda grid never
    yields a sparse enough solution.  Fewer than ``max_pairs`` are returned
    when a later sweep fails or a pair's projection correlation falls below
    ``min_correlation``.
    """
    X = as_matrix(X_std)
    n, m = X.shape
    if n <= 2 or m < 2:
        raise InsufficientData(f"fit_caa needs n > 2 and m >= 2, got {n}x{m}")
    k = min(cfg.max_pairs or m, m)
    dec = svd(X, full=True)
    grid = lambda_grid(float(dec.S[0] ** 2), cfg.lambda_grid_size)
    K = X.T @ X
    eye = np.eye(m)
    pairs: list[CanonicalPair] = []
    for i in range(k):
        found = None
        for lam in grid:
            if i == 0:
                M = build_hat_matrices(X, lam, dec).kernel()
            else:
                M = K - lam * eye
            if not np.any(M):
                continue
            sol = accepting_solution(M, cfg)
            if sol is not None:
                found = (lam, sol)
                break
        if found is None:
            if i == 0:
                raise NoPairsFound("no lambda on the grid gave disjoint canonical vectors")
            break
        lam, (u, v, _) = found
        u, v = _snap_disjoint(u, v)
        d = float(u @ K @ v)
        r = _pearson(X @ u, X @ v)
        if abs(r) < cfg.min_correlation:
            break
        pairs.append(CanonicalPair(u=u, v=v, lam=float(lam), sparseness=relative_sparseness(u, v),
                                   correlation=r, objective=d))
        if cfg.deflation == "symmetric":
            K = K - d * (np.outer(u, v) + np.outer(v, u))
        else:
            K = K - d * np.outer(u, v)
    return pairs
