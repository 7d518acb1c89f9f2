"""Penalized rank-1 decomposition for sparse CCA.

Maximises ``u' M v`` over unit-ball vectors with L1 caps ``c1`` on ``u`` and
``c2`` on ``v``, by alternating soft-thresholded power updates.  The inner
loop lives in the kernel backend (see :mod:`caa._backend`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import InvalidSpec, ZeroMatrix, ZeroVector
from .matrix_core import as_matrix, svd


@dataclass(frozen=True)
class SparseCcaConfig:
    """L1 caps and stopping rule.  ``None`` caps default to half their maximum."""

    c1: float | None = None
    c2: float | None = None
    max_iter: int = 200
    tol: float = 1e-8

    def resolve(self, p: int, q: int) -> tuple[float, float]:
        """Concrete ``(c1, c2)`` for vectors of length ``p`` and ``q``, validated."""
        c1 = 0.5 * math.sqrt(p) if self.c1 is None else float(self.c1)
        c2 = 0.5 * math.sqrt(q) if self.c2 is None else float(self.c2)
        # Half the maximum can fall below 1 for p < 4; clamp into range.
        if self.c1 is None:
            c1 = max(c1, 1.0)
        if self.c2 is None:
            c2 = max(c2, 1.0)
        # Small slack so that c = sqrt(p) computed elsewhere is accepted.
        for name, c, dim in (("c1", c1, p), ("c2", c2, q)):
            if not (1.0 <= c <= math.sqrt(dim) * (1 + 1e-12)):
                raise InvalidSpec(f"{name}={c} outside [1, sqrt({dim})]")
        if self.max_iter < 1:
            raise InvalidSpec("max_iter must be at least 1")
        if not self.tol > 0:
            raise InvalidSpec("tol must be positive")
        return c1, c2


@dataclass(frozen=True)
class PenalizedPair:
    u: np.ndarray
    v: np.ndarray
    d: float
    iterations_used: int
    converged: bool


def l1_projection_threshold(a, c: float) -> float:
    """Smallest ``delta >= 0`` whose normalised soft-threshold of ``a`` has L1 norm at most ``c``.

    Found by 60 bisection steps on ``[0, max|a_i|]``.
    """
    a = np.asarray(a, dtype=float).ravel()
    if a.size == 0 or not np.any(a):
        raise ZeroVector("threshold needs a nonzero vector")
    if not (1.0 <= c <= math.sqrt(a.size) * (1 + 1e-12)):
        raise InvalidSpec(f"c={c} outside [1, sqrt({a.size})]")
    return float(kernels.l1_threshold(a, float(c)))


def top_right_singular_vector(M: np.ndarray) -> np.ndarray:
    return svd(M).V[:, 0].copy()


def pmd_rank1(M, cfg: SparseCcaConfig = SparseCcaConfig(), v0=None) -> PenalizedPair:
    """One sparse factor of ``M``.

    ``v0`` overrides the default start, the top right singular vector of ``M``.
    """
    M = as_matrix(M, "M")
    p, q = M.shape
    c1, c2 = cfg.resolve(p, q)
    if not np.any(M):
        raise ZeroMatrix("pmd_rank1 needs a nonzero matrix")
    if v0 is None:
        v0 = top_right_singular_vector(M)
    else:
        v0 = np.asarray(v0, dtype=float).ravel()
        if v0.size != q:
            raise InvalidSpec(f"start vector has length {v0.size}, expected {q}")
    u, v, d, iters, status, _ = kernels.pmd(M, c1, c2, v0, cfg.max_iter, cfg.tol)
    if status == kernels.STATUS_DEGENERATE and iters == 0:
        raise ZeroVector("start vector lies in the null space of M")
    return PenalizedPair(u=u, v=v, d=float(d), iterations_used=int(iters),
                         converged=status == kernels.STATUS_CONVERGED)


def pmd_trace(M, cfg: SparseCcaConfig = SparseCcaConfig(), v0=None) -> np.ndarray:
    """Objective value after each alternating iteration (diagnostics)."""
    M = as_matrix(M, "M")
    c1, c2 = cfg.resolve(*M.shape)
    if v0 is None:
        v0 = top_right_singular_vector(M)
    return kernels.pmd(M, c1, c2, np.asarray(v0, dtype=float), cfg.max_iter, cfg.tol)[5]


def pmd_multi(M, cfg: SparseCcaConfig = SparseCcaConfig(), k: int = 1) -> list[PenalizedPair]:
    """Up to ``k`` factors with deflation ``M <- M - d u v'`` between them."""
    if k < 1:
        raise InvalidSpec("k must be at least 1")
    R = as_matrix(M, "M").copy()
    pairs: list[PenalizedPair] = []
    for _ in range(k):
        if np.max(np.abs(R)) < 1e-10:
            break
        pair = pmd_rank1(R, cfg)
        if pair.d < 1e-8:
            break
        pairs.append(pair)
        R -= pair.d * np.outer(pair.u, pair.v)
    return pairs
