"""Pure-Python (numpy) versions of the solver kernels.

Used when the compiled extension is unavailable or ``CAA_PURE_PYTHON=1`` is
set.  The algorithm and return conventions match :mod:`caa._kernels`; only
floating-point summation order differs.
"""
from __future__ import annotations

import numpy as np

NAME = "python"

BISECT_STEPS = 60

STATUS_CONVERGED = 0
STATUS_MAX_ITER = 1
STATUS_DEGENERATE = 2


def l1_threshold(a, c: float) -> float:
    """Return the L1 threshold for ``a`` (``-1.0`` if ``a`` is all zeros)."""
    x = np.abs(np.asarray(a, dtype=float))
    s2 = float(x @ x)
    if s2 == 0.0:
        return -1.0
    if x.sum() <= c * np.sqrt(s2):
        return 0.0
    lo, hi = 0.0, float(x.max())
    for _ in range(BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        w = np.maximum(x - mid, 0.0)
        s2 = float(w @ w)
        if s2 > 0.0 and w.sum() <= c * np.sqrt(s2):
            hi = mid
        else:
            lo = mid
    return hi


def _update(a: np.ndarray, c: float) -> np.ndarray | None:
    delta = l1_threshold(a, c)
    if delta < 0.0:
        return None
    w = np.sign(a) * np.maximum(np.abs(a) - delta, 0.0)
    nrm = np.sqrt(w @ w)
    if nrm == 0.0:
        # Tie for the largest magnitude with c forcing a single survivor.
        w = np.zeros_like(a)
        i = int(np.argmax(np.abs(a)))
        w[i] = 1.0 if a[i] > 0 else -1.0
        return w
    return w / nrm


def _orient(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.abs(v)
    if v[int(np.argmax(a >= a.max() * (1 - 1e-12)))] < 0:
        return -u, -v
    return u, v


def pmd(M, c1: float, c2: float, v0, max_iter: int, tol: float):
    """Alternating penalized rank-1 updates from ``v0``.

    Returns ``(u, v, d, iterations, status, history)``.
    """
    M = np.ascontiguousarray(M, dtype=float)
    u = np.zeros(M.shape[0])
    v = np.array(v0, dtype=float, copy=True)
    hist = []
    status = STATUS_MAX_ITER
    for _ in range(max_iter):
        un = _update(M @ v, c1)
        if un is None:
            status = STATUS_DEGENERATE
            break
        av = M.T @ un
        vn = _update(av, c2)
        if vn is None:
            status = STATUS_DEGENERATE
            break
        change = max(np.max(np.abs(un - u)), np.max(np.abs(vn - v)))
        u, v = un, vn
        hist.append(float(v @ av))
        if change < tol:
            status = STATUS_CONVERGED
            break
    u, v = _orient(u, v)
    d = float(u @ M @ v)
    return u, v, d, len(hist), status, np.array(hist)


def best_disjoint(M, c1: float, c2: float, starts, eps: float, max_iter: int, tol: float, min_d: float):
    """Best accepting solution over several starts; see the compiled version."""
    M = np.ascontiguousarray(M, dtype=float)
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    m = M.shape[0]
    if M.shape[1] != m or starts.shape[1] != m:
        raise ValueError("best_disjoint needs a square matrix and matching starts")
    best, best_u, best_v, best_d = -1, np.zeros(m), np.zeros(m), 0.0
    for k, v0 in enumerate(starts):
        u, v, d, _, status, _ = pmd(M, c1, c2, v0, max_iter, tol)
        if status == STATUS_DEGENERATE:
            continue
        t = 1.0 - float(np.abs(u * v).sum())
        if t >= 1.0 - eps and d > min_d and (best < 0 or d > best_d):
            best, best_u, best_v, best_d = k, u, v, d
    return best, best_u, best_v, best_d
