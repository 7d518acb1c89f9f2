# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the penalized rank-1 solver.

Mirrors :mod:`caa._pykernels` exactly in algorithm and return values; the
loops run without the GIL.
"""
import numpy as np

from libc.math cimport fabs, sqrt

NAME = "cython"

cdef enum:
    BISECT_STEPS = 60
    _CONVERGED = 0
    _MAX_ITER = 1
    _DEGENERATE = 2

# Status codes shared with the Python backend.
STATUS_CONVERGED = _CONVERGED
STATUS_MAX_ITER = _MAX_ITER
STATUS_DEGENERATE = _DEGENERATE


cdef double _threshold(const double[::1] a, double c) noexcept nogil:
    """Bisection for the L1 threshold; -1 flags an all-zero vector."""
    cdef Py_ssize_t i, n = a.shape[0]
    cdef int it
    cdef double amax = 0.0, s1 = 0.0, s2 = 0.0, x, lo, hi, mid
    for i in range(n):
        x = fabs(a[i])
        s1 += x
        s2 += x * x
        if x > amax:
            amax = x
    if s2 == 0.0:
        return -1.0
    if s1 <= c * sqrt(s2):
        return 0.0
    lo = 0.0
    hi = amax
    for it in range(BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        s1 = 0.0
        s2 = 0.0
        for i in range(n):
            x = fabs(a[i]) - mid
            if x > 0.0:
                s1 += x
                s2 += x * x
        if s2 > 0.0 and s1 <= c * sqrt(s2):
            hi = mid
        else:
            lo = mid
    return hi


cdef int _update(const double[::1] a, double c, double[::1] out) noexcept nogil:
    """out <- normalize(soft_threshold(a, delta)); returns 1 if a is zero."""
    cdef Py_ssize_t i, n = a.shape[0], imax = 0
    cdef double delta, x, nrm = 0.0, amax = -1.0
    delta = _threshold(a, c)
    if delta < 0.0:
        return 1
    for i in range(n):
        x = fabs(a[i]) - delta
        if x > 0.0:
            out[i] = x if a[i] > 0.0 else -x
            nrm += x * x
        else:
            out[i] = 0.0
        if fabs(a[i]) > amax:
            amax = fabs(a[i])
            imax = i
    if nrm == 0.0:
        # Only reachable when several entries tie for the largest magnitude
        # and c forces a single survivor: keep the lowest-index maximiser.
        for i in range(n):
            out[i] = 0.0
        out[imax] = 1.0 if a[imax] > 0.0 else -1.0
        return 0
    nrm = sqrt(nrm)
    for i in range(n):
        out[i] = out[i] / nrm
    return 0


cdef int _pmd(const double[:, ::1] M, double c1, double c2,
              double[::1] u, double[::1] v, double[::1] au, double[::1] av,
              double[::1] un, double[::1] vn, double[::1] hist,
              int max_iter, double tol, int* iters) noexcept nogil:
    cdef Py_ssize_t p = M.shape[0], q = M.shape[1], i, j
    cdef int it, status = _MAX_ITER
    cdef double s, change, x
    for i in range(p):
        u[i] = 0.0
    iters[0] = 0
    for it in range(max_iter):
        for i in range(p):
            s = 0.0
            for j in range(q):
                s += M[i, j] * v[j]
            au[i] = s
        if _update(au, c1, un):
            status = _DEGENERATE
            break
        for j in range(q):
            av[j] = 0.0
        for i in range(p):
            x = un[i]
            if x != 0.0:
                for j in range(q):
                    av[j] += M[i, j] * x
        if _update(av, c2, vn):
            status = _DEGENERATE
            break
        change = 0.0
        s = 0.0
        for i in range(p):
            x = fabs(un[i] - u[i])
            if x > change:
                change = x
            u[i] = un[i]
        for j in range(q):
            x = fabs(vn[j] - v[j])
            if x > change:
                change = x
            v[j] = vn[j]
            s += vn[j] * av[j]
        hist[it] = s
        iters[0] = it + 1
        if change < tol:
            status = _CONVERGED
            break
    return status


cdef void _orient(double[::1] u, double[::1] v) noexcept nogil:
    """Flip (u, v) jointly so the largest-magnitude entry of v is positive."""
    cdef Py_ssize_t i, imax = 0
    cdef double amax = 0.0
    for i in range(v.shape[0]):
        if fabs(v[i]) > amax:
            amax = fabs(v[i])
    # Same near-tie rule as the SVD sign convention: lowest index within 1e-12.
    for i in range(v.shape[0]):
        if fabs(v[i]) >= amax * (1.0 - 1e-12):
            imax = i
            break
    if v[imax] < 0.0:
        for i in range(v.shape[0]):
            v[i] = -v[i]
        for i in range(u.shape[0]):
            u[i] = -u[i]


cdef double _objective(const double[:, ::1] M, const double[::1] u, const double[::1] v) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double s = 0.0, r
    for i in range(M.shape[0]):
        if u[i] != 0.0:
            r = 0.0
            for j in range(M.shape[1]):
                r += M[i, j] * v[j]
            s += u[i] * r
    return s


def l1_threshold(a, double c):
    """Return the L1 threshold for ``a`` (``-1.0`` if ``a`` is all zeros)."""
    cdef const double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double out
    with nogil:
        out = _threshold(av, c)
    return out


def pmd(M, double c1, double c2, v0, int max_iter, double tol):
    """Alternating penalized rank-1 updates from ``v0``.

    Returns ``(u, v, d, iterations, status, history)`` where ``history``
    holds the objective after each completed iteration.
    """
    cdef const double[:, ::1] Mv = np.ascontiguousarray(M, dtype=np.float64)
    cdef Py_ssize_t p = Mv.shape[0], q = Mv.shape[1]
    u = np.zeros(p)
    v = np.array(v0, dtype=np.float64, copy=True)
    hist = np.zeros(max(max_iter, 1))
    cdef double[::1] uu = u, vv = v, hh = hist
    cdef double[::1] au = np.empty(p), av = np.empty(q), un = np.empty(p), vn = np.empty(q)
    cdef int iters = 0, status
    cdef double d
    with nogil:
        status = _pmd(Mv, c1, c2, uu, vv, au, av, un, vn, hh, max_iter, tol, &iters)
        _orient(uu, vv)
        d = _objective(Mv, uu, vv)
    return u, v, d, iters, status, hist[:iters].copy()


def best_disjoint(M, double c1, double c2, starts, double eps, int max_iter, double tol, double min_d):
    """Run :func:`pmd` from every row of ``starts`` on square ``M``.

    Among solutions with relative sparseness ``1 - sum|u_i v_i| >= 1 - eps``
    and objective above ``min_d``, return ``(index, u, v, d)`` for the largest
    objective (lowest index on ties).  ``index`` is -1 when none qualify.
    """
    cdef const double[:, ::1] Mv = np.ascontiguousarray(M, dtype=np.float64)
    cdef const double[:, ::1] S = np.ascontiguousarray(starts, dtype=np.float64)
    cdef Py_ssize_t m = Mv.shape[0], k, i
    if Mv.shape[1] != m or S.shape[1] != m:
        raise ValueError("best_disjoint needs a square matrix and matching starts")
    u = np.zeros(m)
    v = np.zeros(m)
    best_u = np.zeros(m)
    best_v = np.zeros(m)
    hist = np.zeros(max(max_iter, 1))
    cdef double[::1] uu = u, vv = v, bu = best_u, bv = best_v, hh = hist
    cdef double[::1] au = np.empty(m), av = np.empty(m), un = np.empty(m), vn = np.empty(m)
    cdef int iters = 0, status, best = -1
    cdef double d, t, best_d = 0.0
    with nogil:
        for k in range(S.shape[0]):
            for i in range(m):
                vv[i] = S[k, i]
            status = _pmd(Mv, c1, c2, uu, vv, au, av, un, vn, hh, max_iter, tol, &iters)
            if status == _DEGENERATE:
                continue
            _orient(uu, vv)
            d = _objective(Mv, uu, vv)
            t = 1.0
            for i in range(m):
                t -= fabs(uu[i] * vv[i])
            if t >= 1.0 - eps and d > min_d and (best < 0 or d > best_d):
                best = <int>k
                best_d = d
                for i in range(m):
                    bu[i] = uu[i]
                    bv[i] = vv[i]
    return best, best_u, best_v, best_d
