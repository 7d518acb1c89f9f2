from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from caa.errors import InvalidSpec, ZeroMatrix, ZeroVector
from caa.sparse_cca import SparseCcaConfig, l1_projection_threshold, pmd_multi, pmd_rank1, pmd_trace


def inactive(p, q):
    return SparseCcaConfig(c1=math.sqrt(p), c2=math.sqrt(q))


def brute_force_3x3(M, c, step=0.01):
    """Max of u'Mv over a grid of feasible 1- and 2-sparse unit vectors."""
    cands = [s * np.eye(3)[i] for i in range(3) for s in (1.0, -1.0)]
    for i, j in itertools.combinations(range(3), 2):
        for th in np.arange(0.0, 2 * np.pi, step):
            w = np.zeros(3)
            w[i], w[j] = np.cos(th), np.sin(th)
            if np.abs(w).sum() <= c:
                cands.append(w)
    C = np.array(cands)
    return float((C @ M @ C.T).max())


def test_threshold_examples():
    assert l1_projection_threshold([1.0, 0.0, 0.0], 1.0) == 0.0
    assert l1_projection_threshold([1.0, 1.0], math.sqrt(2)) == 0.0
    assert l1_projection_threshold([3.0, 1.0], 1.0) == pytest.approx(1.0, abs=1e-9)


def test_threshold_is_minimal_by_scan():
    # Scan a fine delta grid for the first feasible value.
    a = np.array([3.0, 1.0])
    grid = np.linspace(0, 3, 300001)
    feasible = []
    for d in grid[::1000]:
        w = np.maximum(np.abs(a) - d, 0)
        if w.any() and w.sum() / np.linalg.norm(w) <= 1.0:
            feasible.append(d)
    assert l1_projection_threshold(a, 1.0) <= feasible[0] + 1e-9


def test_threshold_errors():
    with pytest.raises(ZeroVector):
        l1_projection_threshold([0.0, 0.0], 1.0)
    with pytest.raises(InvalidSpec):
        l1_projection_threshold([1.0, 2.0], 2.0)


def test_inactive_constraints_reproduce_svd(rng):
    M = rng.standard_normal((7, 5))
    pair = pmd_rank1(M, inactive(7, 5))
    U, S, Vt = np.linalg.svd(M)
    assert pair.d == pytest.approx(S[0], abs=1e-6)
    assert abs(abs(pair.u @ U[:, 0]) - 1) < 1e-6
    assert abs(abs(pair.v @ Vt[0]) - 1) < 1e-6
    assert pair.converged


def test_diag_unit_l1_recovers_first_axis():
    pair = pmd_rank1(np.diag([5.0, 1.0]), SparseCcaConfig(c1=1.0, c2=1.0))
    np.testing.assert_array_equal(pair.u, [1.0, 0.0])
    np.testing.assert_array_equal(pair.v, [1.0, 0.0])
    assert pair.d == 5.0


def test_random_3x3_against_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(5):
        M = rng.standard_normal((3, 3))
        pair = pmd_rank1(M, SparseCcaConfig(c1=1.2, c2=1.2))
        assert pair.d >= brute_force_3x3(M, 1.2) - 1e-3


def test_zero_matrix():
    with pytest.raises(ZeroMatrix):
        pmd_rank1(np.zeros((3, 3)))


def test_default_caps_are_half_max():
    assert SparseCcaConfig().resolve(16, 36) == (2.0, 3.0)
    assert SparseCcaConfig().resolve(2, 2) == (1.0, 1.0)


def test_invalid_caps():
    with pytest.raises(InvalidSpec):
        pmd_rank1(np.eye(3), SparseCcaConfig(c1=0.5))
    with pytest.raises(InvalidSpec):
        pmd_rank1(np.eye(3), SparseCcaConfig(c2=2.0))


def test_multi_diag():
    pairs = pmd_multi(np.diag([3.0, 2.0]), inactive(2, 2), k=2)
    assert len(pairs) == 2
    np.testing.assert_allclose(pairs[0].u, [1, 0], atol=1e-12)
    np.testing.assert_allclose(pairs[1].v, [0, 1], atol=1e-12)
    assert [p.d for p in pairs] == pytest.approx([3.0, 2.0], abs=1e-12)


def test_multi_rank_one_stops():
    M = np.outer([1.0, 2.0, 3.0], [1.0, -1.0, 0.5])
    assert len(pmd_multi(M, inactive(3, 3), k=3)) == 1


def test_multi_frobenius_identity(rng):
    M = rng.standard_normal((6, 6))
    pairs = pmd_multi(M, inactive(6, 6), k=6)
    assert sum(p.d**2 for p in pairs) == pytest.approx(np.sum(M**2), abs=1e-6)


mats = st.tuples(st.integers(2, 9), st.integers(2, 9), st.integers(0, 2**32 - 1))


@settings(max_examples=60, deadline=None)
@given(mats, st.floats(0, 1), st.floats(0, 1))
def test_constraints_hold(shape, f1, f2):
    p, q, seed = shape
    M = np.random.default_rng(seed).standard_normal((p, q))
    c1 = 1 + f1 * (math.sqrt(p) - 1)
    c2 = 1 + f2 * (math.sqrt(q) - 1)
    pair = pmd_rank1(M, SparseCcaConfig(c1=c1, c2=c2))
    assert np.linalg.norm(pair.u) <= 1 + 1e-8 and np.linalg.norm(pair.v) <= 1 + 1e-8
    assert np.abs(pair.u).sum() <= c1 + 1e-6 and np.abs(pair.v).sum() <= c2 + 1e-6
    assert pair.d >= 0
    assert pair.d == pytest.approx(pair.u @ M @ pair.v, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(mats, st.floats(0, 1))
def test_objective_monotone(shape, f):
    p, q, seed = shape
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((p, q))
    c = 1 + f * (math.sqrt(min(p, q)) - 1)
    # A random start exercises more iterations than the SVD start.
    hist = pmd_trace(M, SparseCcaConfig(c1=c, c2=c), v0=rng.standard_normal(q))
    assert np.all(np.diff(hist) >= -1e-12)


@settings(max_examples=40, deadline=None)
@given(mats, st.floats(0, 1))
def test_deflation_shrinks_frobenius(shape, f):
    p, q, seed = shape
    M = np.random.default_rng(seed).standard_normal((p, q))
    c = 1 + f * (math.sqrt(min(p, q)) - 1)
    pair = pmd_rank1(M, SparseCcaConfig(c1=c, c2=c))
    if pair.d > 0:
        R = M - pair.d * np.outer(pair.u, pair.v)
        assert np.linalg.norm(R) < np.linalg.norm(M)
