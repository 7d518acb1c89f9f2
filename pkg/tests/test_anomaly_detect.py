from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from caa.anomaly_detect import (
    CaaDetector,
    GaussianChar,
    PcaDetector,
    attribute_batch,
    auc_mann_whitney,
    cross_validate_10fold,
    dumps_detector,
    explained_variance_k,
    fit_caa_detector,
    fit_gaussians,
    fit_pca_detector,
    loads_detector,
    mahalanobis,
    roc_auc,
    score,
    score_pca,
    stratified_folds,
    threshold_by_accuracy,
)
from caa.caa_model import CanonicalPair
from caa.data_synth import PlantedSpec, gen_planted
from caa.errors import DegenerateProjection, DimensionMismatch, InvalidSpec, ParseError, SchemaError, SingleClass
from caa.matrix_core import StandardizationParams


def coord_pair(m, su, sv):
    u, v = np.zeros(m), np.zeros(m)
    u[list(su)] = 1 / np.sqrt(len(su))
    v[list(sv)] = 1 / np.sqrt(len(sv))
    return CanonicalPair(u, v, 0.0, 1.0, 0.5)


def identity_detector(m, pairs, gaussians, aggregation="max"):
    return CaaDetector(StandardizationParams(np.zeros(m), np.ones(m)), pairs, gaussians, aggregation)


@pytest.fixture(scope="module")
def planted_detector():
    X = gen_planted(PlantedSpec(seed=1)).X
    return X, fit_caa_detector(X)


def test_gaussian_midpoint():
    X = np.array([[0.0, 0.0], [2.0, 4.0], [1.0, 1.0]])
    g = fit_gaussians(X, [coord_pair(2, [0], [1])])[0]
    np.testing.assert_allclose(g.mu, [1.0, 5.0 / 3.0])


def test_gaussian_large_sample():
    X = np.random.default_rng(0).standard_normal((10_000, 3))
    g = fit_gaussians(X, [coord_pair(3, [0], [1])])[0]
    assert np.max(np.abs(g.mu)) < 0.05
    assert np.max(np.abs(g.sigma - np.eye(2))) < 0.05
    assert np.max(np.abs(g.sigma @ g.sigma_inv - np.eye(2))) < 1e-8


def test_gaussian_ridge_on_collinear():
    t = np.linspace(-1, 1, 20)
    X = np.column_stack([t, 2 * t])
    g = fit_gaussians(X, [coord_pair(2, [0], [1])])[0]
    assert np.linalg.eigvalsh(g.sigma)[0] > 0
    assert np.max(np.abs(g.sigma - g.sigma.T)) < 1e-12


def test_gaussian_constant_projection():
    X = np.column_stack([np.ones(5), np.arange(5.0)])
    with pytest.raises(DegenerateProjection):
        fit_gaussians(X, [coord_pair(2, [0], [1])])


def test_mahalanobis_examples():
    g = GaussianChar.from_moments([1.0, 1.0], np.eye(2))
    assert mahalanobis([1.0, 1.0], g) == 0.0
    assert mahalanobis([4.0, 5.0], g) == 5.0
    g2 = GaussianChar.from_moments([0.0, 0.0], np.diag([4.0, 1.0]))
    assert mahalanobis([2.0, 0.0], g2) == 1.0


def test_score_max_and_argmax():
    pairs = [coord_pair(4, [0], [1]), coord_pair(4, [2], [3])]
    gs = [GaussianChar.from_moments([0, 0], np.eye(2))] * 2
    d = identity_detector(4, pairs, gs)
    rep = score([1.2, 0.0, 0.0, 3.4], d)
    assert rep.score == pytest.approx(3.4)
    assert rep.argmax_index == 1
    assert rep.contributing_features == (2, 3)
    tie = score([1.0, 0.0, 1.0, 0.0], d)
    assert tie.argmax_index == 0
    single = identity_detector(4, pairs[:1], gs[:1])
    assert score([3.0, 4.0, 9.0, 9.0], single).score == pytest.approx(5.0)


def test_score_sum_aggregation():
    pairs = [coord_pair(4, [0], [1]), coord_pair(4, [2], [3])]
    gs = [GaussianChar.from_moments([0, 0], np.eye(2))] * 2
    d = identity_detector(4, pairs, gs, "sum")
    assert score([3.0, 4.0, 0.0, 1.0], d).score == pytest.approx(6.0)


def test_score_at_projection_means_is_zero(planted_detector):
    X, d = planted_detector
    # Zero standardized input projects to the origin; the Gaussians are
    # centred there because training rows were standardized.
    rep = score(d.standardization.means, d)
    assert rep.score < 1e-10


def test_score_dimension_check(planted_detector):
    _, d = planted_detector
    with pytest.raises(DimensionMismatch):
        score(np.zeros(3), d)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_max_dominance_and_permutation(seed):
    rng = np.random.default_rng(seed)
    m = 6
    pairs = [coord_pair(m, [i], [(i + 1) % m]) for i in range(4)]
    gs = [GaussianChar.from_moments(rng.standard_normal(2), np.diag(rng.uniform(0.5, 2, 2))) for _ in pairs]
    x = rng.standard_normal(m) * 3
    rep = score(x, identity_detector(m, pairs, gs))
    assert np.all(rep.score >= rep.per_pair_distances)
    assert rep.score == rep.per_pair_distances[rep.argmax_index]
    perm = rng.permutation(4)
    rep2 = score(x, identity_detector(m, [pairs[i] for i in perm], [gs[i] for i in perm]))
    assert rep2.score == rep.score


def test_attribute_examples():
    m = 10
    pairs = [coord_pair(m, [3], [7, 9]), coord_pair(m, [0], [1])]
    gs = [GaussianChar.from_moments([0, 0], np.eye(2))] * 2
    d = identity_detector(m, pairs, gs)
    X = np.zeros((3, m))
    X[0, 3] = 5.0
    X[1, 7] = 4.0
    one = attribute_batch(X, d, [0])
    assert one.tolist() == [0, 0, 0, 1, 0, 0, 0, 1, 0, 1]
    assert not attribute_batch(X, d, []).any()
    assert attribute_batch(X, d, [0, 1]).tolist() == (2 * one).tolist()


def test_self_scores_right_skewed(planted_detector):
    X, d = planted_detector
    s = d.score_batch(X)
    assert np.isfinite(np.percentile(s, 97.5))
    assert np.median(s) < np.mean(s)


def test_pca_line_and_residual():
    t = np.linspace(-3, 3, 30)
    X = np.column_stack([t, -2 * t + 1, 0.5 * t])
    d = fit_pca_detector(X, 1)
    assert np.max(d.score_batch(X)) < 1e-8
    assert np.max(np.abs(d.components.T @ d.components - np.eye(1))) < 1e-8


def test_pca_last_direction(rng):
    X = rng.standard_normal((50, 4))
    d = fit_pca_detector(X, 3)
    Z = (X - X.mean(0)) / X.std(0, ddof=1)
    last = np.linalg.svd(Z)[2][-1]
    np.testing.assert_allclose(d.score_batch(X), np.abs(Z @ last), atol=1e-10)


def test_score_pca_coordinate_residual():
    d = PcaDetector(StandardizationParams(np.zeros(2), np.ones(2)), np.array([[1.0], [0.0]]))
    assert score_pca([5.0, 3.0], d) == 3.0
    assert score_pca([5.0, 0.0], d) == 0.0


def test_pca_k_bounds(rng):
    X = rng.standard_normal((20, 3))
    with pytest.raises(InvalidSpec):
        fit_pca_detector(X, 3)
    with pytest.raises(InvalidSpec):
        fit_pca_detector(X, 0)


def test_pca_residual_nonincreasing_in_k(rng):
    X = rng.standard_normal((60, 6)) @ rng.standard_normal((6, 6))
    res = np.array([fit_pca_detector(X, k).score_batch(X) for k in range(1, 6)])
    assert np.all(np.diff(res, axis=0) <= 1e-12)


def test_explained_variance_rule():
    assert explained_variance_k(np.sqrt(np.array([90.0, 5.0, 4.0, 1.0]))) == 2
    assert explained_variance_k(np.sqrt(np.array([96.0, 3.0, 1.0]))) == 1


def test_auc_examples():
    assert roc_auc([1, 2, 3, 4], [0, 0, 1, 1])[0] == 1.0
    assert roc_auc([7, 7, 7, 7], [0, 1, 0, 1])[0] == 0.5
    with pytest.raises(SingleClass):
        roc_auc([1, 2], [0, 0])


def test_auc_matches_pairwise_oracle(rng):
    s = rng.integers(0, 5, 40).astype(float)
    y = rng.integers(0, 2, 40)
    pos, neg = s[y == 1], s[y == 0]
    diff = pos[:, None] - neg[None, :]
    oracle = ((diff > 0).sum() + 0.5 * (diff == 0).sum()) / diff.size
    assert auc_mann_whitney(s, y) == pytest.approx(oracle, abs=1e-15)


def test_auc_ci_deterministic_and_brackets(rng):
    s = rng.standard_normal(80)
    y = (s + rng.standard_normal(80) > 0).astype(int)
    a = roc_auc(s, y, seed=4)
    assert a == roc_auc(s, y, seed=4)
    assert a[1] <= a[0] <= a[2]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_auc_monotone_invariance(seed):
    rng = np.random.default_rng(seed)
    s = rng.standard_normal(30)
    y = np.r_[np.zeros(15, int), np.ones(15, int)]
    assert auc_mann_whitney(np.exp(3 * s) + 1, y) == auc_mann_whitney(s, y)


def test_threshold_examples():
    thr, acc = threshold_by_accuracy([1, 2, 3, 4], [0, 0, 1, 1])
    assert 2 < thr < 3 and acc == 1.0
    thr, acc = threshold_by_accuracy([1, 2, 3], [0, 0, 0])
    assert thr == np.inf and acc == 1.0


def test_threshold_brute_force(rng):
    s = rng.integers(0, 6, 50).astype(float)
    y = rng.integers(0, 2, 50)
    thr, acc = threshold_by_accuracy(s, y)
    u = np.unique(s)
    cands = np.r_[-np.inf, (u[:-1] + u[1:]) / 2, np.inf]
    accs = [np.mean((s > c) == (y == 1)) for c in cands]
    assert acc == max(accs)
    assert thr == cands[int(np.argmax(accs))]


def test_stratified_folds_balanced():
    y = np.r_[np.zeros(444, int), np.ones(239, int)]
    folds = stratified_folds(y, 10, 0)
    for cls in (0, 1):
        sizes = np.bincount(folds[y == cls], minlength=10)
        assert sizes.max() - sizes.min() <= 1
    np.testing.assert_array_equal(folds, stratified_folds(y, 10, 0))


def test_cross_validation_deterministic():
    sample = gen_planted(PlantedSpec(n=150, m=8, support_u=(0, 1), support_v=(2, 3), seed=0))
    X = sample.X.copy()
    y = np.r_[np.zeros(100, int), np.ones(50, int)]
    # Anomalies break the planted relation by flipping one of its columns.
    X[100:, 3] = -X[100:, 3]
    a = cross_validate_10fold(X, y, seed=3)
    b = cross_validate_10fold(X, y, seed=3)
    assert a.mean_accuracy == b.mean_accuracy and a.stdev == b.stdev
    np.testing.assert_array_equal(a.folds, b.folds)
    assert a.mean_accuracy > 70.0


def test_serialization_round_trip(planted_detector):
    X, d = planted_detector
    text = dumps_detector(d)
    back = loads_detector(text)
    assert dumps_detector(back) == text
    for p, q in zip(d.pairs, back.pairs):
        np.testing.assert_array_equal(p.u, q.u)
        assert p.lam == q.lam
    for g, h in zip(d.gaussians, back.gaussians):
        np.testing.assert_array_equal(g.sigma_inv, h.sigma_inv)
    np.testing.assert_array_equal(d.score_batch(X), back.score_batch(X))


def test_pca_serialization_round_trip(rng):
    d = fit_pca_detector(rng.standard_normal((30, 4)), 2, ["a", "b", "c", "d"])
    back = loads_detector(dumps_detector(d))
    np.testing.assert_array_equal(back.components, d.components)
    assert back.feature_names == ("a", "b", "c", "d")


def test_serialization_errors(planted_detector):
    _, d = planted_detector
    with pytest.raises(ParseError):
        loads_detector("{not json")
    with pytest.raises(SchemaError):
        loads_detector('{"format_version": 2}')
    with pytest.raises(SchemaError):
        loads_detector('{"format_version": 1, "kind": "caa"}')
