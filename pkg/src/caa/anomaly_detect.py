"""Single-class anomaly detection on canonical projections.

Each canonical pair maps a row to a point in the plane; a bivariate Gaussian
fitted on normal training rows turns that point into a Mahalanobis distance.
The anomaly score is the largest distance over pairs, and the pair that
attains it names the features behind the anomaly.  A PCA residual detector
and the evaluation helpers (ROC AUC, accuracy thresholding, stratified
10-fold cross-validation) live here too.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import rankdata

from .caa_model import CaaConfig, CanonicalPair, fit_caa, relative_sparseness
from .errors import (
    DegenerateProjection,
    DimensionMismatch,
    InsufficientData,
    InvalidSpec,
    NoPairsFound,
    ParseError,
    SchemaError,
    SingleClass,
)
from .matrix_core import StandardizationParams, apply_standardization, as_matrix, standardize, svd

FORMAT_VERSION = 1
AGGREGATIONS = ("max", "sum")


@dataclass(frozen=True)
class GaussianChar:
    mu: np.ndarray
    sigma: np.ndarray
    sigma_inv: np.ndarray

    @classmethod
    def from_moments(cls, mu, sigma) -> "GaussianChar":
        sigma = np.asarray(sigma, dtype=float)
        return cls(mu=np.asarray(mu, dtype=float), sigma=sigma, sigma_inv=np.linalg.inv(sigma))


@dataclass(frozen=True)
class ScoreReport:
    score: float
    argmax_index: int
    contributing_features: tuple[int, ...]
    per_pair_distances: np.ndarray


def fit_gaussians(X_std, pairs: list[CanonicalPair]) -> list[GaussianChar]:
    """Sample mean and covariance of each pair's projection of the training rows."""
    X = as_matrix(X_std)
    if X.shape[0] < 3:
        raise InsufficientData("fit_gaussians needs at least 3 rows")
    out = []
    for i, pair in enumerate(pairs):
        if pair.u.size != X.shape[1]:
            raise DimensionMismatch(f"pair {i} has dimension {pair.u.size}, data has {X.shape[1]}")
        P = np.column_stack([X @ pair.u, X @ pair.v])
        spread = np.ptp(P, axis=0)
        if np.any(spread <= 1e-12 * np.maximum(1.0, np.abs(P).max(axis=0))):
            raise DegenerateProjection(f"pair {i} has a constant projection coordinate")
        sigma = np.cov(P, rowvar=False, ddof=1)
        sigma = 0.5 * (sigma + sigma.T)
        tr = float(np.trace(sigma))
        if np.linalg.eigvalsh(sigma)[0] < 1e-8 * tr:
            sigma = sigma + 1e-8 * tr * np.eye(2)
        out.append(GaussianChar.from_moments(P.mean(axis=0), sigma))
    return out


def mahalanobis(p, g: GaussianChar) -> float:
    r = np.asarray(p, dtype=float) - g.mu
    return math.sqrt(max(float(r @ g.sigma_inv @ r), 0.0))


def _distances(Z: np.ndarray, pairs, gaussians) -> np.ndarray:
    """``n x k`` Mahalanobis distances of standardized rows ``Z``."""
    D = np.empty((Z.shape[0], len(pairs)))
    for i, (pair, g) in enumerate(zip(pairs, gaussians)):
        R = np.column_stack([Z @ pair.u, Z @ pair.v]) - g.mu
        q = np.einsum("ij,jk,ik->i", R, g.sigma_inv, R)
        D[:, i] = np.sqrt(np.maximum(q, 0.0))
    return D


@dataclass(frozen=True)
class CaaDetector:
    standardization: StandardizationParams
    pairs: list[CanonicalPair]
    gaussians: list[GaussianChar]
    aggregation: str = "max"
    feature_names: tuple[str, ...] | None = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.pairs) != len(self.gaussians) or not self.pairs:
            raise NoPairsFound("a detector needs at least one pair with a matching Gaussian")
        m = self.standardization.m
        if any(p.u.size != m or p.v.size != m for p in self.pairs):
            raise DimensionMismatch("all pairs must match the standardization dimension")
        if self.aggregation not in AGGREGATIONS:
            raise InvalidSpec(f"aggregation must be one of {AGGREGATIONS}")

    @property
    def m(self) -> int:
        return self.standardization.m

    def distances(self, X) -> np.ndarray:
        X = as_matrix(np.atleast_2d(X))
        if X.shape[1] != self.m:
            raise DimensionMismatch(f"rows have {X.shape[1]} features, model expects {self.m}")
        return _distances(apply_standardization(X, self.standardization), self.pairs, self.gaussians)

    def score_batch(self, X) -> np.ndarray:
        D = self.distances(X)
        return D.max(axis=1) if self.aggregation == "max" else D.sum(axis=1)

    def argmax_batch(self, X) -> np.ndarray:
        # np.argmax picks the first maximum, i.e. the lowest pair index on ties.
        return np.argmax(self.distances(X), axis=1)


def fit_caa_detector(X, cfg: CaaConfig = CaaConfig(), aggregation: str = "max",
                     feature_names=None) -> CaaDetector:
    """Standardize normal training rows, find canonical pairs and fit their Gaussians."""
    X_std, params = standardize(X)
    pairs = fit_caa(X_std, cfg)
    if not pairs:
        raise NoPairsFound("no pair passed the correlation floor")
    gaussians = fit_gaussians(X_std, pairs)
    names = None if feature_names is None else tuple(feature_names)
    return CaaDetector(params, pairs, gaussians, aggregation, names, _config_dict(cfg))


def _config_dict(cfg: CaaConfig) -> dict:
    return {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}


def score(x, d: CaaDetector) -> ScoreReport:
    x = np.asarray(x, dtype=float).ravel()
    if x.size != d.m:
        raise DimensionMismatch(f"x has {x.size} features, model expects {d.m}")
    dist = d.distances(x[None, :])[0]
    i = int(np.argmax(dist))
    total = float(dist[i]) if d.aggregation == "max" else float(dist.sum())
    return ScoreReport(score=total, argmax_index=i, contributing_features=d.pairs[i].support,
                       per_pair_distances=dist)


def attribute_batch(X, d: CaaDetector, flagged) -> np.ndarray:
    """Per-feature count of how often each feature belongs to the argmax pair of a flagged row."""
    X = as_matrix(np.atleast_2d(X))
    counts = np.zeros(d.m, dtype=np.int64)
    rows = np.asarray(sorted(set(int(i) for i in flagged)), dtype=int)
    if rows.size == 0:
        return counts
    if rows.min() < 0 or rows.max() >= X.shape[0]:
        raise DimensionMismatch("flagged row index out of range")
    for i in d.argmax_batch(X[rows]):
        counts[list(d.pairs[i].support)] += 1
    return counts


# ---------------------------------------------------------------- PCA baseline


@dataclass(frozen=True)
class PcaDetector:
    standardization: StandardizationParams
    components: np.ndarray
    feature_names: tuple[str, ...] | None = None

    @property
    def m(self) -> int:
        return self.standardization.m

    def score_batch(self, X) -> np.ndarray:
        X = as_matrix(np.atleast_2d(X))
        if X.shape[1] != self.m:
            raise DimensionMismatch(f"rows have {X.shape[1]} features, model expects {self.m}")
        Z = apply_standardization(X, self.standardization)
        C = self.components
        return np.linalg.norm(Z - (Z @ C) @ C.T, axis=1)


def explained_variance_k(S: np.ndarray, fraction: float = 0.95) -> int:
    """Smallest ``k`` whose leading squared singular values reach ``fraction`` of the total."""
    var = S**2
    cum = np.cumsum(var) / var.sum()
    return int(np.searchsorted(cum, fraction - 1e-12) + 1)


def fit_pca_detector(X, k_pca: int | None = None, feature_names=None) -> PcaDetector:
    """Principal subspace of the standardized training rows.

    ``k_pca=None`` picks the smallest ``k`` explaining 95% of the variance,
    capped at ``m - 1``.
    """
    X_std, params = standardize(X)
    m = X_std.shape[1]
    dec = svd(X_std)
    if k_pca is None:
        k_pca = min(explained_variance_k(dec.S), m - 1)
    if not 1 <= k_pca < m:
        raise InvalidSpec(f"k_pca={k_pca} must satisfy 1 <= k_pca < {m}")
    if k_pca > dec.V.shape[1]:
        raise InsufficientData(f"only {dec.V.shape[1]} components available")
    names = None if feature_names is None else tuple(feature_names)
    return PcaDetector(params, np.ascontiguousarray(dec.V[:, :k_pca]), names)


def score_pca(x, d: PcaDetector) -> float:
    x = np.asarray(x, dtype=float).ravel()
    if x.size != d.m:
        raise DimensionMismatch(f"x has {x.size} features, model expects {d.m}")
    return float(d.score_batch(x[None, :])[0])


# ---------------------------------------------------------------- evaluation


def _binary_labels(labels) -> np.ndarray:
    y = np.asarray(labels).ravel()
    if not np.all((y == 0) | (y == 1)):
        raise InvalidSpec("labels must be 0 or 1")
    return y.astype(int)


def auc_mann_whitney(scores, labels) -> float:
    s = np.asarray(scores, dtype=float).ravel()
    y = _binary_labels(labels)
    n1 = int(y.sum())
    n0 = y.size - n1
    if n0 == 0 or n1 == 0:
        raise SingleClass("AUC needs both classes")
    # Average ranks give tied pairs half credit.
    ranks = rankdata(s)
    return float((ranks[y == 1].sum() - n1 * (n1 + 1) / 2) / (n0 * n1))


def roc_auc(scores, labels, n_boot: int = 1000, seed: int = 0) -> tuple[float, float, float]:
    """AUC with a percentile bootstrap interval (2.5% and 97.5%).

    Resamples that happen to contain a single class are redrawn.
    """
    s = np.asarray(scores, dtype=float).ravel()
    y = _binary_labels(labels)
    if s.size != y.size:
        raise DimensionMismatch("scores and labels differ in length")
    auc = auc_mann_whitney(s, y)
    rng = np.random.default_rng(seed)
    boots = np.empty(n_boot)
    b = 0
    while b < n_boot:
        idx = rng.integers(0, s.size, s.size)
        yb = y[idx]
        if yb.min() == yb.max():
            continue
        boots[b] = auc_mann_whitney(s[idx], yb)
        b += 1
    lo, hi = np.percentile(boots, [2.5, 97.5])
    return auc, float(lo), float(hi)


def threshold_by_accuracy(scores, labels) -> tuple[float, float]:
    """Threshold maximising accuracy of the rule ``score > threshold`` means anomalous."""
    s = np.asarray(scores, dtype=float).ravel()
    y = _binary_labels(labels)
    if s.size == 0 or s.size != y.size:
        raise DimensionMismatch("need matching nonempty scores and labels")
    u = np.unique(s)
    cands = np.concatenate([[-np.inf], 0.5 * (u[:-1] + u[1:]), [np.inf]])
    # Sorted scores let each candidate's confusion counts come from searchsorted.
    order = np.argsort(s, kind="stable")
    ss, ys = s[order], y[order]
    pos_cum = np.concatenate([[0], np.cumsum(ys)])
    below = np.searchsorted(ss, cands, side="right")
    tn = below - pos_cum[below]
    tp = pos_cum[-1] - pos_cum[below]
    acc = (tn + tp) / s.size
    best = int(np.argmax(acc))
    return float(cands[best]), float(acc[best])


def stratified_folds(labels, n_folds: int = 10, seed: int = 0) -> np.ndarray:
    """Fold id per row; each class is shuffled and dealt round-robin."""
    y = _binary_labels(labels)
    rng = np.random.default_rng(seed)
    folds = np.empty(y.size, dtype=int)
    offset = 0
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        folds[idx] = (np.arange(idx.size) + offset) % n_folds
        # Continue dealing where the previous class stopped, which keeps the
        # total fold sizes balanced as well.
        offset = (offset + idx.size) % n_folds
    return folds


@dataclass(frozen=True)
class CrossValidation:
    mean_accuracy: float
    stdev: float
    fold_accuracies: np.ndarray
    folds: np.ndarray


def detector_factory(kind: str, cfg: CaaConfig = CaaConfig(), k_pca: int | None = None,
                     aggregation: str = "max") -> Callable[[np.ndarray], Callable[[np.ndarray], np.ndarray]]:
    """Return ``fit(X_normal) -> score_batch`` for the named detector."""
    if kind == "caa":
        return lambda X: fit_caa_detector(X, cfg, aggregation).score_batch
    if kind == "pca":
        return lambda X: fit_pca_detector(X, k_pca).score_batch
    raise InvalidSpec(f"unknown detector {kind!r}")


def cross_validate_10fold(X, labels, seed: int = 0, detector: str = "caa",
                          cfg: CaaConfig = CaaConfig(), k_pca: int | None = None,
                          aggregation: str = "max") -> CrossValidation:
    """Stratified 10-fold accuracy (percent) of a detector trained on normal rows.

    Per fold the detector is fitted on the label-0 rows of the training folds,
    thresholded on all training-fold rows, and scored on the held-out fold.
    """
    X = as_matrix(X)
    y = _binary_labels(labels)
    if X.shape[0] != y.size:
        raise DimensionMismatch("X and labels differ in length")
    if min(int((y == 0).sum()), int((y == 1).sum())) < 10:
        raise InsufficientData("need at least 10 rows per class")
    fit = detector_factory(detector, cfg, k_pca, aggregation)
    folds = stratified_folds(y, 10, seed)
    accs = np.empty(10)
    for f in range(10):
        train, test = folds != f, folds == f
        scorer = fit(X[train & (y == 0)])
        thr, _ = threshold_by_accuracy(scorer(X[train]), y[train])
        pred = scorer(X[test]) > thr
        accs[f] = 100.0 * float(np.mean(pred == (y[test] == 1)))
    return CrossValidation(float(accs.mean()), float(accs.std(ddof=1)), accs, folds)


# ---------------------------------------------------------------- serialization


def _floats(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def detector_to_dict(d: CaaDetector | PcaDetector) -> dict:
    base = {
        "format_version": FORMAT_VERSION,
        "feature_names": None if d.feature_names is None else list(d.feature_names),
        "standardization": {"means": _floats(d.standardization.means),
                            "stdevs": _floats(d.standardization.stdevs)},
    }
    if isinstance(d, PcaDetector):
        base.update(kind="pca", components=_floats(d.components))
        return base
    base.update(
        kind="caa",
        aggregation=d.aggregation,
        config=d.config,
        pairs=[{"u": _floats(p.u), "v": _floats(p.v), "lambda": p.lam, "sparseness": p.sparseness,
                "correlation": p.correlation, "objective": p.objective} for p in d.pairs],
        gaussians=[{"mu": _floats(g.mu), "sigma": _floats(g.sigma), "sigma_inv": _floats(g.sigma_inv)}
                   for g in d.gaussians],
    )
    return base


def detector_from_dict(doc: dict) -> CaaDetector | PcaDetector:
    try:
        version = doc["format_version"]
        if version != FORMAT_VERSION:
            raise SchemaError(f"unsupported format_version {version!r}")
        std = StandardizationParams(np.array(doc["standardization"]["means"], dtype=float),
                                    np.array(doc["standardization"]["stdevs"], dtype=float))
        names = doc.get("feature_names")
        names = None if names is None else tuple(names)
        kind = doc["kind"]
        if kind == "pca":
            return PcaDetector(std, np.array(doc["components"], dtype=float), names)
        if kind != "caa":
            raise SchemaError(f"unknown model kind {kind!r}")
        pairs = []
        for p in doc["pairs"]:
            u, v = np.array(p["u"], dtype=float), np.array(p["v"], dtype=float)
            pairs.append(CanonicalPair(u=u, v=v, lam=float(p["lambda"]),
                                       sparseness=float(p["sparseness"]),
                                       correlation=float(p["correlation"]),
                                       objective=float(p.get("objective", 0.0))))
            if abs(pairs[-1].sparseness - relative_sparseness(u, v)) > 1e-12:
                raise SchemaError("stored sparseness disagrees with u and v")
        gaussians = [GaussianChar(np.array(g["mu"], dtype=float), np.array(g["sigma"], dtype=float),
                                  np.array(g["sigma_inv"], dtype=float)) for g in doc["gaussians"]]
        return CaaDetector(std, pairs, gaussians, doc.get("aggregation", "max"), names,
                           dict(doc.get("config", {})))
    except SchemaError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed model document: {exc}") from exc


def dumps_detector(d: CaaDetector | PcaDetector) -> str:
    # json writes floats with repr, the shortest string that round-trips.
    return json.dumps(detector_to_dict(d), indent=1, sort_keys=True) + "\n"


def loads_detector(text: str) -> CaaDetector | PcaDetector:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from exc
    if not isinstance(doc, dict):
        raise SchemaError("model document must be a JSON object")
    return detector_from_dict(doc)
