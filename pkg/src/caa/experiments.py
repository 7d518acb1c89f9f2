"""Replication protocols shared by the ``repro`` CLI command.

Each function runs one experiment end to end with fixed seeds and returns a
list of :class:`Check` rows (measured value against an acceptance band).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .anomaly_detect import (
    attribute_batch,
    cross_validate_10fold,
    fit_caa_detector,
    fit_pca_detector,
    roc_auc,
)
from .caa_model import CaaConfig, fit_caa
from .data_synth import LabeledDataset, PlantedSpec, gen_planted, gen_spectra, holdout_indices, load_wisconsin
from .matrix_core import apply_standardization, standardize


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    low: float
    high: float
    strict_low: bool = False

    @property
    def passed(self) -> bool:
        above = self.value > self.low if self.strict_low else self.value >= self.low
        return above and self.value <= self.high

    def row(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        bracket = "(" if self.strict_low else "["
        return f"{self.name:<28} {self.value:>10.4f}  {bracket}{self.low:g}, {self.high:g}]  {status}"


def wisconsin_auc_split(ds: LabeledDataset, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Training rows (70% of benign) and test rows (other benign plus all malignant)."""
    benign = np.flatnonzero(ds.labels == 0)
    malignant = np.flatnonzero(ds.labels == 1)
    tr, te = holdout_indices(benign.size, 0.7, seed)
    return benign[tr], np.concatenate([benign[te], malignant])


def breast_cancer(ds: LabeledDataset | None = None, seed: int = 0, cfg: CaaConfig = CaaConfig(),
                  k_pca: int | None = None, cv: bool = True) -> dict:
    ds = load_wisconsin() if ds is None else ds
    train, test = wisconsin_auc_split(ds, seed)
    t0 = time.perf_counter()
    caa = fit_caa_detector(ds.X[train], cfg)
    pca = fit_pca_detector(ds.X[train], k_pca)
    y = ds.labels[test]
    caa_auc = roc_auc(caa.score_batch(ds.X[test]), y, seed=seed)
    pca_auc = roc_auc(pca.score_batch(ds.X[test]), y, seed=seed)
    out = {
        "caa_auc": caa_auc,
        "pca_auc": pca_auc,
        "caa_pairs": len(caa.pairs),
        "k_pca": int(pca.components.shape[1]),
        "checks": [Check("CAA AUC", caa_auc[0], 0.93, 1.0), Check("PCA AUC", pca_auc[0], 0.58, 0.85)],
    }
    if cv:
        caa_cv = cross_validate_10fold(ds.X, ds.labels, seed, "caa", cfg)
        pca_cv = cross_validate_10fold(ds.X, ds.labels, seed, "pca", cfg, k_pca)
        out["caa_cv"] = (caa_cv.mean_accuracy, caa_cv.stdev)
        out["pca_cv"] = (pca_cv.mean_accuracy, pca_cv.stdev)
        out["checks"] += [Check("CAA 10-fold accuracy %", caa_cv.mean_accuracy, 91.2, 98.0),
                          Check("PCA 10-fold accuracy %", pca_cv.mean_accuracy, 61.0, 79.0)]
    out["seconds"] = time.perf_counter() - t0
    return out


def planted_recovery(seeds=range(10), cfg: CaaConfig = CaaConfig()) -> dict:
    """First-pair support recovery and held-out correlation per seed."""
    runs = []
    for seed in seeds:
        spec = PlantedSpec(seed=seed)
        sample = gen_planted(spec)
        train, test = holdout_indices(spec.n, 0.7, seed)
        X_tr, params = standardize(sample.X[train])
        X_te = apply_standardization(sample.X[test], params)
        pair = fit_caa(X_tr, cfg)[0]
        planted = tuple(sorted(spec.support_u + spec.support_v))
        r = float(np.corrcoef(X_te @ pair.u, X_te @ pair.v)[0, 1])
        runs.append({"seed": seed, "support": pair.support, "recovered": pair.support == planted,
                     "heldout_correlation": r})
    good = [r for r in runs if r["recovered"]]
    min_r = min((r["heldout_correlation"] for r in good), default=math.nan)
    checks = [Check("planted runs recovered", len(good), 9, len(runs)),
              Check("min held-out correlation", min_r, 0.9, 1.0)]
    return {"runs": runs, "checks": checks}


def spectra(seed: int = 0, bins: int = 32, n_background: int = 2000, n_anomalous: int = 500,
            cfg: CaaConfig = CaaConfig()) -> dict:
    """Train on half the background rows, test on the rest plus the anomalies."""
    ds = gen_spectra(n_background, n_anomalous, bins, seed)
    half = n_background // 2
    train = np.arange(half)
    test = np.arange(half, ds.X.shape[0])
    caa = fit_caa_detector(ds.X[train], cfg)
    pca = fit_pca_detector(ds.X[train])
    s_caa = caa.score_batch(ds.X[test])
    s_pca = pca.score_batch(ds.X[test])
    y = ds.labels[test]
    auc_caa = roc_auc(s_caa, y, seed=seed)[0]
    auc_pca = roc_auc(s_pca, y, seed=seed)[0]
    counts = attribute_batch(ds.X, caa, np.flatnonzero(ds.labels == 1))
    lo = max(ds.meta["bump_start"] - 1, 0)
    hi = min(ds.meta["bump_start"] + ds.meta["bump_width"] + 1, bins)
    share = float(counts[lo:hi].sum() / counts.sum()) if counts.sum() else 0.0
    finite = bool(np.all(np.isfinite(s_caa)) and np.all(np.isfinite(s_pca)))
    return {
        "auc_caa": auc_caa,
        "auc_pca": auc_pca,
        "bump_share": share,
        "all_finite": finite,
        "meta": ds.meta,
        "checks": [Check("CAA AUC - PCA AUC", auc_caa - auc_pca, 0.0, 1.0, strict_low=True),
                   Check("bump attribution share", share, 0.6, 1.0),
                   Check("all scores finite", float(finite), 1.0, 1.0)],
    }
