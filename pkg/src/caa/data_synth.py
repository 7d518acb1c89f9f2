"""Datasets: planted-correlation generator, synthetic spectra, Wisconsin loader, CSV I/O."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import InvalidSpec, ParseError, SchemaError
from .matrix_core import as_matrix

WISCONSIN_FEATURES = (
    "clump_thickness",
    "uniformity_cell_size",
    "uniformity_cell_shape",
    "marginal_adhesion",
    "single_epithelial_cell_size",
    "bare_nuclei",
    "bland_chromatin",
    "normal_nucleoli",
    "mitoses",
)


@dataclass(frozen=True)
class PlantedSpec:
    n: int = 200
    m: int = 20
    mean: tuple[float, float] = (0.0, 0.0)
    cov: tuple[tuple[float, float], tuple[float, float]] = ((1.0, 0.95), (0.95, 1.0))
    support_u: tuple[int, int] = (2, 5)
    support_v: tuple[int, int] = (11, 17)
    coeffs_u: tuple[float, float] = (0.8, 0.6)
    coeffs_v: tuple[float, float] = (0.7, -0.7)
    seed: int = 0

    def validate(self) -> None:
        if self.n < 3 or self.m < 4:
            raise InvalidSpec("planted data needs n >= 3 and m >= 4")
        cols = list(self.support_u) + list(self.support_v)
        if len(self.support_u) != 2 or len(self.support_v) != 2:
            raise InvalidSpec("each planted support has exactly two columns")
        if len(set(cols)) != 4:
            raise InvalidSpec("planted supports must be disjoint")
        if min(cols) < 0 or max(cols) >= self.m:
            raise InvalidSpec("planted column index out of range")
        if len(self.coeffs_u) != 2 or len(self.coeffs_v) != 2:
            raise InvalidSpec("each planted vector has exactly two coefficients")
        if self.coeffs_u[1] == 0 or self.coeffs_v[1] == 0:
            raise InvalidSpec("the second coefficient of each planted vector must be nonzero")
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (2, 2) or not np.allclose(cov, cov.T) or np.linalg.eigvalsh(cov)[0] <= 0:
            raise InvalidSpec("cov must be a symmetric positive-definite 2x2 matrix")
        if len(self.mean) != 2:
            raise InvalidSpec("mean must have two entries")


class PlantedSample(NamedTuple):
    X: np.ndarray
    truth_u: np.ndarray
    truth_v: np.ndarray
    points: np.ndarray


def gen_planted(spec: PlantedSpec = PlantedSpec()) -> PlantedSample:
    """Noise matrix with one planted correlated pair of 2-column combinations.

    ``X @ truth_u`` and ``X @ truth_v`` reproduce the sampled bivariate
    Gaussian ``points``; every other column is independent standard normal.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    points = rng.multivariate_normal(np.asarray(spec.mean, dtype=float),
                                     np.asarray(spec.cov, dtype=float), spec.n)
    X = rng.standard_normal((spec.n, spec.m))
    truth_u = np.zeros(spec.m)
    truth_v = np.zeros(spec.m)
    for target, support, coeffs, truth in ((points[:, 0], spec.support_u, spec.coeffs_u, truth_u),
                                           (points[:, 1], spec.support_v, spec.coeffs_v, truth_v)):
        free, solved = support
        X[:, free] = rng.standard_normal(spec.n)
        X[:, solved] = (target - coeffs[0] * X[:, free]) / coeffs[1]
        truth[free], truth[solved] = coeffs
    return PlantedSample(X, truth_u, truth_v, points)


def holdout_indices(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded permutation split; the first ``ceil(fraction * n)`` rows train."""
    if not 0 < fraction < 1:
        raise InvalidSpec("fraction must lie in (0, 1)")
    perm = np.random.default_rng(seed).permutation(n)
    cut = math.ceil(fraction * n)
    return perm[:cut], perm[cut:]


def split_holdout(X, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    A = np.asarray(X)
    train, test = holdout_indices(A.shape[0], fraction, seed)
    return A[train], A[test]


@dataclass
class LabeledDataset:
    X: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = as_matrix(self.X)
        self.labels = np.asarray(self.labels, dtype=int).ravel()
        self.feature_names = tuple(self.feature_names)
        if self.labels.size != self.X.shape[0]:
            raise SchemaError(f"{self.labels.size} labels for {self.X.shape[0]} rows")
        if len(self.feature_names) != self.X.shape[1]:
            raise SchemaError(f"{len(self.feature_names)} names for {self.X.shape[1]} columns")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise SchemaError("labels must be 0 or 1")

    @property
    def normal(self) -> np.ndarray:
        return self.X[self.labels == 0]


def bundled_wisconsin_path() -> Path:
    return Path(str(resources.files("caa") / "data" / "breast-cancer-wisconsin.data"))


def load_wisconsin(path=None) -> LabeledDataset:
    """Read the UCI comma-separated file, dropping rows with a missing value ("?").

    ``path=None`` reads the copy bundled with the package.
    """
    path = bundled_wisconsin_path() if path is None else Path(path)
    rows, labels = [], []
    with open(path, newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 11:
                raise SchemaError(f"line {lineno}: expected 11 fields, found {len(parts)}")
            if "?" in parts[1:10]:
                continue
            try:
                values = [int(p) for p in parts[1:10]]
                code = int(parts[10])
            except ValueError as exc:
                raise ParseError(f"non-integer field ({exc})", lineno) from exc
            if code not in (2, 4):
                raise ParseError(f"class code {code} is not 2 or 4", lineno)
            rows.append(values)
            labels.append(1 if code == 4 else 0)
    if not rows:
        raise SchemaError(f"{path}: no complete rows")
    return LabeledDataset(np.array(rows, dtype=float), np.array(labels), WISCONSIN_FEATURES,
                          {"source": "uci-breast-cancer-wisconsin"})


def gen_spectra(n_background: int, n_anomalous: int, bins: int = 128, seed: int = 0,
                level: float = 100.0) -> LabeledDataset:
    """Synthetic gamma-ray-like spectra (a stand-in, not real measurements).

    Background rate per bin is log-normal with three latent factors: overall
    intensity, a spectral tilt, and the height of one photopeak.  Counts are
    Poisson draws from that rate.  Anomalous rows add a bump spanning 3 to 5
    contiguous bins, twice the background standard deviation in those bins.
    Rows are ordered background first; labels mark the anomalous rows.
    """
    if bins < 8:
        raise InvalidSpec("bins must be at least 8")
    if n_background < 2 or n_anomalous < 0:
        raise InvalidSpec("need n_background >= 2 and n_anomalous >= 0")
    rng = np.random.default_rng(seed)
    energy = (np.arange(bins) + 0.5) / bins
    peak_at = rng.uniform(0.2, 0.8)
    peak = np.exp(-0.5 * ((energy - peak_at) / 0.03) ** 2)
    log_base = np.log(level * (np.exp(-3.0 * energy) + 0.1) + 0.5 * level * peak)
    loadings = np.stack([0.4 * np.ones(bins), energy - 0.5, 0.5 * peak], axis=1)
    n = n_background + n_anomalous
    latent = rng.standard_normal((n, 3))
    counts = rng.poisson(np.exp(log_base + latent @ loadings.T)).astype(float)
    sd = counts[:n_background].std(axis=0, ddof=1)
    width = int(rng.integers(3, 6))
    loc = int(rng.integers(1, bins - width - 1))
    counts[n_background:, loc:loc + width] += 2.0 * sd[loc:loc + width]
    counts = np.round(counts)
    labels = np.r_[np.zeros(n_background, dtype=int), np.ones(n_anomalous, dtype=int)]
    names = tuple(f"bin_{i:03d}" for i in range(bins))
    meta = {"source": "synthetic-analog spectra", "bump_start": loc, "bump_width": width,
            "peak_position": float(peak_at), "seed": seed}
    return LabeledDataset(counts, labels, names, meta)


def write_dataset(path, ds: LabeledDataset) -> None:
    """Headered CSV: one column per feature, then ``label``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(ds.feature_names) + ["label"])
        for row, lab in zip(ds.X, ds.labels):
            w.writerow([repr(float(x)) for x in row] + [int(lab)])


def read_dataset(path) -> LabeledDataset:
    """Inverse of :func:`write_dataset`.  A missing ``label`` column means all zeros."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        has_label = bool(header) and header[-1] == "label"
        names = header[:-1] if has_label else header
        if not names:
            raise SchemaError(f"{path}: no feature columns")
        rows, labels = [], []
        for row in reader:
            lineno = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path} line {lineno}: expected {len(header)} fields, found {len(row)}")
            try:
                rows.append([float(x) for x in row[:len(names)]])
                labels.append(int(row[-1]) if has_label else 0)
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", lineno) from exc
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return LabeledDataset(np.array(rows), np.array(labels), tuple(names))
