"""Command-line interface: ``caa {synth,train,score,eval,attribute,repro}``.

Settings come from built-in defaults, then an optional flat ``key = value``
config file (``--config``), then command-line flags.  ``--dump-config``
prints the merged settings in the config-file format and exits.  Every
failure prints one JSON line to stderr and exits nonzero.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import experiments
from .anomaly_detect import (
    CaaDetector,
    PcaDetector,
    attribute_batch,
    cross_validate_10fold,
    dumps_detector,
    fit_caa_detector,
    fit_pca_detector,
    loads_detector,
    roc_auc,
    score,
    threshold_by_accuracy,
)
from .caa_model import CaaConfig
from .data_synth import LabeledDataset, PlantedSpec, gen_planted, gen_spectra, load_wisconsin, read_dataset, write_dataset
from .errors import CaaError, ConfigError, ConstantColumn, InvalidSpec, ParseError, SchemaError


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out: str | None = None
    data: str | None = None
    model: str | None = None
    scores: str | None = None
    detector: str = "caa"
    c1: float = 1.3
    c2: float = 1.3
    max_pairs: int | None = None
    lambda_grid_size: int = 100
    sparseness_tol: float = 0.02
    min_correlation: float = 0.3
    aggregation: str = "max"
    k_pca: int | None = None
    n: int = 200
    m: int = 20
    bins: int = 128
    n_background: int = 2000
    n_anomalous: int = 500
    threshold: float | None = None
    row: int | None = None
    cv10: bool = False
    n_boot: int = 1000

    def caa_config(self) -> CaaConfig:
        return CaaConfig(c1=self.c1, c2=self.c2, max_pairs=self.max_pairs,
                         lambda_grid_size=self.lambda_grid_size, sparseness_tol=self.sparseness_tol,
                         min_correlation=self.min_correlation)

    def validate(self) -> None:
        if self.detector not in ("caa", "pca"):
            raise ConfigError(f"detector must be caa or pca, got {self.detector!r}")
        if self.aggregation not in ("max", "sum"):
            raise ConfigError(f"aggregation must be max or sum, got {self.aggregation!r}")
        if self.n_boot < 1:
            raise ConfigError("n_boot must be at least 1")
        self.caa_config()


_TYPES = {"seed": int, "lambda_grid_size": int, "n": int, "m": int, "bins": int, "n_background": int,
          "n_anomalous": int, "n_boot": int, "max_pairs": int, "k_pca": int, "row": int,
          "c1": float, "c2": float, "sparseness_tol": float, "min_correlation": float,
          "threshold": float, "cv10": bool}
_OPTIONAL = {f.name for f in fields(RunConfig) if f.default is None}


def _convert(key: str, text: str):
    text = text.strip()
    if text == "" and key in _OPTIONAL:
        return None
    kind = _TYPES.get(key, str)
    if kind is bool:
        low = text.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    return kind(text)


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank values mean unset."""
    known = {f.name for f in fields(RunConfig)}
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("config line is not 'key = value'", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        try:
            out[key] = _convert(key, value)
        except ValueError as exc:
            raise ConfigError(f"config line {lineno}: bad value for {key}: {exc}") from exc
    return out


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if value is None:
            text = ""
        elif isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{f.name} = {text}".rstrip())
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- helpers


def _out_path(cfg: RunConfig, required: bool = True) -> Path | None:
    if cfg.out is None:
        if required:
            raise ConfigError("--out is required for this command")
        return None
    path = Path(cfg.out)
    if not path.parent.is_dir():
        raise FileNotFoundError(2, "output directory does not exist", str(path.parent))
    return path


def _emit(cfg: RunConfig, text: str) -> None:
    path = _out_path(cfg, required=False)
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _need(cfg: RunConfig, key: str) -> str:
    value = getattr(cfg, key)
    if value is None:
        raise ConfigError(f"--{key.replace('_', '-')} is required for this command")
    return value


def _load_model(path: str) -> CaaDetector | PcaDetector:
    return loads_detector(Path(path).read_text())


def _float_text(x: float) -> str | float:
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _json(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


# ---------------------------------------------------------------- commands


def cmd_synth(cfg: RunConfig, kind: str) -> int:
    path = _out_path(cfg)
    sidecar = path.with_suffix(".truth.json")
    if kind == "planted":
        spec = PlantedSpec(n=cfg.n, m=cfg.m, seed=cfg.seed)
        sample = gen_planted(spec)
        names = tuple(f"x{j}" for j in range(spec.m))
        write_dataset(path, LabeledDataset(sample.X, np.zeros(spec.n, dtype=int), names))
        truth = {"kind": "planted", "seed": cfg.seed, "support_u": list(spec.support_u),
                 "support_v": list(spec.support_v), "truth_u": sample.truth_u.tolist(),
                 "truth_v": sample.truth_v.tolist()}
        summary = f"planted: {spec.n}x{spec.m} -> {path}; planted columns {sorted(spec.support_u + spec.support_v)}"
    else:
        ds = gen_spectra(cfg.n_background, cfg.n_anomalous, cfg.bins, cfg.seed)
        write_dataset(path, ds)
        truth = dict(ds.meta, kind="spectra", labels=ds.labels.tolist())
        summary = (f"spectra (synthetic analog): {ds.X.shape[0]} rows x {cfg.bins} bins -> {path}; "
                   f"bump at bins {ds.meta['bump_start']}..{ds.meta['bump_start'] + ds.meta['bump_width'] - 1}")
    sidecar.write_text(_json(truth))
    print(summary)
    return 0


def cmd_train(cfg: RunConfig) -> int:
    path = _out_path(cfg)
    ds = read_dataset(_need(cfg, "data"))
    X = ds.normal
    try:
        if cfg.detector == "pca":
            model = fit_pca_detector(X, cfg.k_pca, ds.feature_names)
        else:
            model = fit_caa_detector(X, cfg.caa_config(), cfg.aggregation, ds.feature_names)
    except ConstantColumn as exc:
        raise ConstantColumn(exc.column, ds.feature_names[exc.column]) from None
    path.write_text(dumps_detector(model))
    if isinstance(model, PcaDetector):
        print(f"pca: k_pca={model.components.shape[1]} trained on {X.shape[0]} rows -> {path}")
        return 0
    print(f"caa: k={len(model.pairs)} trained on {X.shape[0]} rows -> {path}")
    for i, p in enumerate(model.pairs, start=1):
        print(f"pair {i}: lambda={p.lam:.6g} sparseness={p.sparseness:.6g} correlation={p.correlation:.6g} "
              f"support_u={list(p.support_u)} support_v={list(p.support_v)} support={list(p.support)}")
    return 0


def cmd_score(cfg: RunConfig) -> int:
    model = _load_model(_need(cfg, "model"))
    ds = read_dataset(_need(cfg, "data"))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "score", "argmax_pair", "features"])
    if isinstance(model, PcaDetector):
        for i, s in enumerate(model.score_batch(ds.X)):
            w.writerow([i, repr(float(s)), "", ""])
    else:
        for i, x in enumerate(ds.X):
            rep = score(x, model)
            w.writerow([i, repr(rep.score), rep.argmax_index,
                        ";".join(str(j) for j in rep.contributing_features)])
    _emit(cfg, buf.getvalue())
    return 0


def _read_scores(path: str) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "score" not in reader.fieldnames:
            raise SchemaError(f"{path}: no 'score' column")
        try:
            return np.array([float(r["score"]) for r in reader])
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}", reader.line_num) from exc


def cmd_eval(cfg: RunConfig) -> int:
    ds = read_dataset(_need(cfg, "data"))
    if cfg.cv10:
        doc = {}
        for kind in ("caa", "pca"):
            cv = cross_validate_10fold(ds.X, ds.labels, cfg.seed, kind, cfg.caa_config(), cfg.k_pca,
                                       cfg.aggregation)
            doc[kind] = {"mean_accuracy": cv.mean_accuracy, "stdev": cv.stdev,
                         "fold_accuracies": cv.fold_accuracies.tolist()}
        doc["seed"] = cfg.seed
        _emit(cfg, _json(doc))
        return 0
    s = _read_scores(_need(cfg, "scores"))
    if s.size != ds.labels.size:
        raise SchemaError(f"{s.size} scores for {ds.labels.size} labelled rows")
    auc, lo, hi = roc_auc(s, ds.labels, n_boot=cfg.n_boot, seed=cfg.seed)
    thr, acc = threshold_by_accuracy(s, ds.labels)
    pred = s > thr
    y = ds.labels == 1
    doc = {"auc": auc, "ci_low": lo, "ci_high": hi, "threshold": _float_text(thr), "accuracy": acc,
           "tp": int(np.sum(pred & y)), "fp": int(np.sum(pred & ~y)), "tn": int(np.sum(~pred & ~y)),
           "fn": int(np.sum(~pred & y)), "n": int(s.size)}
    _emit(cfg, _json(doc))
    return 0


def cmd_attribute(cfg: RunConfig) -> int:
    model = _load_model(_need(cfg, "model"))
    if not isinstance(model, CaaDetector):
        raise InvalidSpec("attribution needs a CAA model")
    ds = read_dataset(_need(cfg, "data"))
    if cfg.row is not None:
        if not 0 <= cfg.row < ds.X.shape[0]:
            raise InvalidSpec(f"row {cfg.row} out of range")
        flagged = [cfg.row]
    else:
        thr = float(_need(cfg, "threshold"))
        flagged = np.flatnonzero(model.score_batch(ds.X) > thr)
    counts = attribute_batch(ds.X, model, flagged)
    names = model.feature_names or tuple(str(j) for j in range(model.m))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature", "count"])
    for name, c in zip(names, counts):
        w.writerow([name, int(c)])
    _emit(cfg, buf.getvalue())
    return 0


def _check_table(checks) -> str:
    return "\n".join(c.row() for c in checks)


def _jsonable(obj):
    if isinstance(obj, experiments.Check):
        return {"name": obj.name, "value": obj.value, "low": obj.low, "high": obj.high,
                "passed": obj.passed}
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items() if k != "seconds"}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer, np.floating, np.bool_)):
        return obj.item()
    return obj


def cmd_repro(cfg: RunConfig, target: str) -> int:
    caa_cfg = cfg.caa_config()
    if target == "breast-cancer":
        ds = load_wisconsin(cfg.data)
        result = experiments.breast_cancer(ds, cfg.seed, caa_cfg, cfg.k_pca)
        print(f"breast cancer: {ds.X.shape[0]} rows, {int(ds.labels.sum())} malignant; "
              f"CAA pairs {result['caa_pairs']}, k_pca {result['k_pca']}")
    elif target == "planted":
        result = experiments.planted_recovery(range(cfg.seed, cfg.seed + 10), caa_cfg)
    else:
        result = experiments.spectra(cfg.seed, cfg.bins, cfg.n_background, cfg.n_anomalous, caa_cfg)
        print("spectra (synthetic analog)")
    print(_check_table(result["checks"]))
    path = _out_path(cfg, required=False)
    if path is not None:
        path.write_text(_json(_jsonable(result)))
    return 0


# ---------------------------------------------------------------- argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value settings file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path (stdout when omitted, where allowed)")
    p.add_argument("--dump-config", action="store_true", help="print merged settings and exit")


def _caa_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--c1", type=float)
    p.add_argument("--c2", type=float)
    p.add_argument("--max-pairs", type=int)
    p.add_argument("--lambda-grid-size", type=int)
    p.add_argument("--sparseness-tol", type=float)
    p.add_argument("--min-correlation", type=float)
    p.add_argument("--aggregation", choices=["max", "sum"])
    p.add_argument("--k-pca", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="caa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("kind", choices=["planted", "spectra"])
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--bins", type=int)
    p.add_argument("--n-background", type=int)
    p.add_argument("--n-anomalous", type=int)
    _common(p)

    p = sub.add_parser("train", help="fit a detector on the label-0 rows of a dataset")
    p.add_argument("--data")
    p.add_argument("--detector", choices=["caa", "pca"])
    _caa_flags(p)
    _common(p)

    p = sub.add_parser("score", help="score every row of a dataset")
    p.add_argument("--model")
    p.add_argument("--data")
    _common(p)

    p = sub.add_parser("eval", help="AUC and accuracy threshold, or 10-fold cross-validation")
    p.add_argument("--scores")
    p.add_argument("--data")
    p.add_argument("--cv10", action="store_true", default=None)
    p.add_argument("--n-boot", type=int)
    _caa_flags(p)
    _common(p)

    p = sub.add_parser("attribute", help="per-feature counts over flagged rows")
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--threshold", type=float)
    p.add_argument("--row", type=int)
    _common(p)

    p = sub.add_parser("repro", help="run a replication protocol and print a pass/fail table")
    p.add_argument("target", choices=["breast-cancer", "planted", "spectra"])
    p.add_argument("--data", help="UCI file (defaults to the bundled copy)")
    p.add_argument("--bins", type=int)
    p.add_argument("--n-background", type=int)
    p.add_argument("--n-anomalous", type=int)
    _caa_flags(p)
    _common(p)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        values.update(parse_config_text(Path(args.config).read_text()))
    known = {f.name for f in fields(RunConfig)}
    for key, value in vars(args).items():
        if key in known and value is not None:
            values[key] = value
    cfg = replace(RunConfig(), **values)
    if args.command == "repro" and args.target == "spectra" and "bins" not in values:
        # The spectra replication runs at 32 bins unless asked otherwise.
        cfg = replace(cfg, bins=32)
    cfg.validate()
    return cfg


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        return _fail("UsageError", str(exc), 2)
    try:
        cfg = resolve_config(args)
        if args.dump_config:
            sys.stdout.write(dump_config(cfg))
            return 0
        if args.command == "synth":
            return cmd_synth(cfg, args.kind)
        if args.command == "repro":
            return cmd_repro(cfg, args.target)
        return {"train": cmd_train, "score": cmd_score, "eval": cmd_eval,
                "attribute": cmd_attribute}[args.command](cfg)
    except CaaError as exc:
        return _fail(exc.kind, str(exc), 1)
    except OSError as exc:
        where = exc.filename if exc.filename is not None else ""
        return _fail("IOError", f"{where}: {exc.strerror or exc}", 1)


if __name__ == "__main__":
    sys.exit(main())
