"""Time the compiled and pure-Python solver kernels on the same inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--skip-fit]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from caa import _backend
from caa.caa_model import CaaConfig
from caa.data_synth import load_wisconsin
from caa.matrix_core import standardize


def cases():
    rng = np.random.default_rng(0)
    for m in (9, 32, 128):
        A = rng.standard_normal((4 * m, m))
        G = A.T @ A
        v0 = np.linalg.svd(G)[2][0]
        starts = np.vstack([v0, np.eye(m)])
        yield f"pmd m={m}", lambda k, G=G, v0=v0: k.pmd(G, 1.3, 1.3, v0, 200, 1e-8)
        yield f"best_disjoint m={m}", (
            lambda k, G=G, s=starts: k.best_disjoint(G, 1.3, 1.3, s, 0.02, 200, 1e-8, 1e-8))


def bench_fit(name: str, repeat: int) -> float:
    import caa.caa_model as model

    saved = model.kernels
    model.kernels = _backend.available()[name]
    try:
        X, _ = standardize(load_wisconsin().normal)
        return min(timeit.repeat(lambda: model.fit_caa(X, CaaConfig()), number=1, repeat=repeat))
    finally:
        model.kernels = saved


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-fit", action="store_true", help="skip the end-to-end fit (slow in pure Python)")
    args = ap.parse_args()
    backends = _backend.available()
    if "cython" not in backends:
        print("compiled extension not built; only the Python backend is available")
    names = sorted(backends)
    print(f"{'case':<24}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) == 2 else ""))
    for label, fn in cases():
        t = {n: min(timeit.repeat(lambda: fn(backends[n]), number=3, repeat=args.repeat)) / 3 for n in names}
        row = f"{label:<24}" + "".join(f"{t[n] * 1e3:>10.3f}ms" for n in names)
        if len(names) == 2:
            row += f"{t['python'] / t['cython']:>11.1f}x"
        print(row)
    if args.skip_fit:
        return
    t = {n: bench_fit(n, max(1, args.repeat // 2)) for n in names}
    row = f"{'fit_caa wisconsin':<24}" + "".join(f"{t[n] * 1e3:>10.1f}ms" for n in names)
    if len(names) == 2:
        row += f"{t['python'] / t['cython']:>11.1f}x"
    print(row)


if __name__ == "__main__":
    main()
