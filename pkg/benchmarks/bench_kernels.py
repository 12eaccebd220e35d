"""Timing of the compiled kernels against the NumPy fallback.

Runs each kernel on problem sizes typical of the sweeps (a 28001-point
reference operator, 2800-point atomic operators, 120x120 overlap
matrices) and, at the end, one full eigenvalue sweep under each backend.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--out timings.csv]
"""
from __future__ import annotations

import argparse
import csv
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from lcaobound import _kernels_py

try:
    from lcaobound import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

ROOT = Path(__file__).resolve().parent.parent


def laplacian(n: int, h: float, shift: float = 1.0):
    x = np.linspace(-1.0, 1.0, n)
    d = 1.0 / h**2 + shift - 2.0 / np.sqrt(0.5 + (x * 14.0) ** 2)
    e = np.full(n - 1, -0.5 / h**2)
    return d, e


def overlap(n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n - 4, n))
    return np.ascontiguousarray(X.T @ X / n)


def cases():
    d_big, e_big = laplacian(28001, 1e-3)
    d_sub, e_sub = laplacian(2801, 1e-3)
    w_sub = _kernels_py.bisect_eigvals(d_sub, e_sub, 18, 0.0)
    rhs = np.random.default_rng(1).normal(size=28001)
    S = overlap(120)
    return {
        "bisect 2 of 28001": lambda k: k.bisect_eigvals(d_big, e_big, 2, 0.0),
        "bisect 18 of 2801": lambda k: k.bisect_eigvals(d_sub, e_sub, 18, 0.0),
        "inverse iteration 18 of 2801": lambda k: k.inverse_iteration(d_sub, e_sub, w_sub, 10, 64.0),
        "ldl solve 28001": lambda k: k.ldl_solve(d_big, e_big, rhs),
        "pivoted cholesky 120": lambda k: k.pivoted_cholesky(S, 1e-8),
        "start vector 28001": lambda k: k.start_vector(28001, 3),
    }


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def sweep_time(pure: bool) -> float:
    env = dict(os.environ)
    env.pop("LCAOBOUND_PURE_PYTHON", None)
    if pure:
        env["LCAOBOUND_PURE_PYTHON"] = "1"
    code = ("import time; from lcaobound.driver import load_config, run_experiment;"
            f"t = time.perf_counter(); run_experiment(load_config(r'{ROOT / 'configs' / 'vary_overlap_04.cfg'}',"
            " gap_mode='oracle')); print(time.perf_counter() - t)")
    out = subprocess.run([sys.executable, "-c", code], env=env, check=True, capture_output=True, text=True)
    return float(out.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--out", default=None, help="optional CSV file for the timings")
    ap.add_argument("--no-sweep", action="store_true", help="skip the end-to-end sweep timing")
    args = ap.parse_args()

    if _kernels_c is None:
        print("compiled kernels not built; only the NumPy fallback is timed")
    rows = []
    for name, fn in cases().items():
        t_py = best_of(lambda: fn(_kernels_py), args.repeat)
        t_c = best_of(lambda: fn(_kernels_c), args.repeat) if _kernels_c is not None else float("nan")
        rows.append((name, t_py, t_c))
    if not args.no_sweep:
        t_c = sweep_time(False) if _kernels_c is not None else float("nan")
        rows.append(("eig-sweep N=4..60 (end to end)", sweep_time(True), t_c))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'python [s]':>11}  {'cython [s]':>11}  {'speed-up':>8}")
    for name, t_py, t_c in rows:
        print(f"{name:<{width}}  {t_py:11.5f}  {t_c:11.5f}  {t_py / t_c:8.1f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kernel", "python_s", "cython_s"])
            w.writerows((n, format(a, ".6g"), format(b, ".6g")) for n, a, b in rows)


if __name__ == "__main__":
    main()
