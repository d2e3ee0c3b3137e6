"""Compiled vs pure-Python kernel timings.

Run: python3 benchmarks/bench_kernels.py [--repeat 5]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from halpern import _kernels_py

try:
    from halpern import _kernels as _compiled
except ImportError:
    _compiled = None

BETAS = np.r_[0.0, np.linspace(0.1, 0.99, 2000)]
CASES = [
    ("mopt_recursion(0.98, 1e5)", "mopt_recursion", (0.98, 100_000)),
    ("flat_recursion(2.0, 1e5)", "flat_recursion", (2.0, 100_000)),
    ("halpern_recursion(1.3, 2000 betas)", "halpern_recursion", (1.3, BETAS)),
    ("flat_general_recursion(1.5, 2000 betas)", "flat_general_recursion", (1.5, BETAS)),
    ("rho_sequences(1e5)", "rho_sequences", (100_000,)),
    ("logistic(1e5)", "logistic", (100_000,)),
    ("affine_residuals(0.9, 300 betas)", "affine_residuals", (0.9, BETAS[:301])),
]


def best_of(fn, args, repeat: int) -> float:
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    opts = ap.parse_args()
    print(f"{'kernel':42s} {'python s':>10s} {'cython s':>10s} {'speedup':>8s}")
    for label, name, args in CASES:
        t_py = best_of(getattr(_kernels_py, name), args, opts.repeat)
        if _compiled is None:
            print(f"{label:42s} {t_py:10.4f} {'n/a':>10s} {'n/a':>8s}")
            continue
        t_cy = best_of(getattr(_compiled, name), args, opts.repeat)
        print(f"{label:42s} {t_py:10.4f} {t_cy:10.4f} {t_py / t_cy:8.1f}x")


if __name__ == "__main__":
    main()
