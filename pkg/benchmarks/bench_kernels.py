"""Timing comparison of the compiled kernels against the pure-Python fallback.

Run:  python benchmarks/bench_kernels.py [--repeat 7] [--rows 4096]

Imports both kernel modules directly (bypassing the import-time dispatch) so a
single process can time the two implementations on identical inputs.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from pathmatch.nd import _pykernels

try:
    from pathmatch.nd import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, args, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--rows", type=int, default=4096)
    ap.add_argument("--cols", type=int, default=90)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    n, m = args.rows, args.cols
    x = rng.standard_normal((n, m))
    g = rng.standard_normal((n, m))
    y_sig = 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x - x.max(axis=1, keepdims=True))
    y_soft = e / e.sum(axis=1, keepdims=True)
    idx = rng.integers(0, n, size=4 * n)
    src = rng.standard_normal((4 * n, m))
    acc = np.zeros((n, m))
    p = rng.standard_normal(n * m)
    pg = rng.standard_normal(n * m)
    mo = np.zeros(n * m)
    vo = np.zeros(n * m)

    cases = [
        ("relu_fwd", (x,)),
        ("relu_bwd", (g, np.maximum(x, 0.0))),
        ("sigmoid_fwd", (x,)),
        ("sigmoid_bwd", (g, y_sig)),
        ("softmax_rows_fwd", (x,)),
        ("softmax_rows_bwd", (g, y_soft)),
        ("scatter_add_rows", (acc, idx, src)),
        ("adam_update", (p, pg, mo, vo, 1e-3, 0.9, 0.999, 1e-8, 1)),
    ]

    print(f"rows={n} cols={m} repeat={args.repeat} (best-of timing, ms)")
    header = f"{'kernel':<18}{'pure-py':>10}{'compiled':>10}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, case_args in cases:
        t_py = best_of(getattr(_pykernels, name), case_args, args.repeat) * 1e3
        if _ckernels is None:
            print(f"{name:<18}{t_py:>10.3f}{'n/a':>10}{'n/a':>9}")
            continue
        t_c = best_of(getattr(_ckernels, name), case_args, args.repeat) * 1e3
        ratio = t_py / t_c if t_c > 0 else float("inf")
        print(f"{name:<18}{t_py:>10.3f}{t_c:>10.3f}{ratio:>8.1f}x")
    if _ckernels is None:
        print("\ncompiled kernels unavailable; build the extension to compare.")


if __name__ == "__main__":
    main()
