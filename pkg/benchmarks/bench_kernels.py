#!/usr/bin/env python3
"""Benchmark the numba ranking kernel against the pure-numpy fallback.

Run: python benchmarks/bench_kernels.py [--sizes 10000,100000] [--dims 64,512]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from pdvret import kernels


def time_call(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="1000,10000,100000")
    parser.add_argument("--dims", default="64,256,512")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    sizes = [int(s) for s in args.sizes.split(",")]
    dims = [int(d) for d in args.dims.split(",")]
    rng = np.random.default_rng(0)

    has_numba = kernels.cosine_scores_numba is not None
    if not has_numba:
        print("numba backend unavailable (PDV_NO_NUMBA set or import failed); "
              "benchmarking numpy only")

    print(f"{'rows':>8} {'dim':>5} {'numpy (ms)':>12} {'numba (ms)':>12} {'speedup':>8}")
    for n in sizes:
        for d in dims:
            matrix = rng.standard_normal((n, d)).astype(np.float32)
            query = rng.standard_normal(d)
            t_np = time_call(kernels.cosine_scores_numpy, matrix, query, repeat=args.repeat)
            if has_numba:
                kernels.cosine_scores_numba(matrix, query)  # compile outside timing
                t_nb = time_call(kernels.cosine_scores_numba, matrix, query, repeat=args.repeat)
                diff = np.abs(
                    kernels.cosine_scores_numba(matrix, query)
                    - kernels.cosine_scores_numpy(matrix, query)
                ).max()
                assert diff < 1e-10, f"backends disagree by {diff}"
                print(f"{n:>8} {d:>5} {t_np * 1e3:>12.3f} {t_nb * 1e3:>12.3f} "
                      f"{t_np / t_nb:>8.2f}x")
            else:
                print(f"{n:>8} {d:>5} {t_np * 1e3:>12.3f} {'-':>12} {'-':>8}")


if __name__ == "__main__":
    main()
