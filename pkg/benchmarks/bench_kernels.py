"""Benchmark the numba and numpy pairwise-distance kernels against each other.

Usage: python benchmarks/bench_kernels.py [--sizes 500,1000,2000] [--dim 100]

The numba path is warmed up once before timing so JIT compilation does not
count against it. Results are wall-clock medians over repeated runs.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from incidentkg import _kernels


def _time(fn, x, repeats: int = 5) -> float:
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn(x)
        samples.append(time.perf_counter() - start)
    return statistics.median(samples)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="500,1000,2000")
    parser.add_argument("--dim", type=int, default=100)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    kernels = {
        "euclidean/numpy": _kernels.pairwise_euclidean_numpy,
        "cosine/numpy": _kernels.pairwise_cosine_numpy,
    }
    if _kernels._HAVE_NUMBA:
        kernels["euclidean/numba"] = _kernels.pairwise_euclidean_numba
        kernels["cosine/numba"] = _kernels.pairwise_cosine_numba
        warmup = np.random.default_rng(0).normal(size=(8, args.dim))
        _kernels.pairwise_euclidean_numba(warmup)
        _kernels.pairwise_cosine_numba(warmup)
    else:
        print("numba unavailable; benchmarking the numpy path only")

    print(f"active backend: {_kernels.BACKEND}  (dim={args.dim})")
    header = f"{'n':>6}  " + "  ".join(f"{name:>18}" for name in kernels)
    print(header)
    print("-" * len(header))
    for n in sizes:
        x = np.random.default_rng(n).normal(size=(n, args.dim))
        row = [f"{n:>6}"]
        for fn in kernels.values():
            row.append(f"{_time(fn, x, args.repeats) * 1000:>16.1f}ms")
        print("  ".join(row))


if __name__ == "__main__":
    main()
