"""Benchmark the numba kernels against their pure-numpy fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--repeats 5]

Times the three hot paths (average pairwise distance sums, per-cluster
distance sums for the silhouette, centroid assignment) on sizes typical for
one word's usage matrix, and prints the speedup of the compiled path.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from usageshift import _kernels


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench(name, fn, repeats):
    if not _kernels.HAS_NUMBA:
        raise SystemExit("numba unavailable: nothing to compare")
    _kernels.use_numba(True)
    fn()  # compile outside the timer
    jit = best_of(fn, repeats)
    _kernels.use_numba(False)
    plain = best_of(fn, repeats)
    _kernels.use_numba(True)
    print(f"{name:<38} numba {jit * 1e3:9.2f} ms   numpy {plain * 1e3:9.2f} ms   x{plain / jit:6.2f}")


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    x = rng.normal(size=(400, 768))
    y = rng.normal(size=(400, 768))
    z = rng.normal(size=(2000, 32))
    labels = rng.integers(0, 6, size=2000)
    centroids = rng.normal(size=(8, 32))
    zc = rng.normal(size=(20000, 32))

    print(f"numba available: {_kernels.HAS_NUMBA}, enabled by env: {_kernels.NUMBA_ENABLED}")
    for distance in ("euclidean", "cosine", "canberra"):
        bench(
            f"apd_sum[{distance}] 400x400, dim 768",
            lambda d=distance: _kernels.apd_sum(x, y, d),
            args.repeats,
        )
    bench(
        "cluster_distance_sums 2000, dim 32",
        lambda: _kernels.cluster_distance_sums(z, labels, 6),
        args.repeats,
    )
    bench(
        "assign_to_centroids 20000x8, dim 32",
        lambda: _kernels.assign_to_centroids(zc, centroids),
        args.repeats,
    )


if __name__ == "__main__":
    main()
