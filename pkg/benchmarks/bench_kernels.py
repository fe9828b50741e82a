"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Prints one line per kernel with the best-of-N time for each backend.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from labeltest import _pure
from labeltest.graph_fr import pairwise_distances

try:
    from labeltest import _ext
except ImportError:
    _ext = None


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_kruskal(mod, n: int):
    pts = np.random.default_rng(0).normal(size=(n, 2))
    ii, jj, w = pairwise_distances(pts)
    order = np.argsort(w, kind="stable").astype(np.int64)
    return lambda: mod.kruskal_scan(order, ii, jj, n)


def bench_cut_counts(mod, n: int, perms: int):
    rng = np.random.default_rng(1)
    ei = rng.integers(0, n, n - 1).astype(np.int64)
    ej = rng.integers(0, n, n - 1).astype(np.int64)
    base = np.zeros(n, dtype=np.int8)
    base[: n // 2] = 1
    labs = np.ascontiguousarray(rng.permuted(np.tile(base, (perms, 1)), axis=1))
    return lambda: mod.cut_counts(ei, ej, labs)


def bench_cache(mod, pool: int, steps: int):
    """The sequential-test pattern: insert one labeled point, then rescore the pool."""
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(pool, 2))
    train = rng.normal(size=(steps, 2))
    labels = rng.integers(0, 2, steps)

    def run():
        cache = mod.NeighborCache(pts, 64)
        for t in range(steps):
            cache.insert(train[t], int(labels[t]))
            cache.count_ones(math.ceil(math.sqrt(t + 1)))

    return run


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _ext is None:
        print("compiled extension not built; only the numpy fallback is available")
    cases = [
        ("kruskal_scan n=1000", lambda m: bench_kruskal(m, 1000)),
        ("cut_counts n=200 x 10000 perms", lambda m: bench_cut_counts(m, 200, 10_000)),
        ("neighbour cache pool=1000, 400 steps", lambda m: bench_cache(m, 1000, 400)),
    ]
    print(f"{'kernel':<40} {'numpy [s]':>10} {'compiled [s]':>13} {'speedup':>8}")
    for name, make in cases:
        t_py = best_of(make(_pure), args.repeat)
        if _ext is None:
            print(f"{name:<40} {t_py:>10.4f} {'-':>13} {'-':>8}")
            continue
        t_c = best_of(make(_ext), args.repeat)
        print(f"{name:<40} {t_py:>10.4f} {t_c:>13.4f} {t_py / t_c:>7.1f}x")


if __name__ == "__main__":
    main()
