"""Benchmark the numba kernels against their pure-NumPy fallbacks.

Usage:  python benchmarks/bench_kernels.py [--repeat 7]

The numba path is what ``AFTMEAN_NUMBA=1`` (the default) selects; the numpy
rows are what you get with ``AFTMEAN_NUMBA=0``.  First-call compilation is
excluded by a warmup pass.
"""

import argparse
import time

import numpy as np

from aftmean import kernels
from aftmean._backend import HAVE_NUMBA


def make_gehan_instance(rng, n, d):
    es = np.sort(rng.normal(size=n))
    ds = (rng.random(n) < 0.6).astype(np.float64)
    xs = rng.normal(size=(n, d))
    return es, ds, xs


def make_cox_instance(rng, n, d):
    ys = -np.sort(rng.normal(size=n))
    ds = (rng.random(n) < 0.6).astype(np.float64)
    xs = rng.normal(size=(n, d))
    beta = rng.normal(size=d)
    eta = xs @ beta
    return eta, ys, ds, xs, float(eta.max())


def bench(fn, args, repeat):
    fn(*args)  # warmup / compile
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=7)
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    cases = []
    for n in (200, 2000):
        es, ds, xs = make_gehan_instance(rng, n, 2)
        cases.append((f"gehan_loss      n={n}", kernels.gehan_loss_sorted_numpy,
                      kernels.gehan_loss_sorted_numba, (es, ds)))
        cases.append((f"gehan_score d=2 n={n}", kernels.gehan_score_sorted_numpy,
                      kernels.gehan_score_sorted_numba, (es, ds, xs)))
        y = rng.normal(size=n)
        delta = (rng.random(n) < 0.6).astype(np.float64)
        x1 = rng.normal(size=n)
        cases.append((f"d1_pair_profile n={n}", kernels.d1_pair_profile_numpy,
                      kernels.d1_pair_profile_numba, (y, delta, x1)))
        eta, ys, ds2, xs5, shift = make_cox_instance(rng, n, 5)
        cases.append((f"cox_suffstats   n={n} d=5", kernels.cox_suffstats_numpy,
                      kernels.cox_suffstats_numba, (eta, ys, ds2, xs5, shift)))

    print(f"{'kernel':<28}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for name, np_fn, nb_fn, fnargs in cases:
        t_np = bench(np_fn, fnargs, args.repeat)
        if HAVE_NUMBA and nb_fn is not None:
            t_nb = bench(nb_fn, fnargs, args.repeat)
            print(f"{name:<28}{t_np * 1e6:>10.1f}us{t_nb * 1e6:>10.1f}us{t_np / t_nb:>9.1f}x")
        else:
            print(f"{name:<28}{t_np * 1e6:>10.1f}us{'n/a':>12}{'':>10}")


if __name__ == "__main__":
    main()
