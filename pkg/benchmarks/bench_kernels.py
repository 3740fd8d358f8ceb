"""Compare the numba and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 3]

Sizes mirror the hydraulic study: about 1000 healthy reference cycles,
a few hundred to a few thousand scored cycles, 243 features.  Both
backends are checked for identical output before timing.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from deepfmea import _kernels as K

CASES = [
    # (reference rows, query rows, features, k)
    (200, 200, 20, 5),
    (1000, 1200, 243, 5),
    (1500, 2205, 243, 5),
]


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    # compile once so the first timing excludes JIT cost
    t0 = time.perf_counter()
    K.knn_contributions_numba(np.zeros((1, 2)), np.zeros((2, 2)), 1)
    K.count_above_numba(np.zeros(2), np.zeros(2))
    print(f"numba compile/cache load: {time.perf_counter() - t0:.2f} s\n")

    print(f"{'kernel':<10} {'n_ref':>6} {'n_q':>6} {'d':>4} {'numpy s':>9} {'numba s':>9} {'speed-up':>9}")
    for n, m, d, k in CASES:
        ref = rng.normal(size=(n, d))
        q = rng.normal(size=(m, d)) * 1.3
        a = K.knn_contributions_numpy(q, ref, k)
        b = K.knn_contributions_numba(q, ref, k)
        assert np.array_equal(a[1], b[1]) and np.array_equal(a[0], b[0]), "backends disagree"
        tn = best_of(lambda: K.knn_contributions_numpy(q, ref, k), args.repeat)
        tb = best_of(lambda: K.knn_contributions_numba(q, ref, k), args.repeat)
        print(f"{'knn':<10} {n:>6} {m:>6} {d:>4} {tn:>9.4f} {tb:>9.4f} {tn / tb:>8.1f}x")

    for n in (1_000, 100_000):
        s = np.sort(rng.normal(size=n))
        t = np.concatenate([[-np.inf], (s[:-1] + s[1:]) / 2, [np.inf]])
        assert np.array_equal(K.count_above_numpy(s, t), K.count_above_numba(s, t))
        tn = best_of(lambda: K.count_above_numpy(s, t), args.repeat)
        tb = best_of(lambda: K.count_above_numba(s, t), args.repeat)
        print(f"{'count':<10} {n:>6} {t.size:>6} {'-':>4} {tn:>9.4f} {tb:>9.4f} {tn / tb:>8.1f}x")


if __name__ == "__main__":
    main()
