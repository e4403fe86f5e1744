"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--events 100000]

Both backends are checked for identical output before timing.
"""
import argparse
import time

import numpy as np

from ledgermine import _kernels


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(n, rng):
    span = 365 * 86400
    a = np.sort(rng.integers(0, span, n // 10))
    b = np.sort(rng.integers(0, span, n // 10))
    l_ev = np.arange(a.size, dtype=np.int64).reshape(-1, 1)
    r_ev = np.arange(a.size, a.size + b.size, dtype=np.int64).reshape(-1, 1)
    lo, hi = np.int64(0), np.int64(4 * 3600)
    return {
        "window_counts": lambda k: k.window_counts(a, b, lo, hi),
        "recent_counts": lambda k: k.recent_counts(a, b, np.int64(3600)),
        "greedy_pair": lambda k: k.greedy_pair(a, l_ev, b, r_ev, lo, hi),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--events", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _kernels.numba_backend is None:
        raise SystemExit("numba is not installed; nothing to compare")
    np_k, nb_k = _kernels.numpy_backend, _kernels.numba_backend
    print(f"{'kernel':<15}{'numpy s':>12}{'numba s':>12}{'speedup':>10}")
    for name, run in cases(args.events, np.random.default_rng(args.seed)).items():
        np.testing.assert_array_equal(run(np_k), run(nb_k))  # also warms up the JIT
        t_np = best_of(lambda: run(np_k), args.repeat)
        t_nb = best_of(lambda: run(nb_k), args.repeat)
        print(f"{name:<15}{t_np:>12.5f}{t_nb:>12.5f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
