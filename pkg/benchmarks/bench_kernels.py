"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--trials N] [--K K] [--repeat R]
"""
import argparse
import time

import numpy as np

from nomaiot import _pykernels

try:
    from nomaiot import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=10 ** 6)
    ap.add_argument("--K", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    n, K = args.trials, args.K
    split = np.full(K, 1.0 / K)
    numer = 2.0 ** (np.arange(1, K + 1) * 9.0 / K) - 1.0
    cases = {
        "trial_gains": lambda mod: mod.trial_gains(0, 0, n, K),
        "thresholds_equal_rate": lambda mod: mod.thresholds_equal_rate(0, 0, n, split, 0, numer),
    }
    print(f"trials={n} K={K} best of {args.repeat}")
    print(f"{'kernel':<24}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}{'max|diff|':>12}")
    for name, call in cases.items():
        tp, ref = best_of(lambda: call(_pykernels), args.repeat)
        if _kernels is None:
            print(f"{name:<24}{tp:>12.3f}{'n/a':>12}{'':>10}{'':>12}")
            continue
        tc, got = best_of(lambda: call(_kernels), args.repeat)
        finite = np.isfinite(ref)
        diff = float(np.max(np.abs(np.asarray(got)[finite] - ref[finite]), initial=0.0))
        print(f"{name:<24}{tp:>12.3f}{tc:>12.3f}{tp / tc:>9.1f}x{diff:>12.1e}")


if __name__ == "__main__":
    main()
