"""Benchmark the numba kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--size 2000000] [--repeats 5]
"""

import argparse
import time

import numpy as np

from modelprobe import _kernels


def _time(fn, *args, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--size", type=int, default=2_000_000)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(7)
    x = rng.standard_normal(args.size)

    rows = []
    if _kernels.HAS_NUMBA:
        # trigger compilation outside the timed region
        _kernels._moments_numba(x[:16])
        _kernels._histogram_numba(x[:16], -1.0, 1.0, 8)
        rows.append(("moments", "numba",
                     _time(_kernels._moments_numba, x, repeats=args.repeats)))
        rows.append(("histogram", "numba",
                     _time(_kernels._histogram_numba, x, -4.0, 4.0, 64,
                           repeats=args.repeats)))
    else:
        print("numba unavailable or disabled; benchmarking the numpy path only")
    rows.append(("moments", "numpy",
                 _time(_kernels.moments_numpy, x, repeats=args.repeats)))
    rows.append(("histogram", "numpy",
                 _time(_kernels.histogram_numpy, x, -4.0, 4.0, 64,
                       repeats=args.repeats)))

    print(f"\n{args.size:,} f64 elements, best of {args.repeats}")
    print(f"{'kernel':<12} {'backend':<8} {'seconds':>10}")
    for kernel, backend, seconds in rows:
        print(f"{kernel:<12} {backend:<8} {seconds:>10.4f}")
    by_kernel = {}
    for kernel, backend, seconds in rows:
        by_kernel.setdefault(kernel, {})[backend] = seconds
    for kernel, timings in by_kernel.items():
        if len(timings) == 2:
            print(f"{kernel}: numba is {timings['numpy'] / timings['numba']:.1f}x "
                  f"the numpy path")


if __name__ == "__main__":
    main()
