"""Time the pairwise counting kernel under both backends.

    python benchmarks/bench_kernels.py --n 20000 200000 --d 6 12 --repeat 5

Counts are checked for equality before any timing is reported.
"""

import argparse
import time

import numpy as np

from ddssp import _kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, nargs="+", default=[20_000, 200_000])
    ap.add_argument("--d", type=int, nargs="+", default=[6, 12])
    ap.add_argument("--max-size", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if not _kernels.HAVE_NUMBA:
        print("numba is not installed; only the numpy backend can be timed")
    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])
    rng = np.random.default_rng(args.seed)

    print(f"{'n':>8} {'d':>3} " + " ".join(f"{b:>10}" for b in backends) + "   speedup")
    for d in args.d:
        sizes = rng.integers(2, args.max_size + 1, size=d)
        for n in args.n:
            rec = np.column_stack([rng.integers(0, m, size=n) for m in sizes])
            ref = _kernels.pair_counts(rec, sizes, backend="numpy")
            if "numba" in backends:
                got = _kernels.pair_counts(rec, sizes, backend="numba")  # also triggers compilation
                assert all(np.array_equal(ref[k], got[k]) for k in ref), "backends disagree"
            t = {b: best_of(lambda b=b: _kernels.pair_counts(rec, sizes, backend=b), args.repeat) for b in backends}
            speed = f"{t['numpy'] / t['numba']:8.2f}x" if "numba" in t else "       -"
            print(f"{n:>8} {d:>3} " + " ".join(f"{t[b] * 1e3:>8.2f}ms" for b in backends) + f"  {speed}")


if __name__ == "__main__":
    main()
