"""Compare the compiled kernels with the NumPy/pure-Python fallback.

    python benchmarks/bench_kernels.py [--points N] [--blocks N] [--words W]

Both backends are checked for identical output before timing.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from distaudit import kernels, sobol


def _best_of(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=1 << 18)
    ap.add_argument("--blocks", type=int, default=1 << 16)
    ap.add_argument("--words", type=int, default=32)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    if kernels.compiled_backend is None:
        print("compiled backend not available; build with `pip install -e . --no-build-isolation`")
        return 1
    py, cy = kernels.python_backend, kernels.compiled_backend

    key = sobol.random_key(np.random.default_rng(0), 10, 1 << 20, args.points)
    v = sobol.direction_words(key)
    shift = key.scale_shift
    rng = np.random.default_rng(1)
    idx = rng.choice(1 << 20, size=args.blocks, replace=False).astype(np.uint64)
    flip = (rng.random(args.blocks) < 0.01).astype(np.uint8)

    cases = [
        (f"sobol_points   n={args.points}",
         lambda b: b.sobol_points(v, 0, args.points, 1, shift)),
        (f"block_digests  n={args.blocks} words={args.words}",
         lambda b: b.block_digests(12345, idx, args.words, flip)),
    ]
    print(f"{'kernel':<40}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    for name, call in cases:
        if not np.array_equal(np.asarray(call(py)), np.asarray(call(cy))):
            print(f"{name}: backends disagree")
            return 1
        tp = _best_of(lambda: call(py), args.repeat)
        tc = _best_of(lambda: call(cy), args.repeat)
        print(f"{name:<40}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
