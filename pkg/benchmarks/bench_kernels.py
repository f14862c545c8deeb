#!/usr/bin/env python3
"""Time the accelerated kernel backend against the plain-numpy fallback.

Both backends return bit-identical arrays (enforced by the test suite); this
script only compares wall-clock time. Run it directly:

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from spinemetrics import _kernels_numpy as knp

try:
    from spinemetrics import _kernels_numba as knb
except ImportError:
    knb = None


def make_cases(rng):
    n = 12
    angles = np.sort(rng.uniform(0, 2 * np.pi, n))
    r = rng.uniform(20, 200, n)
    xs = 256 + r * np.cos(angles)
    ys = 256 + r * np.sin(angles)

    mask = (rng.random((512, 512)) < 0.45).astype(np.uint8)
    gt = rng.integers(0, 6, (512, 512)).astype(np.int64)
    pred = rng.integers(0, 6, (512, 512)).astype(np.int64)

    seeds = np.zeros((512, 512), np.int32)
    fg = np.argwhere(mask)
    for lab, (y, x) in enumerate(fg[rng.choice(len(fg), 8, replace=False)], 1):
        seeds[y, x] = lab

    return {
        "fill_polygon": lambda k: k.fill_polygon(xs, ys, 512, 512),
        "confusion_counts": lambda k: k.confusion_counts(gt, pred, 6),
        "erode(k=5)": lambda k: k.erode(mask, 5),
        "dilate(k=5)": lambda k: k.dilate(mask, 5),
        "label_components": lambda k: k.label_components(mask),
        "grow_seeds": lambda k: k.grow_seeds(mask, seeds),
    }


def bench(fn, backend, repeats):
    fn(backend)  # warm up (triggers JIT compilation where applicable)
    best = min(
        (lambda t0: (fn(backend), time.perf_counter() - t0)[1])(time.perf_counter())
        for _ in range(repeats)
    )
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    cases = make_cases(rng)

    print(f"{'kernel':<18} {'numpy (ms)':>12} {'numba (ms)':>12} {'speedup':>9}")
    for name, fn in cases.items():
        t_np = bench(fn, knp, args.repeats) * 1e3
        if knb is None:
            print(f"{name:<18} {t_np:>12.3f} {'n/a':>12} {'n/a':>9}")
            continue
        t_nb = bench(fn, knb, args.repeats) * 1e3
        print(f"{name:<18} {t_np:>12.3f} {t_nb:>12.3f} {t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
