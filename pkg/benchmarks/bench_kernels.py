#!/usr/bin/env python3
"""Time every hot kernel on both paths: numba @njit loop vs numpy fallback.

Run:  python benchmarks/bench_kernels.py [--size 512] [--reps 5]

The jitted path is warmed (and disk-cached) before timing, so numbers
reflect steady-state throughput. Set DRCURATE_NO_NUMBA=1 to confirm the
package still runs end to end on the fallback path; this script itself
needs numba importable to compare the two.
"""

import argparse
import math
import time

import numpy as np

from drcurate import accel
from drcurate import enhance as en
from drcurate import features as fe
from drcurate import forest as fo
from drcurate import morphology as m
from drcurate import vesselness as ve


def timeit(fn, reps):
    best = math.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(name, jit_fn, numpy_fn, reps):
    jit_fn()  # warm-up / compile
    t_jit = timeit(jit_fn, reps)
    t_np = timeit(numpy_fn, reps)
    ratio = t_np / t_jit if t_jit > 0 else math.inf
    print(f"{name:<28}{t_jit * 1e3:>10.2f} ms{t_np * 1e3:>12.2f} ms{ratio:>9.2f}x")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=512, help="image side length")
    parser.add_argument("--reps", type=int, default=5)
    args = parser.parse_args()

    if not accel.HAVE_NUMBA:
        raise SystemExit("numba is not active (DRCURATE_NO_NUMBA set or not installed); nothing to compare")

    rng = np.random.RandomState(0)
    n = args.size
    gray = rng.randint(0, 256, size=(n, n), dtype=np.uint8)
    mask = rng.rand(n, n) < 0.4
    grayf = gray.astype(np.float64)

    print(f"kernel benchmarks at {n}x{n} (best of {args.reps})")
    print(f"{'kernel':<28}{'numba':>13}{'numpy':>15}{'speedup':>10}")

    dys1, dxs1 = m.disk_offsets(2)
    bench(
        "binary erode r=2",
        lambda: m._binary_erode_jit(mask, dys1, dxs1),
        lambda: m._binary_erode_numpy(mask, dys1, dxs1),
        args.reps,
    )
    dys8, dxs8 = m.disk_offsets(8)
    bench(
        "gray erode r=8",
        lambda: m._gray_morph_jit(gray, dys8, dxs8, True),
        lambda: m._gray_morph_numpy(gray, dys8, dxs8, True),
        args.reps,
    )

    from scipy import ndimage

    bench(
        "label components",
        lambda: m._label_jit(mask),
        lambda: ndimage.label(mask, structure=np.ones((3, 3), dtype=bool)),
        args.reps,
    )

    padded = np.pad(grayf / 255.0, 12, mode="edge")
    ii = m._integral(padded)
    bench(
        "window sums 25x25",
        lambda: m._window_sums_jit(ii, 25),
        lambda: m._window_sums_numpy(ii, 25),
        args.reps,
    )

    xb = en._tile_bounds(n, 8)
    yb = en._tile_bounds(n, 8)
    maps = np.empty((8, 8, 256))
    for r in range(8):
        for c in range(8):
            maps[r, c] = en._tile_mapping(gray[yb[r]:yb[r+1], xb[c]:xb[c+1]], 3.0)
    r0, r1, wy = en._interp_axis(n, yb)
    c0, c1, wx = en._interp_axis(n, xb)
    bench(
        "clahe interpolation",
        lambda: en._clahe_apply_jit(gray, maps, r0, r1, wy, c0, c1, wx),
        lambda: en._clahe_apply_numpy(gray, maps, r0, r1, wy, c0, c1, wx),
        args.reps,
    )

    hrr, hrc, hcc = ve._hessian(grayf, 2.0)
    c = 0.5 * math.sqrt(float((hrr * hrr + 2 * hrc * hrc + hcc * hcc).max()))
    bench(
        "frangi response",
        lambda: ve._frangi_response_jit(hrr, hrc, hcc, 0.5, c),
        lambda: ve._frangi_response_numpy(hrr, hrc, hcc, 0.5, c),
        args.reps,
    )

    bench(
        "sobel magnitude sum",
        lambda: fe._sobel_sum_jit(grayf),
        lambda: fe._sobel_sum_numpy(grayf),
        args.reps,
    )

    vals = np.sort(rng.randn(4000))
    labels = (rng.rand(4000) > 0.5).astype(np.float64)
    weights = np.ones(4000)
    bench(
        "cart split scan (n=4000)",
        lambda: fo._best_split_jit(vals, labels, weights, 2),
        lambda: fo._best_split_on_feature_numpy(vals, labels, weights, 2),
        args.reps,
    )


if __name__ == "__main__":
    main()
