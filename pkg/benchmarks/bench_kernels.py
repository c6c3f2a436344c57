#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Usage:
    python benchmarks/bench_kernels.py [--size 512] [--instances 12] [--repeats 20]

Times the four hot kernels on synthetic scene-sized inputs and prints the
per-call latency of each backend plus the speedup.
"""

import argparse
import time

import numpy as np

from segforge.kernels import fallback

try:
    from segforge.kernels import _ckernels
except ImportError:
    _ckernels = None


def make_inputs(size: int, instances: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    masks = np.zeros((instances, size, size), dtype=np.uint8)
    for i in range(instances):
        cy, cx = rng.integers(0, size, 2)
        r = rng.integers(size // 16, size // 4)
        yy, xx = np.mgrid[0:size, 0:size]
        masks[i] = ((yy - cy) ** 2 + (xx - cx) ** 2 <= r * r).astype(np.uint8)
    owner = fallback.resolve_owner(masks)
    naive = rng.integers(0, 256, (size, size, 3), dtype=np.uint8)
    relit = rng.integers(0, 256, (size, size, 3), dtype=np.uint8)
    alphas = rng.uniform(0.2, 0.8, instances)
    rgb = rng.uniform(0, 255, (size * size, 3))
    return {
        "masks": np.ascontiguousarray(masks),
        "owner": np.ascontiguousarray(owner.astype(np.int32)),
        "naive": np.ascontiguousarray(naive),
        "relit": np.ascontiguousarray(relit),
        "alphas": np.ascontiguousarray(alphas),
        "rgb": np.ascontiguousarray(rgb),
    }


def bench(fn, repeats: int) -> float:
    fn()  # warm-up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=512, help="canvas size in pixels")
    parser.add_argument("--instances", type=int, default=12, help="masks per scene")
    parser.add_argument("--repeats", type=int, default=20, help="timed iterations")
    args = parser.parse_args()

    data = make_inputs(args.size, args.instances)
    rle_mask = data["masks"][0]
    counts = fallback.rle_encode(rle_mask)

    cases = {
        "resolve_owner": lambda impl: impl.resolve_owner(data["masks"]),
        "rle_encode": lambda impl: impl.rle_encode(rle_mask),
        "rle_decode": lambda impl: impl.rle_decode(np.asarray(counts), args.size, args.size),
        "srgb_to_lab": lambda impl: impl.srgb_to_lab(data["rgb"]),
        "blend_images": lambda impl: impl.blend_images(
            data["naive"], data["relit"], data["owner"], data["alphas"], 0.1),
    }

    print(f"canvas {args.size}x{args.size}, {args.instances} instances, "
          f"{args.repeats} repeats\n")
    header = f"{'kernel':<14} {'numpy':>10} {'compiled':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, call in cases.items():
        t_numpy = bench(lambda: call(fallback), args.repeats)
        if _ckernels is None:
            print(f"{name:<14} {t_numpy * 1e3:>8.2f}ms {'n/a':>10} {'n/a':>8}")
            continue
        t_compiled = bench(lambda: call(_ckernels), args.repeats)
        print(f"{name:<14} {t_numpy * 1e3:>8.2f}ms {t_compiled * 1e3:>8.2f}ms "
              f"{t_numpy / t_compiled:>7.1f}x")
    if _ckernels is None:
        print("\ncompiled extension not built; rerun after `pip install -e .`")


if __name__ == "__main__":
    main()
