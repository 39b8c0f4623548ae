#!/usr/bin/env python3
"""Throughput comparison: compiled kernels vs the numpy fallback.

Times the two hot paths (z-buffer splatting and voxel accumulation) on a
realistic workload and verifies along the way that both backends produce
bit-identical results. Run from the repo root:

    python benchmarks/compare_backends.py [--points N] [--frames N]
"""

import argparse
import time

import numpy as np

from conceptcloud import kernels
from conceptcloud.render import CameraPose, rasterize
from conceptcloud.voxel import aggregate
from conceptcloud.model import ConceptCloud


def time_it(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_splat(n_points, n_frames, repeats):
    rng = np.random.default_rng(0)
    pts = rng.uniform(-2, 2, (n_points, 3)) + [0, 0, 8]
    colors = (rng.random((n_points, 3)) * 255).astype(np.uint8)
    ids = rng.integers(0, 10, n_points)
    cam = CameraPose([0, 0, 0], [0, 0, 1], [0, 1, 0], 60.0, (224, 224))

    results = {}
    for backend in kernels.available_backends():
        def run():
            out = None
            for _ in range(n_frames):
                out = rasterize(pts, colors, ids, cam, 1, backend=backend)
            return out
        secs, out = time_it(run, repeats)
        results[backend] = (secs, out)
    return results


def bench_voxel(n_points, repeats):
    rng = np.random.default_rng(1)
    feats = rng.normal(size=(n_points, 32))
    feats /= np.linalg.norm(feats, axis=1, keepdims=True)
    cloud = ConceptCloud(rng.uniform(-3, 3, (n_points, 3)), feats,
                         rng.integers(0, 10, n_points).astype(np.int64), 32)
    results = {}
    for backend in kernels.available_backends():
        secs, out = time_it(lambda: aggregate(cloud, 0.1, backend=backend), repeats)
        results[backend] = (secs, out)
    return results


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=20_000)
    parser.add_argument("--frames", type=int, default=20)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    print(f"active backend: {kernels.active_backend()} "
          f"(available: {', '.join(kernels.available_backends())})\n")

    splat = bench_splat(args.points, args.frames, args.repeats)
    print(f"splat: {args.frames} frames x {args.points} points, 224x224, radius 1")
    for backend, (secs, _) in splat.items():
        print(f"  {backend:<9} {secs:8.3f}s  ({args.frames / secs:7.1f} frames/s)")
    if len(splat) == 2:
        (ic, mc), (inp, mn) = splat["compiled"][1], splat["numpy"][1]
        assert np.array_equal(ic.pixels, inp.pixels) and np.array_equal(mc, mn)
        print(f"  outputs bit-identical; speedup {splat['numpy'][0] / splat['compiled'][0]:.1f}x")

    voxel = bench_voxel(args.points, args.repeats)
    print(f"\nvoxel accumulate: {args.points} points, dim 32, cell 0.1")
    for backend, (secs, _) in voxel.items():
        print(f"  {backend:<9} {secs:8.3f}s  ({args.points / secs / 1e6:7.2f} Mpts/s)")
    if len(voxel) == 2:
        a, b = voxel["compiled"][1], voxel["numpy"][1]
        assert np.array_equal(a.positions, b.positions) and np.array_equal(a.features, b.features)
        print(f"  outputs bit-identical; speedup {voxel['numpy'][0] / voxel['compiled'][0]:.1f}x")


if __name__ == "__main__":
    main()
