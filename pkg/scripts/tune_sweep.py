"""Grid search over sweep settings on development seeds.

Scores every (temperature, radius) pair on the three synthetic benchmarks
with seeds offset by ``--offset`` so the acceptance seeds stay untouched.

    python scripts/tune_sweep.py --temperature 0.05 0.1 --radius 4 8 12
"""

import argparse
import itertools
import time

import numpy as np

from _common import TEXTURE_CELL, fronto_lsq_depth, per_pixel_depth, slanted_depth
from slantsweep.metrics import depth_metrics
from slantsweep.sweep import SweepConfig
from slantsweep.synth import add_noise, render, sample_scene, single_plane_scene


def score(cfg, offset, n):
    t0 = time.perf_counter()
    single = []
    for s in range(n):
        spec = single_plane_scene(offset + s, texture_cell=TEXTURE_CELL)
        pair = render(spec)
        single.append(depth_metrics(slanted_depth(spec, pair, cfg)[0], pair.depth).abs_rel)
    t_single = time.perf_counter() - t0
    multi = []
    for s in range(n):
        spec = sample_scene(offset + 100 + s, slant_range=(30.0, 60.0), texture_cell=TEXTURE_CELL)
        pair = render(spec)
        a = depth_metrics(slanted_depth(spec, pair, cfg)[0], pair.depth).abs_rel
        b = depth_metrics(fronto_lsq_depth(spec, pair, cfg), pair.depth).abs_rel
        multi.append((a, b))
    rng = np.random.default_rng(7)
    wins = 0
    for s in range(n):
        spec = sample_scene(offset + 200 + s, texture_cell=TEXTURE_CELL)
        pair = render(spec)
        tgt, src = add_noise(pair.target, 0.02, rng), add_noise(pair.source, 0.02, rng)
        pooled, res = slanted_depth(spec, pair, cfg, tgt=tgt, src=src)
        wins += depth_metrics(pooled, pair.depth).rmse <= depth_metrics(per_pixel_depth(res, spec.intrinsics), pair.depth).rmse
    m = np.mean(multi, axis=0)
    return np.mean(single), np.max(single), t_single, m[0], m[1], wins


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--temperature", type=float, nargs="+", default=[0.05, 0.1])
    ap.add_argument("--radius", type=int, nargs="+", default=[4, 8, 12])
    ap.add_argument("--scale", type=int, default=1)
    ap.add_argument("--offset", type=int, default=5000)
    ap.add_argument("--n", type=int, default=20)
    args = ap.parse_args()

    print(f"{'T':>5} {'R':>3} {'single mean':>11} {'max':>7} {'time':>6} {'slanted':>8} {'fronto':>8} {'pool wins':>9}")
    for t, r in itertools.product(args.temperature, args.radius):
        cfg = SweepConfig(window=7, radius=r, temperature=t, scale=args.scale)
        sm, sx, ts, a, b, w = score(cfg, args.offset, args.n)
        print(f"{t:5.2f} {r:3d} {sm:11.4f} {sx:7.4f} {ts:5.1f}s {a:8.4f} {b:8.4f} {w:6d}/{args.n}")


if __name__ == "__main__":
    main()
