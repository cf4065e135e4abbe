"""Effect of hypothesis count per axis and of the axis ranges on single-plane scenes.

    python scripts/hypothesis_ablation.py --seeds 0 10
"""

import argparse
import time

import numpy as np

from _common import SMALL, TEXTURE_CELL
from slantsweep.geometry import DepthMap
from slantsweep.hypotheses import AxisRange, build_grid
from slantsweep.metrics import depth_metrics
from slantsweep.pooling import PlaneInstance, pool_instances, stitch_depth
from slantsweep.sweep import sweep
from slantsweep.synth import render, single_plane_scene

RANGES = {
    "narrow": ((-1.0, 1.0), (-1.0, 1.0), (-1.5, 0.0)),
    "default": ((-2.0, 2.0), (-2.0, 2.0), (-2.0, 0.5)),
    "wide": ((-3.0, 3.0), (-3.0, 3.0), (-3.0, 1.0)),
}


def run(grid, seeds):
    rels, errs = [], []
    t0 = time.perf_counter()
    for seed in seeds:
        spec = single_plane_scene(seed, texture_cell=TEXTURE_CELL)
        pair = render(spec)
        res = sweep(pair.target, pair.source, spec.pose, spec.intrinsics, None, SMALL, grid)
        inst = pool_instances([PlaneInstance(np.ones(pair.depth.shape), 0.9)], res.params)
        d: DepthMap = stitch_depth(inst, res.params, spec.intrinsics)
        rels.append(depth_metrics(d, pair.depth).abs_rel)
        errs.append(np.abs(inst[0].pooled_param - spec.planes[0].p))
    return np.mean(rels), np.mean(errs, axis=0), time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs=2, default=(0, 10))
    ap.add_argument("--counts", type=int, nargs="+", default=[6, 8, 10])
    args = ap.parse_args()
    seeds = range(*args.seeds)

    print(f"{'range':>8} {'count':>5} {'N':>5} {'AbsRel':>8} {'mean |dp| (x, y, z)':>24} {'time':>7}")
    for name, rng in RANGES.items():
        for c in args.counts:
            grid = build_grid(tuple(AxisRange(lo, hi, c) for lo, hi in rng))
            rel, err, t = run(grid, seeds)
            print(f"{name:>8} {c:5d} {c**3:5d} {rel:8.4f} {np.array2string(err, precision=3):>24} {t:6.1f}s")


if __name__ == "__main__":
    main()
