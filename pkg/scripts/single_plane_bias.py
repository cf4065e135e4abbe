"""Where the single-plane depth error comes from.

For each scene this compares the soft-argmax plane with the hard argmin of the
aggregated cost and reports how far each lands from the truth. It also
reports the best AbsRel any single grid hypothesis can reach (the
quantisation floor of a hard pick). It also measures the error's projection onto the direction from the truth to the
grid centroid. A positive share means the soft-argmax is pulled toward the
middle of the hypothesis hull.

    python scripts/single_plane_bias.py --seeds 0 20
"""

import argparse

import numpy as np

from _common import SMALL, TEXTURE_CELL
from slantsweep.geometry import plane_to_depth
from slantsweep.hypotheses import default_grid
from slantsweep.metrics import depth_metrics
from slantsweep.pooling import soft_pool
from slantsweep.sweep import sweep
from slantsweep.synth import render, single_plane_scene


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs=2, default=(0, 20))
    args = ap.parse_args()
    g = default_grid()
    centroid = g.hypotheses.mean(axis=0)

    print(f"{'seed':>5} {'soft AbsRel':>11} {'argmin AbsRel':>13} {'best grid':>9} {'valid':>6} {'toward centroid':>15}")
    for seed in range(*args.seeds):
        spec = single_plane_scene(seed, texture_cell=TEXTURE_CELL)
        pair = render(spec)
        k = spec.intrinsics
        p_gt = spec.planes[0].p
        res = sweep(pair.target, pair.source, spec.pose, k, None, SMALL)
        full = np.ones(pair.depth.shape)
        p_soft = soft_pool(res.params, full)
        cost = np.where(res.cost.valid, res.cost.cost, np.inf).reshape(len(g.hypotheses), -1)
        seen = np.isfinite(cost).any(axis=0)
        votes = np.bincount(cost[:, seen].argmin(axis=0), minlength=len(g.hypotheses))
        p_hard = g.hypotheses[votes.argmax()]
        soft = depth_metrics(plane_to_depth(p_soft, k), pair.depth).abs_rel
        hard = depth_metrics(plane_to_depth(p_hard, k), pair.depth).abs_rel
        best = min(depth_metrics(plane_to_depth(h, k), pair.depth).abs_rel for h in g.hypotheses
                   if plane_to_depth(h, k).valid.any())
        to_c = centroid - p_gt
        share = float((p_soft - p_gt) @ to_c / max(to_c @ to_c, 1e-12))
        print(f"{seed:5d} {soft:11.4f} {hard:13.4f} {best:9.4f} {res.prob.valid.mean():6.3f} {share:15.3f}")


if __name__ == "__main__":
    main()
