"""Helpers shared by the experiment scripts."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from slantsweep.baselines import DepthHypothesisSet, fit_plane_lsq, fronto_sweep
from slantsweep.geometry import DepthMap, plane_to_depth
from slantsweep.pooling import PlaneInstance, pool_instances, stitch_depth
from slantsweep.sweep import PlaneParamMap, SweepConfig, sweep

# settings used by the acceptance suite for the 128x96 renders
SMALL = SweepConfig(window=7, radius=12, temperature=0.05, scale=1)
TEXTURE_CELL = 0.15


def gt_instances(pair):
    return [PlaneInstance(m.astype(np.float64), 0.9 - 0.1 * i) for i, m in enumerate(pair.masks())]


def slanted_depth(spec, pair, cfg=SMALL, grid=None, tgt=None, src=None):
    """Stitched depth from the slanted sweep with ground-truth instance masks."""
    tgt = pair.target if tgt is None else tgt
    src = pair.source if src is None else src
    res = sweep(tgt, src, spec.pose, spec.intrinsics, None, cfg, grid)
    inst = pool_instances(gt_instances(pair), res.params)
    return stitch_depth(inst, res.params, spec.intrinsics), res


def per_pixel_depth(res, k) -> DepthMap:
    d = plane_to_depth(np.where(res.params.valid[..., None], res.params.params, [0, 0, -1.0]), k)
    return DepthMap(d.values, d.valid & res.params.valid)


def fronto_lsq_depth(spec, pair, cfg=SMALL, depths=None) -> DepthMap:
    """Depth sweep, then a least-squares plane per ground-truth instance."""
    depths = DepthHypothesisSet.inverse_uniform() if depths is None else depths
    k = spec.intrinsics
    fr = fronto_sweep(pair.target, pair.source, spec.pose, k, None, depths, cfg)
    fitted = []
    for inst in gt_instances(pair):
        try:
            fitted.append(replace(inst, pooled_param=fit_plane_lsq(fr.depth, inst.mask, k)))
        except ValueError:
            pass
    inv = np.where(fr.depth.valid, 1.0 / np.where(fr.depth.valid, fr.depth.values, 1.0), 0.0)
    pm = PlaneParamMap(np.stack([0 * inv, 0 * inv, -inv], axis=-1), fr.depth.valid)
    return stitch_depth(fitted, pm, k)
