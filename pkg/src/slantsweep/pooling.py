"""Instance-level pooling of plane parameters and planar depth reconstruction."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .geometry import CameraIntrinsics, DepthMap, as_plane, plane_to_depth
from .sweep import PlaneParamMap

FOREGROUND = 0.5


@dataclass(frozen=True)
class PlaneInstance:
    mask: np.ndarray  # soft foreground probabilities in [0, 1]
    score: float
    semantic_label: int | None = None
    pooled_param: np.ndarray | None = None

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=np.float64)
        if mask.ndim != 2 or np.any(mask < 0) or np.any(mask > 1):
            raise ValueError("instance mask must be a 2-D raster with values in [0, 1]")
        if not 0 < self.score < 1:
            raise ValueError(f"instance score must lie in (0, 1), got {self.score}")
        object.__setattr__(self, "mask", mask)
        if self.pooled_param is not None:
            object.__setattr__(self, "pooled_param", as_plane(self.pooled_param))

    @property
    def foreground(self) -> np.ndarray:
        return self.mask > FOREGROUND


def check_instances(instances) -> list[PlaneInstance]:
    instances = list(instances)
    shapes = {inst.mask.shape for inst in instances}
    if len(shapes) > 1:
        raise ValueError(f"instance masks disagree in shape: {sorted(shapes)}")
    return instances


def soft_pool(param_map: PlaneParamMap, mask: np.ndarray) -> np.ndarray:
    """Mask-weighted mean of per-pixel plane parameters over valid pixels."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != param_map.shape:
        raise ValueError("mask and parameter map differ in shape")
    w = np.where(param_map.valid, mask, 0.0)
    total = w.sum()
    if not total > 0:
        raise ValueError("empty instance: mask has no weight on valid pixels")
    # pool deviations from one member so a constant map returns its value exactly
    ref = param_map.params[np.unravel_index(np.argmax(w), w.shape)]
    return ref + np.einsum("hw,hwc->c", w, param_map.params - ref) / total


def pool_instances(instances, param_map: PlaneParamMap) -> list[PlaneInstance]:
    return [replace(inst, pooled_param=soft_pool(param_map, inst.mask)) for inst in check_instances(instances)]


def instance_depth(p_t, mask: np.ndarray, k: CameraIntrinsics, grid=None) -> DepthMap:
    """Planar depth of the pooled plane on pixels with ``mask > 0.5``."""
    d = plane_to_depth(as_plane(p_t), k, grid)
    fg = np.asarray(mask) > FOREGROUND
    return DepthMap(d.values, d.valid & fg)


def stitch_depth(instances, param_map: PlaneParamMap, k: CameraIntrinsics, grid=None) -> DepthMap:
    """Piecewise-planar depth: instance planes where claimed, per-pixel planes elsewhere.

    Overlapping claims go to the highest-scoring instance (ties: earlier in the
    list). Where the winning instance plane yields no valid depth the per-pixel
    plane fills in.
    """
    instances = check_instances(instances)
    pixel = plane_to_depth(np.where(param_map.valid[..., None], param_map.params, 0.0), k, grid)
    pixel = DepthMap(pixel.values, pixel.valid & param_map.valid)
    values = pixel.values.copy()
    valid = pixel.valid.copy()
    owner = np.full(param_map.shape, -1)
    best = np.full(param_map.shape, -np.inf)
    for i, inst in enumerate(instances):
        if inst.pooled_param is None:
            raise ValueError("stitch_depth needs pooled parameters on every instance")
        take = inst.foreground & (inst.score > best)
        owner[take] = i
        best[take] = inst.score
    for i, inst in enumerate(instances):
        d = instance_depth(inst.pooled_param, inst.mask, k, grid)
        win = (owner == i) & d.valid
        values[win] = d.values[win]
        valid[win] = True
    return DepthMap(values, valid)


def soft_pooling_loss(pred: DepthMap, gt: DepthMap) -> float:
    """Mean absolute depth difference over pixels valid in both maps."""
    if pred.shape != gt.shape:
        raise ValueError("depth maps differ in shape")
    both = pred.valid & gt.valid
    if not both.any():
        raise ValueError("no pixel is valid in both depth maps")
    return float(np.mean(np.abs(pred.values[both] - gt.values[both])))


def _normals(params: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(params, axis=-1, keepdims=True)
    return params / np.where(norm > 0, norm, 1.0)


def segment_planes(
    param_map: PlaneParamMap,
    angle_tol: float = 10.0,
    offset_tol: float = 0.1,
    min_area: float | int | None = None,
) -> list[PlaneInstance]:
    """Greedy 4-connected region growing on a plane parameter map.

    A neighbour joins a region when its normal is within ``angle_tol`` degrees
    of the region's running mean normal and its inverse offset ``|p|`` differs
    from the region mean by at most ``offset_tol``. Regions smaller than
    ``min_area`` pixels (default 0.5 % of the image) are dropped.
    """
    H, W = param_map.shape
    min_area = 0.005 * H * W if min_area is None else min_area
    params = param_map.params
    inv_off = np.linalg.norm(params, axis=-1)
    normals = _normals(params)
    cos_tol = np.cos(np.deg2rad(angle_tol))
    label = np.zeros((H, W), dtype=np.int64)
    label[~param_map.valid | (inv_off == 0)] = -1
    regions = []
    next_id = 1
    for y0 in range(H):
        for x0 in range(W):
            if label[y0, x0] != 0:
                continue
            label[y0, x0] = next_id
            n_sum = normals[y0, x0].copy()
            o_sum = inv_off[y0, x0]
            count = 1
            members = [(y0, x0)]
            queue = deque(members)
            while queue:
                y, x = queue.popleft()
                for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                    if not (0 <= ny < H and 0 <= nx < W) or label[ny, nx] != 0:
                        continue
                    mean_n = n_sum / np.linalg.norm(n_sum)
                    if normals[ny, nx] @ mean_n < cos_tol:
                        continue
                    if abs(inv_off[ny, nx] - o_sum / count) > offset_tol:
                        continue
                    label[ny, nx] = next_id
                    n_sum += normals[ny, nx]
                    o_sum += inv_off[ny, nx]
                    count += 1
                    members.append((ny, nx))
                    queue.append((ny, nx))
            if count >= min_area:
                regions.append(next_id)
            next_id += 1
    total = H * W
    out = []
    for rid in regions:
        m = label == rid
        score = float(np.clip(m.sum() / total, 1e-6, 1 - 1e-6))
        out.append(PlaneInstance(m.astype(np.float64), score))
    return out
