"""Fronto-parallel depth sweep and least-squares plane fitting baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CameraIntrinsics, DepthMap, RelativePose, depth_homography, depth_to_points
from .pooling import FOREGROUND
from .sweep import (
    ImageRaster,
    PlaneParamMap,
    SweepConfig,
    aggregate_cost,
    bilinear_weights,
    build_cost_volume,
    convex_upsample,
    cost_to_probability,
)

RANK_TOL = 1e-9


@dataclass(frozen=True)
class DepthHypothesisSet:
    depths: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.depths, dtype=np.float64).reshape(-1)
        if len(d) < 2 or np.any(d <= 0) or np.any(np.diff(d) <= 0):
            raise ValueError("depth hypotheses must be positive and strictly increasing")
        d.setflags(write=False)
        object.__setattr__(self, "depths", d)

    def __len__(self) -> int:
        return len(self.depths)

    @property
    def bounds(self) -> tuple[float, float]:
        return float(self.depths[0]), float(self.depths[-1])

    @classmethod
    def inverse_uniform(cls, d_min: float = 0.25, d_max: float = 10.0, count: int = 128) -> "DepthHypothesisSet":
        if not 0 < d_min < d_max:
            raise ValueError(f"need 0 < d_min < d_max, got {d_min}, {d_max}")
        inv = np.linspace(1.0 / d_max, 1.0 / d_min, count)
        return cls(np.sort(1.0 / inv))


@dataclass(frozen=True)
class FrontoResult:
    depth: DepthMap
    inverse_depth: np.ndarray  # full resolution
    prob: np.ndarray  # (N, h, w)


def fronto_sweep(
    tgt: ImageRaster,
    src: ImageRaster,
    pose: RelativePose,
    k_tgt: CameraIntrinsics,
    k_src: CameraIntrinsics | None = None,
    depths: DepthHypothesisSet | None = None,
    config: SweepConfig = SweepConfig(),
    weights: np.ndarray | None = None,
) -> FrontoResult:
    """Conventional depth sweep through the same cost, aggregation and softmax.

    The soft-argmax runs over inverse depth, the quantity a fronto plane
    ``(0, 0, -1/d)`` carries, and is upsampled with the same convex stencils.
    """
    depths = DepthHypothesisSet.inverse_uniform() if depths is None else depths
    k_src = k_tgt if k_src is None else k_src
    kt, ks = k_tgt.downsample(config.scale), k_src.downsample(config.scale)
    Hs = np.stack([depth_homography(d, pose, kt, ks) for d in depths.depths])
    vol = build_cost_volume(
        tgt,
        src,
        None,
        pose,
        k_tgt,
        k_src,
        window=config.window,
        scale=config.scale,
        threads=config.threads,
        homographies=Hs,
    )
    U = cost_to_probability(aggregate_cost(vol, config.radius), config.temperature)
    inv = np.einsum("nhw,n->hw", U.prob, 1.0 / depths.depths)
    h, w = inv.shape
    coarse = PlaneParamMap(np.stack([np.zeros_like(inv), np.zeros_like(inv), -inv], axis=-1), U.valid)
    weights = bilinear_weights(h, w, config.scale) if weights is None else weights
    fine = convex_upsample(coarse, weights, config.scale)
    inv_fine = -fine.params[..., 2]
    with np.errstate(divide="ignore"):
        depth = DepthMap(np.where(fine.valid, 1.0 / inv_fine, 0.0), fine.valid)
    return FrontoResult(depth, inv_fine, U.prob)


def fit_plane_lsq(depth: DepthMap, mask: np.ndarray, k: CameraIntrinsics, grid=None) -> np.ndarray:
    """Least-squares plane ``p`` minimising ``sum (p^T X + 1)^2`` over foreground points.

    Raises ``ValueError("degenerate plane fit")`` when the back-projected
    points do not span 3-D (collinear points, or a plane through the camera
    centre, where ``p`` is unbounded).
    """
    fg = np.asarray(mask) > FOREGROUND
    X = depth_to_points(depth, k, fg)
    if len(X) < 3:
        raise ValueError("degenerate plane fit: fewer than 3 points")
    s = np.linalg.svd(X, compute_uv=False)
    if s[-1] <= RANK_TOL * s[0]:
        raise ValueError("degenerate plane fit: points do not span three dimensions")
    A = X.T @ X
    b = -X.sum(axis=0)
    return np.linalg.solve(A, b)


def fit_plane_residual(depth: DepthMap, mask: np.ndarray, k: CameraIntrinsics, p) -> float:
    X = depth_to_points(depth, k, np.asarray(mask) > FOREGROUND)
    return float(np.sum((X @ np.asarray(p) + 1.0) ** 2))
