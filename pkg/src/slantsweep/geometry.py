"""Cameras, plane parameters, induced homographies and plane <-> depth conversion.

Conventions used throughout the package:

* Pixel centres sit at integer coordinates. Pixel ``(u, v)`` covers
  ``[u - 0.5, u + 0.5) x [v - 0.5, v + 0.5)``.
* A plane is ``n^T X + e = 0`` in the target camera frame and is stored as
  ``p = n / e``, so every point on it satisfies ``p^T X = -1``. Planes in front
  of the camera have ``p^T K^-1 x < 0`` along the viewing ray.
* A :class:`RelativePose` maps target-frame points into the source frame,
  ``X_src = R X_tgt + t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RAY_EPS = 1e-12


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got {self.fx}, {self.fy}")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("image size must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(f"principal point ({self.cx}, {self.cy}) outside image")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def K_inv(self) -> np.ndarray:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    def downsample(self, factor: int) -> "CameraIntrinsics":
        """Intrinsics of the image block-averaged by ``factor``.

        Under the pixel-centre convention a fine coordinate ``u`` maps to the
        coarse coordinate ``(u + 0.5) / factor - 0.5``.
        """
        if factor == 1:
            return self
        if self.width % factor or self.height % factor:
            raise ValueError(f"image size {self.width}x{self.height} not divisible by {factor}")
        return CameraIntrinsics(
            fx=self.fx / factor,
            fy=self.fy / factor,
            cx=(self.cx + 0.5) / factor - 0.5,
            cy=(self.cy + 0.5) / factor - 0.5,
            width=self.width // factor,
            height=self.height // factor,
        )


@dataclass(frozen=True)
class RelativePose:
    """Rigid transform taking target-frame points to the source frame."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9, rtol=0):
            raise ValueError("R is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("R is not a proper rotation")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls) -> "RelativePose":
        return cls(np.eye(3), np.zeros(3))

    @property
    def matrix(self) -> np.ndarray:
        """3x4 ``[R | t]``."""
        return np.hstack([self.R, self.t[:, None]])

    def compose(self, other: "RelativePose") -> "RelativePose":
        """``self`` applied after ``other``."""
        return RelativePose(self.R @ other.R, self.R @ other.t + self.t)

    def inverse(self) -> "RelativePose":
        return RelativePose(self.R.T, -self.R.T @ self.t)


@dataclass(frozen=True)
class DepthMap:
    """Depth raster plus validity; invalid entries hold 0."""

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if values.shape != valid.shape or values.ndim != 2:
            raise ValueError("depth values and validity must be matching 2-D rasters")
        valid = valid & np.isfinite(values) & (values > 0)
        values = np.where(valid, values, 0.0)
        values.setflags(write=False)
        valid.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)

    @classmethod
    def from_values(cls, values: np.ndarray) -> "DepthMap":
        """Validity implied by ``value > 0`` (the on-disk convention)."""
        values = np.asarray(values, dtype=np.float64)
        return cls(values, np.isfinite(values) & (values > 0))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def as_plane(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (3,) or not np.all(np.isfinite(p)) or not np.any(p):
        raise ValueError(f"invalid plane: {p!r}")
    return p


def plane_from_normal_offset(n, e: float) -> np.ndarray:
    """``p = n / e`` for the plane ``n^T X + e = 0``."""
    if e == 0:
        raise ValueError("invalid plane: zero offset (plane through the optical centre)")
    return as_plane(np.asarray(n, dtype=np.float64) / e)


def pixel_grid(k: CameraIntrinsics) -> np.ndarray:
    """Homogeneous pixel-centre coordinates, shape ``(H, W, 3)``."""
    v, u = np.mgrid[0 : k.height, 0 : k.width].astype(np.float64)
    return np.stack([u, v, np.ones_like(u)], axis=-1)


def pixel_rays(k: CameraIntrinsics, grid: np.ndarray | None = None) -> np.ndarray:
    """``K^-1 x`` for every pixel; the z component is 1."""
    if grid is None:
        grid = pixel_grid(k)
    return grid @ k.K_inv.T


def normalize_homography(H: np.ndarray) -> np.ndarray:
    H = np.asarray(H, dtype=np.float64)
    s = H[..., 2, 2]
    ok = np.abs(s) > 1e-12
    scale = np.where(ok, s, 1.0)
    return H / scale[..., None, None]


def induce_homography(
    p, pose: RelativePose, k_tgt: CameraIntrinsics, k_src: CameraIntrinsics | None = None
) -> np.ndarray:
    """Homography mapping target pixels to source pixels for points on plane ``p``.

    ``H = K_src (R - t p^T) K_tgt^-1``, normalised so that ``H[2, 2] = 1``.
    ``p`` may also be an ``(N, 3)`` stack, giving ``(N, 3, 3)``.
    """
    k_src = k_tgt if k_src is None else k_src
    P = np.asarray(p, dtype=np.float64)
    if P.ndim == 1:
        P = as_plane(P)
    elif not np.all(np.any(P != 0, axis=-1)) or not np.all(np.isfinite(P)):
        raise ValueError("invalid plane in hypothesis stack")
    M = pose.R - pose.t[:, None] * P[..., None, :]
    return normalize_homography(k_src.K @ M @ k_tgt.K_inv)


def depth_homography(
    depth: float, pose: RelativePose, k_tgt: CameraIntrinsics, k_src: CameraIntrinsics | None = None
) -> np.ndarray:
    """Conventional fronto-parallel sweep homography for the plane ``z = depth``.

    Built by composing back-projection at ``depth``, the rigid transform and the
    source projection, independently of :func:`induce_homography`.
    """
    if not depth > 0:
        raise ValueError("sweep depth must be positive")
    k_src = k_tgt if k_src is None else k_src
    # x_src ~ K_src (R * depth * K^-1 x + t * (e3^T K^-1 x)); e3^T K^-1 x == 1
    back = depth * k_tgt.K_inv
    lift = np.outer(pose.t, k_tgt.K_inv[2])
    return normalize_homography(k_src.K @ (pose.R @ back + lift))


def ray_plane_dot(p, k: CameraIntrinsics, grid: np.ndarray | None = None) -> np.ndarray:
    """``p^T K^-1 x`` per pixel; ``p`` may be a single plane or an ``(H, W, 3)`` map."""
    rays = pixel_rays(k, grid)
    return np.einsum("...i,...i->...", rays, np.asarray(p, dtype=np.float64))


def plane_to_depth(p, k: CameraIntrinsics, grid: np.ndarray | None = None) -> DepthMap:
    """Per-pixel depth ``-1 / (p^T K^-1 x)``.

    Rays parallel to the plane or meeting it behind the camera are invalid.
    Accepts a single plane or a per-pixel ``(H, W, 3)`` parameter map.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim == 1:
        p = as_plane(p)
    dot = ray_plane_dot(p, k, grid)
    valid = dot < -RAY_EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        depth = np.where(valid, -1.0 / np.where(valid, dot, -1.0), 0.0)
    return DepthMap(depth, valid)


def depth_to_point(k: CameraIntrinsics, pixel, depth) -> np.ndarray:
    """Back-project pixel(s) ``(u, v)`` at ``depth`` into the camera frame."""
    depth = np.asarray(depth, dtype=np.float64)
    if np.any(~(depth > 0)):
        raise ValueError("depth must be positive for back-projection")
    pixel = np.asarray(pixel, dtype=np.float64)
    x = np.concatenate([pixel, np.ones(pixel.shape[:-1] + (1,))], axis=-1)
    return depth[..., None] * (x @ k.K_inv.T)


def depth_to_points(depth: DepthMap, k: CameraIntrinsics, mask: np.ndarray | None = None) -> np.ndarray:
    """Back-project every valid (and masked) pixel, shape ``(M, 3)``."""
    sel = depth.valid if mask is None else depth.valid & mask
    v, u = np.nonzero(sel)
    return depth_to_point(k, np.stack([u, v], axis=-1).astype(np.float64), depth.values[sel])
