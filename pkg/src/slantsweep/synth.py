"""Procedurally textured piecewise-planar scenes rendered by exact ray casting.

A scene is a set of planes in the target frame, each optionally clipped to a
convex polygon expressed in the plane's own 2-D coordinates. Every ray takes
the nearest positive intersection; rays that hit nothing see a flat fronto
far plane. Textures are seeded value noise evaluated in plane coordinates, so
a surface point looks identical from both cameras.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .geometry import CameraIntrinsics, DepthMap, RelativePose, pixel_grid
from .sweep import ImageRaster

FAR_INTENSITY = 0.5
DEFAULT_INTRINSICS = CameraIntrinsics(fx=100.0, fy=100.0, cx=63.5, cy=47.5, width=128, height=96)


@dataclass(frozen=True)
class ScenePlane:
    p: np.ndarray
    polygon: np.ndarray | None = None  # (M, 2) convex, counter-clockwise, plane coordinates
    texture_seed: int = 0

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64).reshape(3)
        if not np.any(p) or not np.all(np.isfinite(p)):
            raise ValueError(f"invalid plane: {p!r}")
        object.__setattr__(self, "p", p)
        if self.polygon is not None:
            poly = np.asarray(self.polygon, dtype=np.float64).reshape(-1, 2)
            if len(poly) < 3 or abs(_signed_area(poly)) < 1e-12:
                raise ValueError("degenerate plane polygon")
            if _signed_area(poly) < 0:
                poly = poly[::-1]
            object.__setattr__(self, "polygon", poly)

    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        """Orthonormal in-plane axes, a deterministic function of ``p``."""
        n = self.p / np.linalg.norm(self.p)
        a = np.array([0.0, 1.0, 0.0]) if abs(n[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
        e1 = np.cross(a, n)
        e1 /= np.linalg.norm(e1)
        return e1, np.cross(n, e1)


@dataclass(frozen=True)
class SceneSpec:
    planes: tuple[ScenePlane, ...]
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS
    pose: RelativePose = field(default_factory=RelativePose.identity)
    source_intrinsics: CameraIntrinsics | None = None
    far_depth: float = 20.0
    texture_cell: float = 0.12
    textureless: bool = False
    supersample: int = 3

    def __post_init__(self):
        object.__setattr__(self, "planes", tuple(self.planes))
        if not self.far_depth > 0:
            raise ValueError("far plane depth must be positive")

    @property
    def k_src(self) -> CameraIntrinsics:
        return self.intrinsics if self.source_intrinsics is None else self.source_intrinsics

    def to_dict(self) -> dict:
        k = self.intrinsics
        d = {
            "planes": [
                {
                    "p": pl.p.tolist(),
                    "polygon": None if pl.polygon is None else pl.polygon.tolist(),
                    "texture_seed": pl.texture_seed,
                }
                for pl in self.planes
            ],
            "intrinsics": [k.fx, k.fy, k.cx, k.cy, k.width, k.height],
            "pose": self.pose.matrix.tolist(),
            "far_depth": self.far_depth,
            "texture_cell": self.texture_cell,
            "textureless": self.textureless,
            "supersample": self.supersample,
        }
        if self.source_intrinsics is not None:
            s = self.source_intrinsics
            d["source_intrinsics"] = [s.fx, s.fy, s.cx, s.cy, s.width, s.height]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        def k(v):
            return CameraIntrinsics(*v[:4], int(v[4]), int(v[5]))

        pose = np.asarray(d["pose"], dtype=np.float64)
        return cls(
            planes=tuple(ScenePlane(pl["p"], pl.get("polygon"), pl.get("texture_seed", 0)) for pl in d["planes"]),
            intrinsics=k(d["intrinsics"]),
            pose=RelativePose(pose[:, :3], pose[:, 3]),
            source_intrinsics=k(d["source_intrinsics"]) if d.get("source_intrinsics") else None,
            far_depth=d.get("far_depth", 20.0),
            texture_cell=d.get("texture_cell", 0.12),
            textureless=d.get("textureless", False),
            supersample=d.get("supersample", 3),
        )


@dataclass(frozen=True)
class RenderedPair:
    target: ImageRaster
    source: ImageRaster
    depth: DepthMap
    ids: np.ndarray  # 0 = far background, j + 1 = plane j
    planes: np.ndarray  # (n, 3) ground-truth p per instance

    def param_map(self) -> np.ndarray:
        """Ground-truth per-pixel plane parameters; background gets the far plane."""
        far = np.array([0.0, 0.0, -1.0 / self.depth.values[self.ids == 0].max()]) if np.any(self.ids == 0) else None
        table = np.vstack([far if far is not None else np.zeros(3), self.planes])
        return table[self.ids]

    def masks(self) -> list[np.ndarray]:
        return [self.ids == j + 1 for j in range(len(self.planes))]


# ----------------------------------------------------------------------------
# texture


def _hash01(ix: np.ndarray, iy: np.ndarray, seed: int) -> np.ndarray:
    # splitmix64 finaliser on a packed lattice key
    with np.errstate(over="ignore"):
        h = ix.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
        h ^= iy.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
        h ^= np.uint64(seed & 0xFFFFFFFF) * np.uint64(0x165667B19E3779F9)
        h ^= h >> np.uint64(30)
        h *= np.uint64(0xBF58476D1CE4E5B9)
        h ^= h >> np.uint64(27)
        h *= np.uint64(0x94D049BB133111EB)
        h ^= h >> np.uint64(31)
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def value_noise(u: np.ndarray, v: np.ndarray, seed: int, cell: float) -> np.ndarray:
    """Smooth lattice value noise in ``[0, 1]`` with lattice spacing ``cell``."""
    x = u / cell
    y = v / cell
    ix = np.floor(x)
    iy = np.floor(y)
    fx = x - ix
    fy = y - iy
    fx = fx * fx * fx * (fx * (fx * 6 - 15) + 10)
    fy = fy * fy * fy * (fy * (fy * 6 - 15) + 10)
    ix = ix.astype(np.int64)
    iy = iy.astype(np.int64)
    c00 = _hash01(ix, iy, seed)
    c10 = _hash01(ix + 1, iy, seed)
    c01 = _hash01(ix, iy + 1, seed)
    c11 = _hash01(ix + 1, iy + 1, seed)
    return (c00 * (1 - fx) + c10 * fx) * (1 - fy) + (c01 * (1 - fx) + c11 * fx) * fy


def plane_texture(uv: np.ndarray, seed: int, cell: float) -> np.ndarray:
    n = 0.65 * value_noise(uv[..., 0], uv[..., 1], seed, cell)
    n += 0.35 * value_noise(uv[..., 0], uv[..., 1], seed + 7919, cell / 2.1)
    return 0.15 + 0.7 * n


# ----------------------------------------------------------------------------
# ray casting


def _signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _inside_convex(poly: np.ndarray, uv: np.ndarray) -> np.ndarray:
    inside = np.ones(uv.shape[:-1], bool)
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        edge = b - a
        rel = uv - a
        inside &= edge[0] * rel[..., 1] - edge[1] * rel[..., 0] >= 0
    return inside


def cast(spec: SceneSpec, origin: np.ndarray, dirs: np.ndarray):
    """Nearest hit per ray; returns ``(lam, index)`` with index -1 for the far plane.

    Rays are ``origin + lam * dirs`` in the target frame.
    """
    best = np.full(dirs.shape[:-1], np.inf)
    idx = np.full(dirs.shape[:-1], -1, dtype=np.int64)
    for j, pl in enumerate(spec.planes):
        denom = dirs @ pl.p
        num = -(1.0 + origin @ pl.p)
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = num / denom
        ok = np.abs(denom) > 1e-15
        ok &= lam > 0
        if pl.polygon is not None:
            X = origin + lam[..., None] * dirs
            e1, e2 = pl.basis()
            uv = np.stack([X @ e1, X @ e2], axis=-1)
            ok &= _inside_convex(pl.polygon, uv)
        closer = ok & (lam < best)
        best = np.where(closer, lam, best)
        idx = np.where(closer, j, idx)
    # fronto far plane z = far_depth
    with np.errstate(divide="ignore", invalid="ignore"):
        lam_far = (spec.far_depth - origin[2]) / dirs[..., 2]
    miss = idx < 0
    best = np.where(miss, lam_far, best)
    return best, idx


def _shade(spec: SceneSpec, origin, dirs, lam, idx) -> np.ndarray:
    X = origin + lam[..., None] * dirs
    out = np.full(lam.shape, FAR_INTENSITY)
    if spec.textureless:
        return np.where(idx >= 0, FAR_INTENSITY, out)
    for j, pl in enumerate(spec.planes):
        sel = idx == j
        if not sel.any():
            continue
        e1, e2 = pl.basis()
        uv = np.stack([X[sel] @ e1, X[sel] @ e2], axis=-1)
        out[sel] = plane_texture(uv, pl.texture_seed, spec.texture_cell)
    return out


def _render_view(spec: SceneSpec, k: CameraIntrinsics, origin: np.ndarray, to_target: np.ndarray) -> np.ndarray:
    ss = spec.supersample
    offs = (np.arange(ss) + 0.5) / ss - 0.5
    grid = pixel_grid(k)
    acc = np.zeros(k.shape)
    for dv in offs:
        for du in offs:
            g = grid + np.array([du, dv, 0.0])
            dirs = (g @ k.K_inv.T) @ to_target.T
            lam, idx = cast(spec, origin, dirs)
            acc += _shade(spec, origin, dirs, lam, idx)
    return acc / (ss * ss)


def render(spec: SceneSpec) -> RenderedPair:
    if not spec.planes:
        raise ValueError("scene has no planes")
    k = spec.intrinsics
    zero = np.zeros(3)
    rays = pixel_grid(k) @ k.K_inv.T
    lam, idx = cast(spec, zero, rays)
    depth = DepthMap(lam, np.isfinite(lam) & (lam > 0))
    tgt = _render_view(spec, k, zero, np.eye(3))
    # source camera centre and axes expressed in the target frame
    R, t = spec.pose.R, spec.pose.t
    src = _render_view(spec, spec.k_src, -R.T @ t, R.T)
    planes = np.array([pl.p for pl in spec.planes])
    return RenderedPair(ImageRaster(tgt), ImageRaster(src), depth, idx + 1, planes)


def add_noise(img: ImageRaster, sigma: float, rng: np.random.Generator) -> ImageRaster:
    noisy = np.clip(img.values + rng.normal(0.0, sigma, img.shape), 0.0, 1.0)
    return ImageRaster(noisy, img.valid)


# ----------------------------------------------------------------------------
# sampling


def _corner_rays(k: CameraIntrinsics) -> np.ndarray:
    c = np.array([[0, 0, 1], [k.width - 1, 0, 1], [0, k.height - 1, 1], [k.width - 1, k.height - 1, 1]], float)
    return c @ k.K_inv.T


def sample_pose(
    rng: np.random.Generator, t_range=(0.05, 0.15), max_rot_deg: float = 3.0, max_forward: float = 0.3
) -> RelativePose:
    """Random pose; ``max_forward`` caps the optical-axis share of the translation direction."""
    az = rng.uniform(0, 2 * np.pi)
    dz = rng.uniform(-max_forward, max_forward)
    d = np.array([np.cos(az) * np.sqrt(1 - dz * dz), np.sin(az) * np.sqrt(1 - dz * dz), dz])
    t = d * rng.uniform(*t_range)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    R = Rotation.from_rotvec(axis * np.deg2rad(rng.uniform(0, max_rot_deg))).as_matrix()
    # re-orthonormalise so the pose validator's 1e-9 tolerance holds
    u, _, vt = np.linalg.svd(R)
    return RelativePose(u @ vt, t)


def sample_scene(
    rng_seed: int,
    n_planes: int = 3,
    slant_range: tuple[float, float] = (0.0, 40.0),
    distance_range: tuple[float, float] = (1.2, 2.5),
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS,
    min_area_frac: float = 0.08,
    min_pair_angle: float = 20.0,
    max_depth: float = 8.0,
    textureless: bool = False,
    texture_cell: float = 0.12,
    max_tries: int = 1000,
) -> SceneSpec:
    """Random convex "room" of unbounded planes around the camera.

    Each plane normal is tilted from the optical axis by an angle drawn from
    ``slant_range`` (degrees) and every plane is hit by every target ray, so
    the visible surface is the inner hull of the planes: fully covered, with
    no occlusion between the two views. Draws are rejected until every plane
    covers at least ``min_area_frac`` of the image.
    """
    if n_planes < 1:
        raise ValueError("n_planes must be >= 1")
    rng = np.random.default_rng(rng_seed)
    corners = _corner_rays(intrinsics)
    rays = pixel_grid(intrinsics) @ intrinsics.K_inv.T
    for _ in range(max_tries):
        pose = sample_pose(rng)
        planes = []
        normals = []
        for j in range(n_planes):
            for _ in range(max_tries):
                tilt = np.deg2rad(rng.uniform(*slant_range))
                azim = rng.uniform(0, 2 * np.pi)
                m = np.array([np.sin(tilt) * np.cos(azim), np.sin(tilt) * np.sin(azim), np.cos(tilt)])
                dist = rng.uniform(*distance_range)
                p = -m / dist
                if np.max(corners @ p) >= -1.0 / max_depth:
                    continue
                if any(np.degrees(np.arccos(np.clip(m @ q, -1, 1))) < min_pair_angle for q in normals):
                    continue
                planes.append(ScenePlane(p, None, int(rng.integers(0, 2**31))))
                normals.append(m)
                break
        if len(planes) < n_planes:
            continue
        spec = SceneSpec(
            tuple(planes), intrinsics, pose, textureless=textureless, texture_cell=texture_cell
        )
        _, idx = cast(spec, np.zeros(3), rays)
        counts = np.bincount(idx.ravel() + 1, minlength=n_planes + 1)
        if counts[0] == 0 and np.all(counts[1:] >= min_area_frac * idx.size):
            return spec
    raise RuntimeError(f"could not sample a valid scene for seed {rng_seed}")


def single_plane_scene(rng_seed: int, slant_range=(10.0, 45.0), **kw) -> SceneSpec:
    return sample_scene(rng_seed, 1, slant_range, **kw)
