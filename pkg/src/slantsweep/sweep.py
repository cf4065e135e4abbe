"""Slanted plane sweep: warping, matching cost, probability volume and soft-argmax."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter1d

from .geometry import CameraIntrinsics, RelativePose, induce_homography
from .hypotheses import HypothesisGrid, default_grid

TEXTURELESS_VAR = 1e-8
NEUTRAL_COST = 1.0
CHUNK = 32
BORDER_TOL = 1e-9


@dataclass(frozen=True)
class ImageRaster:
    """Grayscale intensities in ``[0, 1]`` with a validity raster."""

    values: np.ndarray
    valid: np.ndarray = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 3:
            if values.shape[-1] == 1:
                values = values[..., 0]
            else:
                raise ValueError("ImageRaster holds a single channel; convert colour with io.to_gray")
        valid = np.ones(values.shape, bool) if self.valid is None else np.asarray(self.valid, bool)
        if valid.shape != values.shape:
            raise ValueError("validity raster does not match image")
        valid = valid & np.isfinite(values)
        values = np.where(valid, values, 0.0)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class CostVolume:
    cost: np.ndarray  # (N, h, w), lower is better
    valid: np.ndarray  # (N, h, w)

    @property
    def shape(self):
        return self.cost.shape


@dataclass(frozen=True)
class ProbabilityVolume:
    prob: np.ndarray  # (N, h, w), sums to 1 over N
    valid: np.ndarray  # (h, w), False where no slice was valid


@dataclass(frozen=True)
class PlaneParamMap:
    params: np.ndarray  # (h, w, 3)
    valid: np.ndarray  # (h, w)

    @property
    def shape(self) -> tuple[int, int]:
        return self.valid.shape


@dataclass(frozen=True)
class SweepConfig:
    window: int = 7
    radius: int = 2
    temperature: float = 0.05
    scale: int = 4
    threads: int = 1

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"matching window must be a positive odd integer, got {self.window}")
        if self.radius < 0:
            raise ValueError("aggregation radius must be >= 0")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.scale not in (1, 2, 4, 8):
            raise ValueError(f"working scale must be one of 1, 2, 4, 8, got {self.scale}")


@dataclass(frozen=True)
class SweepResult:
    params: PlaneParamMap  # full resolution
    coarse: PlaneParamMap  # working resolution
    prob: ProbabilityVolume
    cost: CostVolume = field(repr=False)


# ----------------------------------------------------------------------------
# raster helpers


def box_sum(a: np.ndarray, radius: int) -> np.ndarray:
    """Sum over a ``(2r+1)^2`` window on the last two axes, truncated at borders."""
    out = np.asarray(a, dtype=np.float64)
    if radius == 0:
        return out.copy()
    size = 2 * radius + 1
    for axis in (-2, -1):
        # zero padding turns the running mean into a truncated sum
        out = uniform_filter1d(out, size, axis=axis, mode="constant") * size
    return out


def downsample(img: ImageRaster, factor: int) -> ImageRaster:
    """Block average; a coarse pixel is valid only if its whole block is."""
    if factor == 1:
        return img
    H, W = img.shape
    if H % factor or W % factor:
        raise ValueError(f"image {W}x{H} not divisible by working scale {factor}")
    h, w = H // factor, W // factor
    vals = img.values.reshape(h, factor, w, factor).mean(axis=(1, 3))
    valid = img.valid.reshape(h, factor, w, factor).all(axis=(1, 3))
    return ImageRaster(vals, valid)


def _bilinear(values: np.ndarray, valid: np.ndarray, x: np.ndarray, y: np.ndarray):
    H, W = values.shape
    # rounding in H must not push a border sample out of the image
    tol = BORDER_TOL
    inside = (x >= -tol) & (x <= W - 1 + tol) & (y >= -tol) & (y <= H - 1 + tol)
    xc = np.clip(x, 0, W - 1)
    yc = np.clip(y, 0, H - 1)
    x0 = np.minimum(np.floor(xc).astype(np.intp), W - 1)
    y0 = np.minimum(np.floor(yc).astype(np.intp), H - 1)
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    ax = xc - x0
    ay = yc - y0
    w00, w01, w10, w11 = (1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay
    out = values[y0, x0] * w00 + values[y0, x1] * w01 + values[y1, x0] * w10 + values[y1, x1] * w11
    # only corners that carry weight need to be valid
    ok = inside
    for w, yy, xx in ((w00, y0, x0), (w01, y0, x1), (w10, y1, x0), (w11, y1, x1)):
        ok = ok & (valid[yy, xx] | (w == 0))
    return np.where(ok, out, 0.0), ok


def _warp_coords(H: np.ndarray, shape: tuple[int, int]):
    h, w = shape
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    pts = np.stack([u, v, np.ones_like(u)], axis=0).reshape(3, -1)
    m = np.asarray(H) @ pts  # (..., 3, h*w)
    z = m[..., 2, :]
    front = z > 1e-12
    zs = np.where(front, z, 1.0)
    x = np.where(front, m[..., 0, :] / zs, -1.0)
    y = np.where(front, m[..., 1, :] / zs, -1.0)
    lead = np.asarray(H).shape[:-2]
    return x.reshape(lead + (h, w)), y.reshape(lead + (h, w))


def warp_source(src: ImageRaster, H: np.ndarray, out_shape: tuple[int, int] | None = None) -> ImageRaster:
    """Sample ``src`` at ``H x`` for every target pixel centre ``x`` (bilinear).

    Samples that land outside ``src`` are invalid rather than clamped.
    """
    out_shape = src.shape if out_shape is None else out_shape
    x, y = _warp_coords(H, out_shape)
    vals, ok = _bilinear(src.values, src.valid, x, y)
    return ImageRaster(vals, ok)


def _warp_stack(src: ImageRaster, Hs: np.ndarray, out_shape):
    x, y = _warp_coords(Hs, out_shape)
    return _bilinear(src.values, src.valid, x, y)


# ----------------------------------------------------------------------------
# matching cost


def _target_stats(a, a_valid, r):
    a = np.where(a_valid, a, 0.0)
    n = box_sum(np.ones(a.shape[-2:]), r)
    ma = box_sum(a, r) / n
    va = box_sum(a * a, r) / n - ma * ma
    return a, n, ma, va


def _zncc_cost(a, a_valid, b, b_valid, window: int, stats=None):
    r = window // 2
    a, n, ma, va = _target_stats(a, a_valid, r) if stats is None else stats
    bad = box_sum(~(a_valid & b_valid), r) > 0.5
    b = np.where(b_valid, b, 0.0)
    mb = box_sum(b, r) / n
    vb = box_sum(b * b, r) / n - mb * mb
    cov = box_sum(a * b, r) / n - ma * mb
    flat = (va < TEXTURELESS_VAR) | (vb < TEXTURELESS_VAR)
    denom = np.sqrt(np.where(flat, 1.0, va * vb))
    zncc = np.clip(np.where(flat, 0.0, cov / denom), -1.0, 1.0)
    valid = ~bad
    return np.where(valid, 1.0 - zncc, NEUTRAL_COST), valid


def matching_cost(tgt: ImageRaster, warped: ImageRaster, window: int = 7):
    """``1 - ZNCC`` over a square window; returns ``(cost, valid)``.

    Windows are truncated at the raster border. A cell is invalid if its window
    touches an invalid pixel of either image. Textureless windows (variance
    below ``TEXTURELESS_VAR``) get the neutral cost 1.
    """
    if tgt.shape != warped.shape:
        raise ValueError(f"dimension mismatch: {tgt.shape} vs {warped.shape}")
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd integer")
    return _zncc_cost(tgt.values, tgt.valid, warped.values, warped.valid, window)


def _hypotheses(grid) -> np.ndarray:
    if isinstance(grid, HypothesisGrid):
        return grid.hypotheses
    return np.asarray(grid, dtype=np.float64).reshape(-1, 3)


def build_cost_volume(
    tgt: ImageRaster,
    src: ImageRaster,
    grid,
    pose: RelativePose,
    k_tgt: CameraIntrinsics,
    k_src: CameraIntrinsics | None = None,
    window: int = 7,
    scale: int = 1,
    threads: int = 1,
    homographies: np.ndarray | None = None,
) -> CostVolume:
    """Cost of every hypothesis at working resolution ``H/scale x W/scale``.

    Images are block-averaged by ``scale`` and the intrinsics rescaled to
    match before warping. ``homographies`` (``(N, 3, 3)``, already at working
    resolution) bypasses plane-induced homographies; used by the depth sweep.
    """
    k_src = k_tgt if k_src is None else k_src
    if tgt.shape != k_tgt.shape or src.shape != k_src.shape:
        raise ValueError("image size does not match intrinsics")
    tgt_c = downsample(tgt, scale)
    src_c = downsample(src, scale)
    if homographies is None:
        Hs = induce_homography(_hypotheses(grid), pose, k_tgt.downsample(scale), k_src.downsample(scale))
    else:
        Hs = np.asarray(homographies, dtype=np.float64)
    shape = tgt_c.shape

    stats = _target_stats(tgt_c.values, tgt_c.valid, window // 2)

    def run(chunk):
        vals, ok = _warp_stack(src_c, chunk, shape)
        return _zncc_cost(tgt_c.values, tgt_c.valid, vals, ok, window, stats)

    # small chunks keep the working set in cache
    chunks = np.array_split(Hs, max(threads, -(-len(Hs) // CHUNK)))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    cost = np.concatenate([p[0] for p in parts])
    valid = np.concatenate([p[1] for p in parts])
    return CostVolume(cost, valid)


def aggregate_cost(vol: CostVolume, radius: int = 2) -> CostVolume:
    """Masked box mean of each slice; invalid cells neither contribute nor change."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return vol
    w = vol.valid.astype(np.float64)
    num = box_sum(np.where(vol.valid, vol.cost, 0.0), radius)
    den = box_sum(w, radius)
    agg = np.where(vol.valid, num / np.where(den > 0, den, 1.0), vol.cost)
    return CostVolume(agg, vol.valid)


def cost_to_probability(vol: CostVolume, temperature: float = 0.05) -> ProbabilityVolume:
    """Softmax of ``-cost / temperature`` over valid hypotheses."""
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    logits = np.where(vol.valid, -vol.cost / temperature, -np.inf)
    any_valid = vol.valid.any(axis=0)
    top = np.where(any_valid, logits.max(axis=0), 0.0)
    e = np.where(vol.valid, np.exp(logits - top), 0.0)
    z = e.sum(axis=0)
    n = vol.cost.shape[0]
    prob = np.where(any_valid, e / np.where(any_valid, z, 1.0), 1.0 / n)
    return ProbabilityVolume(prob, any_valid)


def soft_argmax(U: ProbabilityVolume, grid) -> PlaneParamMap:
    """Probability-weighted mean hypothesis per pixel."""
    hyps = _hypotheses(grid)
    if U.prob.shape[0] != len(hyps):
        raise ValueError("probability volume and hypothesis set disagree in size")
    params = np.einsum("nhw,nc->hwc", U.prob, hyps)
    return PlaneParamMap(params, U.valid.copy())


# ----------------------------------------------------------------------------
# convex upsampling


def bilinear_weights(h: int, w: int, factor: int) -> np.ndarray:
    """Convex-upsampling stencils reproducing bilinear interpolation.

    Shape ``(h, w, factor, factor, 3, 3)``. Fine pixel ``(a, b)`` of coarse
    cell ``(i, j)`` sits at coarse offset ``(a + 0.5) / factor - 0.5``.
    """
    o = (np.arange(factor) + 0.5) / factor - 0.5
    w1 = np.zeros((factor, 3))
    w1[:, 0] = np.maximum(-o, 0)
    w1[:, 2] = np.maximum(o, 0)
    w1[:, 1] = 1 - np.abs(o)
    stencil = np.einsum("ak,bl->abkl", w1, w1)
    return np.broadcast_to(stencil, (h, w, factor, factor, 3, 3)).copy()


def nearest_weights(h: int, w: int, factor: int) -> np.ndarray:
    out = np.zeros((h, w, factor, factor, 3, 3))
    out[..., 1, 1] = 1.0
    return out


def convex_upsample(coarse: PlaneParamMap, weights: np.ndarray, factor: int) -> PlaneParamMap:
    """Each fine pixel is a convex combination of its 3x3 coarse neighbourhood.

    Borders replicate the edge values. A fine pixel is invalid if any
    neighbour carrying positive weight is invalid.
    """
    h, w = coarse.shape
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (h, w, factor, factor, 3, 3):
        raise ValueError(f"weights must have shape {(h, w, factor, factor, 3, 3)}, got {weights.shape}")
    if np.any(weights < 0) or not np.allclose(weights.sum(axis=(-2, -1)), 1.0, atol=1e-6, rtol=0):
        raise ValueError("upsampling weights must be nonnegative and sum to 1 per stencil")
    pad = np.pad(coarse.params, ((1, 1), (1, 1), (0, 0)), mode="edge")
    vpad = np.pad(coarse.valid, 1, mode="edge")
    # neighbours[i, j, dy, dx, c]
    nb = np.stack([np.stack([pad[dy : dy + h, dx : dx + w] for dx in range(3)], axis=2) for dy in range(3)], axis=2)
    nv = np.stack([np.stack([vpad[dy : dy + h, dx : dx + w] for dx in range(3)], axis=2) for dy in range(3)], axis=2)
    fine = np.einsum("ijabkl,ijklc->iajbc", weights, nb).reshape(h * factor, w * factor, 3)
    bad = np.einsum("ijabkl,ijkl->iajb", (weights > 0).astype(float), (~nv).astype(float)) > 0
    return PlaneParamMap(fine, ~bad.reshape(h * factor, w * factor))


# ----------------------------------------------------------------------------
# pipeline


def sweep(
    tgt: ImageRaster,
    src: ImageRaster,
    pose: RelativePose,
    k_tgt: CameraIntrinsics,
    k_src: CameraIntrinsics | None = None,
    config: SweepConfig = SweepConfig(),
    grid=None,
    weights: np.ndarray | None = None,
) -> SweepResult:
    grid = default_grid() if grid is None else grid
    vol = build_cost_volume(
        tgt, src, grid, pose, k_tgt, k_src, window=config.window, scale=config.scale, threads=config.threads
    )
    agg = aggregate_cost(vol, config.radius)
    U = cost_to_probability(agg, config.temperature)
    coarse = soft_argmax(U, grid)
    h, w = coarse.shape
    if weights is None:
        weights = bilinear_weights(h, w, config.scale)
    fine = convex_upsample(coarse, weights, config.scale)
    return SweepResult(fine, coarse, U, agg)
