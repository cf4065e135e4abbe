"""Slanted plane hypothesis grids and data-driven bound selection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEGENERATE_WIDEN = 1e-3


@dataclass(frozen=True)
class AxisRange:
    lo: float
    hi: float
    count: int = 8

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"axis range needs lo < hi, got ({self.lo}, {self.hi})")
        if int(self.count) != self.count or self.count < 2:
            raise ValueError(f"axis sample count must be an integer >= 2, got {self.count}")

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.count - 1)

    def samples(self) -> np.ndarray:
        # lo + i * spacing keeps consecutive differences exactly uniform up to rounding
        s = self.lo + np.arange(self.count) * self.spacing
        s[-1] = self.hi
        return s


DEFAULT_RANGES = (AxisRange(-2.0, 2.0, 8), AxisRange(-2.0, 2.0, 8), AxisRange(-2.0, 0.5, 8))


@dataclass(frozen=True)
class HypothesisGrid:
    """Uniform lattice of plane parameters, ordered z-fastest."""

    ranges: tuple[AxisRange, AxisRange, AxisRange]
    hypotheses: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.hypotheses)

    def __getitem__(self, j):
        return self.hypotheses[j]

    @property
    def counts(self) -> tuple[int, int, int]:
        return tuple(r.count for r in self.ranges)

    @property
    def spacing(self) -> np.ndarray:
        return np.array([r.spacing for r in self.ranges])

    @property
    def lower(self) -> np.ndarray:
        return np.array([r.lo for r in self.ranges])

    @property
    def upper(self) -> np.ndarray:
        return np.array([r.hi for r in self.ranges])

    @property
    def centroid(self) -> np.ndarray:
        return (self.lower + self.upper) / 2


def build_grid(ranges=DEFAULT_RANGES) -> HypothesisGrid:
    ranges = tuple(ranges)
    if len(ranges) != 3:
        raise ValueError("need exactly three axis ranges")
    axes = [r.samples() for r in ranges]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    hyps = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)
    hyps.setflags(write=False)
    return HypothesisGrid(ranges, hyps)


def default_grid() -> HypothesisGrid:
    return build_grid(DEFAULT_RANGES)


def grid_with_counts(count: int, ranges=DEFAULT_RANGES) -> HypothesisGrid:
    return build_grid(AxisRange(r.lo, r.hi, count) for r in ranges)


def select_bounds(samples, coverage: float = 0.95, counts=(8, 8, 8)) -> tuple[AxisRange, ...]:
    """Per-axis bounds from symmetric quantiles of ground-truth plane parameters.

    The lower bound uses the ``lower`` order statistic and the upper bound the
    ``higher`` one, so at least ``coverage`` of the samples fall inside every
    axis range. A collapsed axis is widened by ``DEGENERATE_WIDEN``.
    """
    samples = np.asarray(samples, dtype=np.float64).reshape(-1, 3)
    if len(samples) == 0:
        raise ValueError("select_bounds needs at least one sample")
    if not 0 < coverage < 1:
        raise ValueError(f"coverage must lie in (0, 1), got {coverage}")
    lo = np.quantile(samples, (1 - coverage) / 2, axis=0, method="lower")
    hi = np.quantile(samples, (1 + coverage) / 2, axis=0, method="higher")
    out = []
    for a, b, c in zip(lo, hi, counts):
        if b - a <= 0:
            a, b = a - DEGENERATE_WIDEN, b + DEGENERATE_WIDEN
        out.append(AxisRange(float(a), float(b), c))
    return tuple(out)


def grid_coverage(grid: HypothesisGrid, samples) -> np.ndarray:
    """Fraction of samples inside ``[lo, hi]`` on each axis."""
    samples = np.asarray(samples, dtype=np.float64).reshape(-1, 3)
    if len(samples) == 0:
        raise ValueError("grid_coverage needs at least one sample")
    inside = (samples >= grid.lower) & (samples <= grid.upper)
    return inside.mean(axis=0)
