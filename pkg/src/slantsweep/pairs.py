"""Stereo pair records and baseline-based source view selection."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import RelativePose

MIN_BASELINE = 0.05
MAX_BASELINE = 0.15


@dataclass(frozen=True)
class StereoPairRecord:
    target: Path
    source: Path
    pose: RelativePose  # target camera -> source camera
    intrinsics: Path | None = None
    source_intrinsics: Path | None = None
    pose_path: Path | None = None
    depth: Path | None = None
    mask: Path | None = None

    def check(self) -> None:
        """Raise if any referenced file is missing or does not parse."""
        from . import io

        for p in (self.target, self.source):
            io.read_image(p)
        for p in (self.intrinsics, self.source_intrinsics):
            if p is not None:
                io.read_intrinsics(p)
        if self.pose_path is not None:
            io.read_pose(self.pose_path)
        if self.depth is not None:
            io.read_depth(self.depth)
        if self.mask is not None:
            io.read_mask(self.mask)


def as_c2w(pose) -> np.ndarray:
    """Camera-to-world 4x4 from a 4x4, 3x4 or 12-element pose."""
    a = np.asarray(pose, dtype=np.float64)
    if a.size == 12:
        a = a.reshape(3, 4)
    if a.shape == (3, 4):
        a = np.vstack([a, [0.0, 0.0, 0.0, 1.0]])
    if a.shape != (4, 4):
        raise ValueError(f"pose must be 3x4 or 4x4, got shape {a.shape}")
    return a


def relative_pose(c2w_tgt, c2w_src) -> RelativePose:
    """Map target camera coordinates into the source camera."""
    m = np.linalg.inv(as_c2w(c2w_src)) @ as_c2w(c2w_tgt)
    return RelativePose(m[:3, :3], m[:3, 3])


def select_pairs(frames, min_t: float = MIN_BASELINE, max_t: float = MAX_BASELINE) -> list[StereoPairRecord]:
    """For each target, the nearest later frame whose baseline lies in ``[min_t, max_t]``.

    ``frames`` is an ordered sequence of ``(camera_to_world, path)``. Targets
    with no qualifying source are skipped.
    """
    frames = [(as_c2w(pose), Path(path)) for pose, path in frames]
    out = []
    for i, (ci, pi) in enumerate(frames):
        for cj, pj in frames[i + 1 :]:
            rel = relative_pose(ci, cj)
            t = float(np.linalg.norm(rel.t))
            if min_t <= t <= max_t:
                out.append(StereoPairRecord(pi, pj, rel))
                break
    return out


def read_trajectory(path) -> list[tuple[np.ndarray, Path]]:
    """Lines of ``image_path`` followed by 12 or 16 camera-to-world numbers."""
    frames = []
    base = Path(path).parent
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        tok = line.split("#", 1)[0].split()
        if not tok:
            continue
        if len(tok) not in (13, 17):
            raise ValueError(f"{path}:{lineno}: expected a path and 12 or 16 numbers, got {len(tok)} fields")
        try:
            nums = [float(t) for t in tok[1:]]
        except ValueError:
            raise ValueError(f"{path}:{lineno}: pose entries must be numbers") from None
        frames.append((as_c2w(nums), base / tok[0]))
    return frames
