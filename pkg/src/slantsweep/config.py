"""Run configuration loaded from flat ``key = value`` files."""

from __future__ import annotations

import ast
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .baselines import DepthHypothesisSet
from .hypotheses import AxisRange, HypothesisGrid, build_grid
from .sweep import SweepConfig


@dataclass(frozen=True)
class RunConfig:
    x_lo: float = -2.0
    x_hi: float = 2.0
    x_count: int = 8
    y_lo: float = -2.0
    y_hi: float = 2.0
    y_count: int = 8
    z_lo: float = -2.0
    z_hi: float = 0.5
    z_count: int = 8
    window: int = 7
    radius: int = 2
    temperature: float = 0.05
    scale: int = 4
    upsample: int = 4
    angle_tol: float = 10.0
    offset_tol: float = 0.1
    min_area: float = 0.005  # fraction of the image
    fronto_min_depth: float = 0.25
    fronto_max_depth: float = 10.0
    fronto_count: int = 128
    fronto_fit: bool = True
    threads: int = 1

    def __post_init__(self):
        # constructing the parts runs their own checks
        self.grid()
        self.sweep_config()
        self.depths()
        if self.upsample != self.scale:
            raise ValueError(f"upsample factor ({self.upsample}) must equal working scale ({self.scale})")
        if not 0 < self.angle_tol < 90 or not self.offset_tol > 0:
            raise ValueError("segmentation tolerances must be positive (angle below 90 degrees)")
        if not 0 <= self.min_area < 1:
            raise ValueError("min_area is a fraction of the image in [0, 1)")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def grid(self) -> HypothesisGrid:
        return build_grid(
            (
                AxisRange(self.x_lo, self.x_hi, self.x_count),
                AxisRange(self.y_lo, self.y_hi, self.y_count),
                AxisRange(self.z_lo, self.z_hi, self.z_count),
            )
        )

    def sweep_config(self) -> SweepConfig:
        return SweepConfig(self.window, self.radius, self.temperature, self.scale, self.threads)

    def depths(self) -> DepthHypothesisSet:
        return DepthHypothesisSet.inverse_uniform(self.fronto_min_depth, self.fronto_max_depth, self.fronto_count)


def _coerce(name: str, typ, text: str, where: str):
    try:
        value = ast.literal_eval(text)
    except (ValueError, SyntaxError):
        raise ValueError(f"{where}: cannot parse value for {name}: {text!r}") from None
    if typ in ("bool", bool):
        if not isinstance(value, bool):
            raise ValueError(f"{where}: {name} must be True or False")
        return value
    if typ in ("int", int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError(f"{where}: {name} must be an integer")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{where}: {name} must be a number")
    return float(value)


def parse_config(text: str, base: RunConfig = RunConfig(), source: str = "<config>") -> RunConfig:
    types = {f.name: f.type for f in fields(RunConfig)}
    updates = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        where = f"{source}:{lineno}"
        if not sep:
            raise ValueError(f"{where}: expected key = value")
        if key not in types:
            raise ValueError(f"{where}: unknown config key {key!r}")
        updates[key] = _coerce(key, types[key], val.strip(), where)
    return replace(base, **updates)


def load_config(path, base: RunConfig = RunConfig()) -> RunConfig:
    return parse_config(Path(path).read_text(), base, str(path))


def dump_config(cfg: RunConfig) -> str:
    return "".join(f"{f.name} = {getattr(cfg, f.name)!r}\n" for f in fields(cfg))
