"""File formats: PFM depth, PNG images and masks, pose / intrinsics / instance text,
probability volumes, metric reports and scene specs.

Every reader rejects malformed input with a ``FormatError`` that carries the
byte offset (or line number for text formats) of the first problem.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import CameraIntrinsics, DepthMap, RelativePose
from .sweep import ImageRaster

LUMA = np.array([0.299, 0.587, 0.114])


class FormatError(ValueError):
    def __init__(self, path, where: str, msg: str):
        super().__init__(f"{path}: {where}: {msg}")


# ----------------------------------------------------------------------------
# PFM


def write_pfm(path, data) -> None:
    """Little-endian PFM, rows stored bottom to top; ``(h, w)`` or ``(h, w, 3)``."""
    if isinstance(data, DepthMap):
        data = data.values
    a = np.asarray(data)
    if a.ndim == 2:
        magic = "Pf"
    elif a.ndim == 3 and a.shape[2] == 3:
        magic = "PF"
    else:
        raise ValueError("PFM writer expects an (h, w) or (h, w, 3) array")
    h, w = a.shape[:2]
    header = f"{magic}\n{w} {h}\n-1.0\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(a[::-1], dtype="<f4").tobytes())


def _read_token(buf: bytes, pos: int, path) -> tuple[bytes, int, int]:
    """Next whitespace-delimited token, its start offset and the offset after it."""
    while pos < len(buf) and buf[pos : pos + 1].isspace():
        pos += 1
    start = pos
    while pos < len(buf) and not buf[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise FormatError(path, f"byte {start}", "truncated PFM header")
    return buf[start:pos], start, pos


def read_pfm(path) -> np.ndarray:
    """Return a float32 ``(h, w)`` or ``(h, w, 3)`` array, top row first.

    A negative scale means little-endian payload, positive big-endian.
    """
    buf = Path(path).read_bytes()
    magic, _, pos = _read_token(buf, 0, path)
    if magic not in (b"Pf", b"PF"):
        raise FormatError(path, "byte 0", f"bad PFM magic {magic!r}")
    channels = 1 if magic == b"Pf" else 3
    dims = []
    for name in ("width", "height"):
        tok, start, pos = _read_token(buf, pos, path)
        if not tok.isdigit() or int(tok) == 0:
            raise FormatError(path, f"byte {start}", f"bad PFM {name} {tok!r}")
        dims.append(int(tok))
    tok, start, pos = _read_token(buf, pos, path)
    try:
        scale = float(tok)
    except ValueError:
        raise FormatError(path, f"byte {start}", f"bad PFM scale {tok!r}") from None
    if scale == 0 or not np.isfinite(scale):
        raise FormatError(path, f"byte {start}", "PFM scale must be finite and nonzero")
    pos += 1  # single whitespace byte ends the header
    w, h = dims
    n = w * h * channels * 4
    if len(buf) - pos != n:
        raise FormatError(path, f"byte {pos}", f"payload has {len(buf) - pos} bytes, expected {n}")
    dtype = "<f4" if scale < 0 else ">f4"
    a = np.frombuffer(buf, dtype=dtype, count=w * h * channels, offset=pos)
    shape = (h, w) if channels == 1 else (h, w, 3)
    return a.reshape(shape)[::-1].astype(np.float32)


def write_depth(path, depth: DepthMap) -> None:
    """Invalid pixels are stored as 0."""
    write_pfm(path, np.where(depth.valid, depth.values, 0.0))


def read_depth(path) -> DepthMap:
    return DepthMap.from_values(read_pfm(path).astype(np.float64))


# ----------------------------------------------------------------------------
# PNG


def read_image(path) -> np.ndarray:
    """8-bit PNG as float in ``[0, 1]``, gray ``(h, w)`` or colour ``(h, w, 3)``."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB", "RGBA"):
            im = im.convert("RGB")
        a = np.asarray(im)
    if a.ndim == 3:
        a = a[..., :3]
    return a.astype(np.float64) / 255.0


def to_gray(img) -> np.ndarray:
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 2:
        return a
    if a.ndim == 3 and a.shape[2] == 3:
        return a @ LUMA
    raise ValueError(f"cannot convert array of shape {a.shape} to grayscale")


def read_gray(path) -> ImageRaster:
    return ImageRaster(to_gray(read_image(path)))


def write_image(path, img) -> None:
    if isinstance(img, ImageRaster):
        img = img.values
    a = np.asarray(img, dtype=np.float64)
    if a.ndim not in (2, 3):
        raise ValueError("image must be (h, w) or (h, w, 3)")
    Image.fromarray(np.round(np.clip(a, 0, 1) * 255).astype(np.uint8)).save(path)


def write_mask(path, ids) -> None:
    """16-bit instance-id PNG; id 0 is background."""
    a = np.asarray(ids)
    if a.ndim != 2 or a.min(initial=0) < 0 or a.max(initial=0) > 65535:
        raise ValueError("instance ids must be a 2-D array in [0, 65535]")
    Image.fromarray(a.astype(np.uint16)).save(path)


def read_mask(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode not in ("I;16", "I", "L"):
            raise FormatError(path, "byte 0", f"mask PNG must be single-channel, got mode {im.mode}")
        return np.asarray(im).astype(np.int64)


def masks_from_ids(ids) -> list[np.ndarray]:
    ids = np.asarray(ids)
    return [ids == i for i in np.unique(ids) if i != 0]


# ----------------------------------------------------------------------------
# text formats


def _floats(path, expected: int | None = None) -> list[float]:
    vals = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0]
        for tok in line.split():
            try:
                vals.append(float(tok))
            except ValueError:
                raise FormatError(path, f"line {lineno}", f"not a number: {tok!r}") from None
    if expected is not None and len(vals) != expected:
        raise FormatError(path, "end of file", f"expected {expected} numbers, found {len(vals)}")
    return vals


def write_pose(path, pose: RelativePose) -> None:
    """Target to source ``[R|t]`` as three rows of four numbers."""
    rows = [" ".join(repr(float(v)) for v in row) for row in pose.matrix]
    Path(path).write_text("\n".join(rows) + "\n")


def read_pose(path) -> RelativePose:
    m = np.array(_floats(path, 12)).reshape(3, 4)
    return RelativePose(m[:, :3], m[:, 3])


def write_intrinsics(path, k: CameraIntrinsics) -> None:
    Path(path).write_text(" ".join(repr(float(v)) for v in (k.fx, k.fy, k.cx, k.cy)) + f" {int(k.width)} {int(k.height)}\n")


def read_intrinsics(path) -> CameraIntrinsics:
    v = _floats(path, 6)
    if v[4] != int(v[4]) or v[5] != int(v[5]):
        raise FormatError(path, "line 1", "width and height must be integers")
    return CameraIntrinsics(*v[:4], int(v[4]), int(v[5]))


def write_instances(path, instances) -> None:
    """One line per instance: ``id px py pz score [label]``; ids count from 1."""
    lines = []
    for i, inst in enumerate(instances, 1):
        p = inst.pooled_param
        if p is None:
            raise ValueError("instance has no pooled plane")
        fields = [str(i), *(repr(float(v)) for v in p), repr(float(inst.score))]
        if inst.semantic_label is not None:
            fields.append(str(inst.semantic_label))
        lines.append(" ".join(fields))
    Path(path).write_text("".join(line + "\n" for line in lines))


def read_instances(path) -> list[dict]:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        tok = line.split()
        if not tok:
            continue
        if len(tok) not in (5, 6):
            raise FormatError(path, f"line {lineno}", f"expected 5 or 6 fields, got {len(tok)}")
        try:
            rec = {
                "id": int(tok[0]),
                "p": np.array([float(t) for t in tok[1:4]]),
                "score": float(tok[4]),
                "label": int(tok[5]) if len(tok) == 6 else None,
            }
        except ValueError as e:
            raise FormatError(path, f"line {lineno}", str(e)) from None
        out.append(rec)
    return out


# ----------------------------------------------------------------------------
# volumes


_VOL_HEADER = re.compile(rb"VOL (\d+) (\d+) (\d+)\n")


def write_volume(path, prob: np.ndarray, valid: np.ndarray | None = None) -> None:
    """``VOL N h w`` header then float32 little-endian payload; invalid cells are NaN."""
    a = np.asarray(prob, dtype=np.float64)
    if a.ndim != 3:
        raise ValueError("volume must be (N, h, w)")
    if valid is not None:
        valid = np.asarray(valid, dtype=bool)
        a = np.where(valid if valid.ndim == 3 else valid[None], a, np.nan)
    n, h, w = a.shape
    with open(path, "wb") as f:
        f.write(f"VOL {n} {h} {w}\n".encode("ascii"))
        f.write(a.astype("<f4").tobytes())


def read_volume(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    m = _VOL_HEADER.match(buf)
    if m is None:
        raise FormatError(path, "byte 0", "bad volume header")
    n, h, w = (int(g) for g in m.groups())
    size = n * h * w * 4
    if len(buf) - m.end() != size:
        raise FormatError(path, f"byte {m.end()}", f"payload has {len(buf) - m.end()} bytes, expected {size}")
    return np.frombuffer(buf, dtype="<f4", offset=m.end()).reshape(n, h, w).astype(np.float32)


# ----------------------------------------------------------------------------
# reports and scenes


def write_report(path, report: dict) -> None:
    """Flat ``key = value`` text, or JSON when the suffix is ``.json``."""
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(report, indent=2) + "\n")
    else:
        path.write_text("".join(f"{k} = {v!r}\n" for k, v in report.items()))


def read_report(path) -> dict:
    path = Path(path)
    if path.suffix == ".json":
        return json.loads(path.read_text())
    out = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise FormatError(path, f"line {lineno}", "expected key = value")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise FormatError(path, f"line {lineno}", f"not a number: {val.strip()!r}") from None
    return out


def write_scene(path, spec) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n")


def read_scene(path):
    from .synth import SceneSpec

    return SceneSpec.from_dict(json.loads(Path(path).read_text()))
