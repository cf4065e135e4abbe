"""Command-line entry point: ``slantsweep <subcommand> ...``.

A pair directory holds ``target.png``, ``source.png``, ``intrinsics.txt``
and ``pose.txt`` (target to source), plus optional ``source_intrinsics.txt``,
``depth.pfm`` and ``mask.png``. A ``pair.txt`` of ``key = path`` lines may
point any of these elsewhere (paths relative to the pair directory).
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .baselines import fit_plane_lsq, fronto_sweep
from .config import RunConfig, dump_config, load_config
from .hypotheses import select_bounds
from .metrics import DetectedPlane, GroundTruthPlane, depth_metrics, detection_metrics, metric_report
from .pairs import read_trajectory, select_pairs
from .pooling import PlaneInstance, pool_instances, segment_planes, stitch_depth
from .sweep import PlaneParamMap, sweep
from .synth import add_noise, render, sample_scene

PAIR_FILES = {
    "target": "target.png",
    "source": "source.png",
    "intrinsics": "intrinsics.txt",
    "source_intrinsics": "source_intrinsics.txt",
    "pose": "pose.txt",
    "depth": "depth.pfm",
    "mask": "mask.png",
}
REQUIRED = ("target", "source", "intrinsics", "pose")


class CliError(Exception):
    pass


# ----------------------------------------------------------------------------
# pair directories


def pair_paths(pair_dir) -> dict:
    pair_dir = Path(pair_dir)
    if not pair_dir.is_dir():
        raise CliError(f"not a pair directory: {pair_dir}")
    paths = {k: pair_dir / v for k, v in PAIR_FILES.items()}
    listing = pair_dir / "pair.txt"
    if listing.exists():
        for lineno, line in enumerate(listing.read_text().splitlines(), 1):
            if not line.strip():
                continue
            key, sep, val = line.partition("=")
            if not sep or key.strip() not in PAIR_FILES:
                raise CliError(f"{listing}:{lineno}: expected one of {sorted(PAIR_FILES)} = path")
            paths[key.strip()] = (pair_dir / val.strip()).resolve()
    for k in REQUIRED:
        if not paths[k].exists():
            raise CliError(f"{pair_dir}: missing {k} file {paths[k]}")
    return {k: v for k, v in paths.items() if v.exists()}


def load_pair(pair_dir) -> dict:
    p = pair_paths(pair_dir)
    k = io.read_intrinsics(p["intrinsics"])
    out = {
        "target": io.read_gray(p["target"]),
        "source": io.read_gray(p["source"]),
        "k": k,
        "k_src": io.read_intrinsics(p["source_intrinsics"]) if "source_intrinsics" in p else k,
        "pose": io.read_pose(p["pose"]),
        "depth": io.read_depth(p["depth"]) if "depth" in p else None,
        "ids": io.read_mask(p["mask"]) if "mask" in p else None,
    }
    return out


def _instances_from_ids(ids) -> list[PlaneInstance]:
    masks = io.masks_from_ids(ids)
    # larger instances win overlaps; scores are area fractions kept inside (0, 1)
    return [PlaneInstance(m.astype(np.float64), float(np.clip(m.mean(), 1e-6, 1 - 1e-6))) for m in masks]


def _ids_from_instances(instances, shape) -> np.ndarray:
    ids = np.zeros(shape, dtype=np.int64)
    best = np.full(shape, -np.inf)
    for i, inst in enumerate(instances, 1):
        take = inst.foreground & (inst.score > best)
        ids[take] = i
        best[take] = inst.score
    return ids


def _map_pairs(fn, pairs, threads: int):
    if threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, pairs))
    return [fn(p) for p in pairs]


def _out_for(args, pair_dir) -> Path:
    out = Path(args.out_dir)
    if len(args.pairs) > 1:
        out = out / Path(pair_dir).name
    out.mkdir(parents=True, exist_ok=True)
    return out


# ----------------------------------------------------------------------------
# subcommands


def cmd_synth(args, cfg: RunConfig) -> None:
    rng = np.random.default_rng(args.seed)
    for i in range(args.count):
        seed = args.seed + i
        spec = sample_scene(
            seed, args.planes, (args.min_slant, args.max_slant), textureless=args.textureless
        )
        pair = render(spec)
        tgt, src = pair.target, pair.source
        if args.noise > 0:
            tgt, src = add_noise(tgt, args.noise, rng), add_noise(src, args.noise, rng)
        d = Path(args.out_dir) / f"scene_{seed:05d}"
        d.mkdir(parents=True, exist_ok=True)
        io.write_image(d / "target.png", tgt)
        io.write_image(d / "source.png", src)
        io.write_depth(d / "depth.pfm", pair.depth)
        io.write_mask(d / "mask.png", pair.ids)
        io.write_intrinsics(d / "intrinsics.txt", spec.intrinsics)
        io.write_pose(d / "pose.txt", spec.pose)
        io.write_scene(d / "scene.json", spec)
        gt = [
            PlaneInstance(m.astype(np.float64), 0.5, pooled_param=p) for m, p in zip(pair.masks(), pair.planes)
        ]
        io.write_instances(d / "planes.txt", gt)
    print(f"wrote {args.count} scene(s) to {args.out_dir}")


def _sweep_one(args, cfg: RunConfig, pair_dir) -> None:
    pair = load_pair(pair_dir)
    res = sweep(
        pair["target"], pair["source"], pair["pose"], pair["k"], pair["k_src"], cfg.sweep_config(), cfg.grid()
    )
    params = res.params
    if pair["ids"] is not None and not args.segment:
        instances = _instances_from_ids(pair["ids"])
    else:
        instances = segment_planes(params, cfg.angle_tol, cfg.offset_tol, cfg.min_area * params.valid.size)
    instances = pool_instances(instances, params) if instances else []
    depth = stitch_depth(instances, params, pair["k"])
    out = _out_for(args, pair_dir)
    io.write_pfm(out / "params.pfm", np.where(params.valid[..., None], params.params, 0.0))
    io.write_depth(out / "depth.pfm", depth)
    io.write_instances(out / "instances.txt", instances)
    io.write_mask(out / "mask.png", _ids_from_instances(instances, params.shape))
    if args.save_volume:
        io.write_volume(out / "prob.vol", res.prob.prob, res.prob.valid)


def cmd_sweep(args, cfg: RunConfig) -> None:
    _map_pairs(lambda d: _sweep_one(args, cfg, d), args.pairs, cfg.threads)
    print(f"swept {len(args.pairs)} pair(s) into {args.out_dir}")


def _fronto_one(args, cfg: RunConfig, pair_dir) -> None:
    pair = load_pair(pair_dir)
    res = fronto_sweep(
        pair["target"], pair["source"], pair["pose"], pair["k"], pair["k_src"], cfg.depths(), cfg.sweep_config()
    )
    out = _out_for(args, pair_dir)
    io.write_depth(out / "depth_pixel.pfm", res.depth)
    depth = res.depth
    if cfg.fronto_fit and pair["ids"] is not None:
        inv = np.where(res.depth.valid, 1.0 / np.where(res.depth.valid, res.depth.values, 1.0), 0.0)
        pmap = PlaneParamMap(np.stack([0 * inv, 0 * inv, -inv], axis=-1), res.depth.valid)
        instances = []
        for inst in _instances_from_ids(pair["ids"]):
            try:
                instances.append(replace(inst, pooled_param=fit_plane_lsq(res.depth, inst.mask, pair["k"])))
            except ValueError:
                continue  # degenerate fit: the instance keeps per-pixel depth
        depth = stitch_depth(instances, pmap, pair["k"])
        io.write_instances(out / "instances.txt", instances)
    io.write_depth(out / "depth.pfm", depth)


def cmd_fronto(args, cfg: RunConfig) -> None:
    _map_pairs(lambda d: _fronto_one(args, cfg, d), args.pairs, cfg.threads)
    print(f"ran depth sweep on {len(args.pairs)} pair(s) into {args.out_dir}")


def cmd_segment(args, cfg: RunConfig) -> None:
    raw = io.read_pfm(args.params).astype(np.float64)
    if raw.ndim != 3:
        raise CliError(f"{args.params}: expected a 3-channel plane parameter map")
    valid = np.linalg.norm(raw, axis=-1) > 0
    params = PlaneParamMap(raw, valid)
    instances = segment_planes(params, cfg.angle_tol, cfg.offset_tol, cfg.min_area * valid.size)
    instances = pool_instances(instances, params) if instances else []
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_instances(out / "instances.txt", instances)
    io.write_mask(out / "mask.png", _ids_from_instances(instances, params.shape))
    print(f"found {len(instances)} plane instance(s)")


def cmd_eval(args, cfg: RunConfig) -> None:
    pred = io.read_depth(args.pred)
    gt = io.read_depth(args.gt)
    dm = depth_metrics(pred, gt)
    det = None
    if args.pred_mask and args.gt_mask:
        pid = io.read_mask(args.pred_mask)
        gid = io.read_mask(args.gt_mask)
        scores = {}
        if args.pred_instances:
            scores = {r["id"]: r["score"] for r in io.read_instances(args.pred_instances)}
        preds = [
            DetectedPlane(pid == i, scores.get(int(i), float(np.mean(pid == i))), pred)
            for i in np.unique(pid)
            if i != 0
        ]
        gts = [GroundTruthPlane(m, gt) for m in io.masks_from_ids(gid)]
        if gts:
            det = detection_metrics([(preds, gts)])
    report = metric_report(dm, det)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_report(out / "report.txt", report)
    io.write_report(out / "report.json", report)
    for k, v in report.items():
        print(f"{k} = {v:.6g}")


def cmd_pairs(args, cfg: RunConfig) -> None:
    frames = read_trajectory(args.trajectory)
    pairs = select_pairs(frames, args.min_t, args.max_t)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for i, rec in enumerate(pairs):
        d = out / f"pair_{i:05d}"
        d.mkdir(exist_ok=True)
        io.write_pose(d / "pose.txt", rec.pose)
        listing = [f"target = {Path(rec.target).resolve()}", f"source = {Path(rec.source).resolve()}"]
        if args.intrinsics:
            listing.append(f"intrinsics = {Path(args.intrinsics).resolve()}")
        (d / "pair.txt").write_text("\n".join(listing) + "\n")
        lines.append(f"{rec.target} {rec.source}")
    (out / "pairs.txt").write_text("".join(line + "\n" for line in lines))
    print(f"selected {len(pairs)} pair(s) from {len(frames)} frame(s)")


def cmd_bounds(args, cfg: RunConfig) -> None:
    samples = np.loadtxt(args.samples, ndmin=2)
    if samples.shape[1] != 3:
        raise CliError(f"{args.samples}: expected three columns px py pz")
    ranges = select_bounds(samples, args.coverage, (cfg.x_count, cfg.y_count, cfg.z_count))
    new = replace(
        cfg,
        **{f"{a}_{s}": float(getattr(r, s)) for a, r in zip("xyz", ranges) for s in ("lo", "hi")},
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bounds.cfg").write_text(dump_config(new))
    for a, r in zip("xyz", ranges):
        print(f"{a}: [{r.lo:.6g}, {r.hi:.6g}] x {r.count}")


# ----------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slantsweep", description="Slanted plane sweep stereo toolkit")
    ap.add_argument("--config", help="flat key = value run configuration")
    ap.add_argument("--out-dir", default=".", help="output directory (default: current)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, help="worker threads (overrides the config)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render synthetic pairs from seeds")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--planes", type=int, default=3)
    p.add_argument("--min-slant", type=float, default=0.0)
    p.add_argument("--max-slant", type=float, default=40.0)
    p.add_argument("--noise", type=float, default=0.0, help="intensity noise sigma")
    p.add_argument("--textureless", action="store_true")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("sweep", help="slanted sweep: parameter map, stitched depth, instances")
    p.add_argument("pairs", nargs="+", help="pair directories")
    p.add_argument("--segment", action="store_true", help="region-grow instances even if mask.png exists")
    p.add_argument("--save-volume", action="store_true", help="also write the probability volume")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("fronto", help="fronto-parallel depth sweep baseline")
    p.add_argument("pairs", nargs="+", help="pair directories")
    p.set_defaults(fn=cmd_fronto)

    p = sub.add_parser("segment", help="region-grow plane instances from a parameter map")
    p.add_argument("params", help="3-channel PFM parameter map")
    p.set_defaults(fn=cmd_segment)

    p = sub.add_parser("eval", help="depth and detection metrics")
    p.add_argument("--pred", required=True, help="predicted depth PFM")
    p.add_argument("--gt", required=True, help="ground-truth depth PFM")
    p.add_argument("--pred-mask")
    p.add_argument("--pred-instances")
    p.add_argument("--gt-mask")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("pairs", help="select stereo pairs from a camera trajectory")
    p.add_argument("trajectory", help="lines of: image_path followed by 12 or 16 camera-to-world numbers")
    p.add_argument("--min-t", type=float, default=0.05)
    p.add_argument("--max-t", type=float, default=0.15)
    p.add_argument("--intrinsics", help="intrinsics file shared by every frame")
    p.set_defaults(fn=cmd_pairs)

    p = sub.add_parser("bounds", help="fit hypothesis bounds to a plane-parameter sample")
    p.add_argument("samples", help="text file with rows px py pz")
    p.add_argument("--coverage", type=float, default=0.95)
    p.set_defaults(fn=cmd_bounds)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.threads is not None:
            cfg = replace(cfg, threads=args.threads)
        args.fn(args, cfg)
    except (CliError, ValueError, OSError, RuntimeError) as e:
        msg = " ".join(str(e).split())
        print(f"slantsweep {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
