"""Depth error metrics and plane detection AP / mAP at depth-error thresholds.

Detection protocol: predictions are visited in descending score order (stable,
so equal scores keep input order). A prediction matches the unmatched ground
truth with the highest mask IoU, provided IoU > 0.5 and, when a depth
threshold is given, the mean absolute depth error over the mask intersection
is below that threshold. AP is the area under the all-point interpolated
precision-recall curve, pooled over every image passed in.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .geometry import DepthMap

DEPTH_THRESHOLDS = (0.2, 0.4, 0.6, 0.9)
IOU_GATE = 0.5


@dataclass(frozen=True)
class DepthMetrics:
    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    delta1: float
    delta2: float
    delta3: float

    def as_dict(self) -> dict:
        return asdict(self)


def depth_metrics(pred: DepthMap, gt: DepthMap) -> DepthMetrics:
    if pred.shape != gt.shape:
        raise ValueError("depth maps differ in shape")
    both = pred.valid & gt.valid
    if not both.any():
        raise ValueError("no pixel is valid in both depth maps")
    d = pred.values[both]
    g = gt.values[both]
    diff = d - g
    ratio = np.maximum(d / g, g / d)
    return DepthMetrics(
        abs_rel=float(np.mean(np.abs(diff) / g)),
        sq_rel=float(np.mean(diff**2 / g)),
        rmse=float(np.sqrt(np.mean(diff**2))),
        rmse_log=float(np.sqrt(np.mean((np.log(d) - np.log(g)) ** 2))),
        delta1=float(np.mean(ratio < 1.25)),
        delta2=float(np.mean(ratio < 1.25**2)),
        delta3=float(np.mean(ratio < 1.25**3)),
    )


@dataclass(frozen=True)
class DetectedPlane:
    """A predicted plane: binary mask (``> 0.5``), score, depth raster and optional label."""

    mask: np.ndarray
    score: float
    depth: DepthMap
    label: int | None = None


@dataclass(frozen=True)
class GroundTruthPlane:
    mask: np.ndarray
    depth: DepthMap
    label: int | None = None


@dataclass(frozen=True)
class DetectionMetrics:
    ap_per_threshold: dict
    ap: float
    map: float | None = None


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a) > 0.5
    b = np.asarray(b) > 0.5
    union = np.logical_or(a, b).sum()
    return float(np.logical_and(a, b).sum() / union) if union else 0.0


def mean_depth_error(pred: DetectedPlane, gt: GroundTruthPlane) -> float:
    inter = (np.asarray(pred.mask) > 0.5) & (np.asarray(gt.mask) > 0.5) & pred.depth.valid & gt.depth.valid
    if not inter.any():
        return np.inf
    return float(np.mean(np.abs(pred.depth.values[inter] - gt.depth.values[inter])))


def _match_image(preds: Sequence[DetectedPlane], gts: Sequence[GroundTruthPlane], threshold):
    """Return ``[(score, is_tp)]`` for one image."""
    order = sorted(range(len(preds)), key=lambda i: -preds[i].score)
    taken = [False] * len(gts)
    out = []
    for i in order:
        pr = preds[i]
        best, best_iou = -1, IOU_GATE
        for j, gt in enumerate(gts):
            if taken[j]:
                continue
            iou = mask_iou(pr.mask, gt.mask)
            if iou <= best_iou:
                continue
            if threshold is not None and not mean_depth_error(pr, gt) < threshold:
                continue
            best, best_iou = j, iou
        if best >= 0:
            taken[best] = True
        out.append((pr.score, best >= 0))
    return out


def average_precision(scored: list[tuple[float, bool]], n_gt: int) -> float:
    """All-point interpolated AP from ``(score, is_tp)`` pairs."""
    if n_gt <= 0:
        raise ValueError("undefined AP: no ground-truth planes")
    if not scored:
        return 0.0
    # stable sort keeps per-image visiting order for equal scores
    order = sorted(range(len(scored)), key=lambda i: -scored[i][0])
    tp = np.array([scored[i][1] for i in order], dtype=np.float64)
    ctp = np.cumsum(tp)
    recall = ctp / n_gt
    precision = ctp / np.arange(1, len(tp) + 1)
    mrec = np.concatenate([[0.0], recall])
    mpre = np.concatenate([[0.0], precision])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    return float(np.sum((mrec[1:] - mrec[:-1]) * mpre[1:]))


def detection_ap_pooled(images, threshold: float | None = None, label: int | None = None) -> float:
    """AP over ``[(preds, gts), ...]``; ``label`` restricts both sides to one class."""
    scored = []
    n_gt = 0
    for preds, gts in images:
        if label is not None:
            preds = [p for p in preds if p.label == label]
            gts = [g for g in gts if g.label == label]
        n_gt += len(gts)
        scored += _match_image(preds, gts, threshold)
    return average_precision(scored, n_gt)


def detection_ap_per_image(images, threshold: float | None = None) -> list[float | None]:
    """Per-image AP breakdown; ``None`` for images without ground truth."""
    return [detection_ap_pooled([im], threshold) if len(im[1]) else None for im in images]


def detection_ap(preds, gts, threshold: float | None = None) -> float:
    return detection_ap_pooled([(preds, gts)], threshold)


def detection_map_pooled(images, threshold: float | None = None) -> float:
    classes = sorted({g.label for _, gts in images for g in gts if g.label is not None})
    if not classes:
        raise ValueError("mAP needs labelled ground truth")
    return float(np.mean([detection_ap_pooled(images, threshold, label=c) for c in classes]))


def detection_map(preds, gts, threshold: float | None = None) -> float:
    return detection_map_pooled([(preds, gts)], threshold)


def detection_metrics(images, thresholds=DEPTH_THRESHOLDS) -> DetectionMetrics:
    per = {t: detection_ap_pooled(images, t) for t in thresholds}
    ap = detection_ap_pooled(images, None)
    labelled = any(g.label is not None for _, gts in images for g in gts)
    return DetectionMetrics(per, ap, detection_map_pooled(images) if labelled else None)


def metric_report(depth: DepthMetrics | None = None, detection: DetectionMetrics | None = None) -> dict:
    """Flat report with the fixed key names used in files."""
    out = {}
    if depth is not None:
        out.update(depth.as_dict())
    if detection is not None:
        for t, v in detection.ap_per_threshold.items():
            out[f"ap_{t:g}"] = v
        out["ap"] = detection.ap
        if detection.map is not None:
            out["map"] = detection.map
    return out
