"""Slanted-plane multi-view stereo: plane sweeping over p = n / e hypotheses,
soft-argmax plane parameters, instance pooling and planar depth."""

from .baselines import DepthHypothesisSet, FrontoResult, fit_plane_lsq, fronto_sweep
from .config import RunConfig, load_config
from .geometry import (
    CameraIntrinsics,
    DepthMap,
    RelativePose,
    depth_to_point,
    induce_homography,
    plane_to_depth,
)
from .hypotheses import AxisRange, HypothesisGrid, build_grid, default_grid, grid_coverage, select_bounds
from .metrics import (
    DetectedPlane,
    GroundTruthPlane,
    depth_metrics,
    detection_ap,
    detection_ap_per_image,
    detection_ap_pooled,
    detection_map,
    detection_metrics,
    metric_report,
)
from .pairs import StereoPairRecord, select_pairs
from .pooling import PlaneInstance, pool_instances, segment_planes, soft_pool, soft_pooling_loss, stitch_depth
from .sweep import (
    CostVolume,
    ImageRaster,
    PlaneParamMap,
    ProbabilityVolume,
    SweepConfig,
    aggregate_cost,
    build_cost_volume,
    convex_upsample,
    cost_to_probability,
    matching_cost,
    soft_argmax,
    sweep,
    warp_source,
)

__version__ = "0.1.0"
