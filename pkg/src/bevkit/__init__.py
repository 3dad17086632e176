"""bevkit: the non-learned core of a corner-guided BEV 3D object detector.

Voxelization, adaptive corner selection, heatmap/offset supervision targets,
losses with analytic gradients, box decoding, rotated-IoU AP/APH evaluation,
augmentation, and a deterministic synthetic scene generator.
"""

from .augment import (
    GtDatabase,
    apply_global_transform,
    build_gt_database,
    global_augment,
    sample_and_paste,
)
from .config import ToolkitConfig, once_config, preset, waymo_config
from .corners import CornerSelection, assign_frame, quadrant_histogram, select_corners
from .decoder import Detection, bev_nms, decode_boxes, extract_peaks
from .geometry import (
    Box3D,
    Frame,
    PointCloud,
    box_corners_bev,
    from_local,
    normalize_yaw,
    points_in_box,
    to_local,
)
from .losses import LossReport, LossWeights, focal_loss, l1_loss, total_loss
from .metrics import (
    EvalConfig,
    EvalReport,
    GroundTruth,
    average_precision,
    evaluate_once,
    evaluate_waymo,
    iou_3d,
    iou_bev,
    match_detections,
)
from .synth import SensorSpec, fixture_names, make_fixture, raycast_scene
from .targets import TargetBundle, build_targets, center_targets, corner_targets, gaussian_splat
from .voxelizer import GridSpec, VoxelSet, bev_shape, fused_channel_count, voxel_index, voxelize

__version__ = "0.1.0"

__all__ = [
    "Box3D",
    "CornerSelection",
    "Detection",
    "EvalConfig",
    "EvalReport",
    "Frame",
    "GridSpec",
    "GroundTruth",
    "GtDatabase",
    "LossReport",
    "LossWeights",
    "PointCloud",
    "SensorSpec",
    "TargetBundle",
    "ToolkitConfig",
    "VoxelSet",
    "apply_global_transform",
    "assign_frame",
    "average_precision",
    "bev_nms",
    "bev_shape",
    "box_corners_bev",
    "build_gt_database",
    "build_targets",
    "center_targets",
    "corner_targets",
    "decode_boxes",
    "evaluate_once",
    "evaluate_waymo",
    "extract_peaks",
    "fixture_names",
    "focal_loss",
    "from_local",
    "fused_channel_count",
    "gaussian_splat",
    "global_augment",
    "iou_3d",
    "iou_bev",
    "l1_loss",
    "make_fixture",
    "match_detections",
    "normalize_yaw",
    "once_config",
    "points_in_box",
    "preset",
    "quadrant_histogram",
    "raycast_scene",
    "sample_and_paste",
    "select_corners",
    "to_local",
    "total_loss",
    "voxel_index",
    "voxelize",
    "waymo_config",
]
