"""Pydantic request/response schemas for the HTTP service.

Tensors travel as base64-encoded TNS1 blobs; point clouds as base64 raw
little-endian float32 rows (the on-disk .bin layout).
"""

from __future__ import annotations

import base64

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..config import ToolkitConfig
from ..geometry import Box3D, Frame, PointCloud
from ..tensorio import decode_tns1, encode_tns1


def b64_tensor(array: np.ndarray) -> str:
    return base64.b64encode(encode_tns1(array)).decode("ascii")


def tensor_from_b64(payload: str) -> np.ndarray:
    return decode_tns1(base64.b64decode(payload))


def b64_cloud(cloud: PointCloud) -> str:
    return base64.b64encode(cloud.data.astype("<f4").tobytes()).decode("ascii")


def cloud_from_b64(payload: str, attr_dim: int) -> PointCloud:
    raw = base64.b64decode(payload)
    width = 3 + attr_dim
    if len(raw) % (4 * width) != 0:
        raise ValueError(
            f"cloud payload of {len(raw)} bytes is not rows of {width} float32"
        )
    data = np.frombuffer(raw, dtype="<f4").reshape(-1, width)
    return PointCloud(data.astype(np.float64), attr_dim)


class GridSpecModel(BaseModel):
    range: tuple[float, float, float, float, float, float] | None = None
    voxel_size: tuple[float, float, float] | None = None
    max_points_per_voxel: int | None = None
    out_factor: int | None = None
    max_voxels: int | None = None


class LossWeightsModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    gamma: float = 0.25
    lam: float = Field(0.25, alias="lambda")
    alpha: float = 2.0
    beta: float = 4.0


class EvalConfigModel(BaseModel):
    iou_thresholds: dict[str, float] | None = None
    class_merge: dict[str, str] | None = None
    orientation_gate: bool | None = None
    recall_count: int | None = None
    recall_start: float | None = None
    recall_step: float | None = None
    distance_buckets: tuple[float, ...] | None = None
    difficulty: str | None = None
    matching_iou: str | None = None


class AugmentationModel(BaseModel):
    sample_counts: tuple[int, ...] | None = None


class ConfigModel(BaseModel):
    """Partial configuration document; omitted fields take ONCE defaults."""

    grid: GridSpecModel | None = None
    classes: tuple[str, ...] | None = None
    attr_dim: int | None = None
    corners: int | None = None
    loss_weights: LossWeightsModel | None = None
    eval: EvalConfigModel | None = None
    augmentation: AugmentationModel | None = None

    def to_core(self) -> ToolkitConfig:
        doc = self.model_dump(by_alias=True, exclude_none=True)
        return ToolkitConfig.from_dict(doc)


class BoxModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    frame_id: str = ""
    cls: str = Field(alias="class")
    cx: float
    cy: float
    cz: float
    w: float
    l: float
    h: float
    yaw: float
    score: float | None = None
    num_points: int | None = None

    def to_box(self, class_names) -> Box3D:
        if self.cls not in class_names:
            raise ValueError(
                f"unknown class {self.cls!r} (configured: {list(class_names)})"
            )
        return Box3D(
            center=(self.cx, self.cy, self.cz),
            dims=(self.w, self.l, self.h),
            yaw=self.yaw,
            class_id=class_names.index(self.cls),
        )

    @classmethod
    def from_box(cls, box: Box3D, class_names, frame_id="", score=None, num_points=None):
        return cls(
            frame_id=frame_id,
            cls=class_names[box.class_id],
            cx=box.center[0],
            cy=box.center[1],
            cz=box.center[2],
            w=box.w,
            l=box.l,
            h=box.h,
            yaw=box.yaw,
            score=score,
            num_points=num_points,
        )


class FrameModel(BaseModel):
    frame_id: str = "frame"
    cloud_b64: str = ""
    boxes: list[BoxModel] = []

    def to_frame(self, config: ToolkitConfig) -> Frame:
        cloud = (
            cloud_from_b64(self.cloud_b64, config.attr_dim)
            if self.cloud_b64
            else PointCloud.empty(config.attr_dim)
        )
        return Frame(
            frame_id=self.frame_id,
            cloud=cloud,
            boxes=[b.to_box(config.class_names) for b in self.boxes],
        )

    @classmethod
    def from_frame(cls, frame: Frame, config: ToolkitConfig) -> "FrameModel":
        return cls(
            frame_id=frame.frame_id,
            cloud_b64=b64_cloud(frame.cloud),
            boxes=[
                BoxModel.from_box(b, config.class_names, frame_id=frame.frame_id)
                for b in frame.boxes
            ],
        )


class HealthResponse(BaseModel):
    status: str
    version: str


class VoxelizeRequest(BaseModel):
    config: ConfigModel = ConfigModel()
    cloud_b64: str
    seed: int = 0


class VoxelizeResponse(BaseModel):
    num_voxels: int
    indices_b64: str  # TNS1 f64 (integral values)
    blocks_b64: str   # TNS1 f32, V x T x (3 + m)
    counts_b64: str   # TNS1 f64 (integral values)


class AssignRequest(BaseModel):
    config: ConfigModel = ConfigModel()
    frame: FrameModel


class CornerSelectionModel(BaseModel):
    vc: tuple[float, float]
    pvcl: tuple[float, float]
    pvcw: tuple[float, float]
    ivc: tuple[float, float]
    corner_indices: tuple[int, int, int, int]
    max_quadrant: int
    degenerate: bool


class AssignResponse(BaseModel):
    selections: list[CornerSelectionModel]


class TargetsRequest(BaseModel):
    config: ConfigModel = ConfigModel()
    frame: FrameModel
    corners: int | None = None
    skip_degenerate: bool = False


class TargetsResponse(BaseModel):
    tensors: dict[str, str]  # name -> TNS1 b64
    collisions: int
    skipped_corners: int
    skipped_centers: int


class PairLossRequest(BaseModel):
    pred_b64: str
    target_b64: str
    mask_b64: str | None = None  # required for the l1 endpoint
    weights: LossWeightsModel = LossWeightsModel()
    with_grad: bool = False


class LossResponse(BaseModel):
    value: float
    grad_b64: str | None = None


class TotalLossRequest(BaseModel):
    center_cls: float
    center_reg: float
    corner_cls: float
    corner_reg: float
    weights: LossWeightsModel = LossWeightsModel()


class TotalLossResponse(BaseModel):
    total: float
    center_cls: float
    center_reg: float
    corner_cls: float
    corner_reg: float


class DecodeRequest(BaseModel):
    config: ConfigModel = ConfigModel()
    heatmap_b64: str
    regression_b64: str
    max_peaks: int = 100
    threshold: float = 0.1
    nms_iou: float | None = None
    class_agnostic_nms: bool = False
    frame_id: str = ""


class DecodeResponse(BaseModel):
    detections: list[BoxModel]
    dropped: int


class EvaluateRequest(BaseModel):
    config: ConfigModel = ConfigModel()
    dataset: str = "once"  # "once" | "waymo"
    detections: list[BoxModel]
    ground_truths: list[BoxModel]


class EvaluateResponse(BaseModel):
    report: dict
    table: str


class DbEntryModel(BaseModel):
    class_id: int
    center: tuple[float, float, float]
    dims: tuple[float, float, float]
    yaw: float
    points_b64: str  # TNS1 f64, K x (3 + m) box-local points
    source_frame: str = ""


class BuildDbRequest(BaseModel):
    config: ConfigModel = ConfigModel()
    frames: list[FrameModel]


class BuildDbResponse(BaseModel):
    entries: list[DbEntryModel]
    skipped_empty: int


class AugmentRequest(BaseModel):
    config: ConfigModel = ConfigModel()
    frame: FrameModel
    seed: int = 0
    db_entries: list[DbEntryModel] | None = None
    sample_counts: tuple[int, ...] | None = None
    apply_global: bool = True


class AugmentResponse(BaseModel):
    frame: FrameModel
    pasted: int


class SensorSpecModel(BaseModel):
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    azimuth_count: int = 512
    elevation_angles: tuple[float, ...] = (0.0,)
    max_range: float = 100.0
    noise_sigma: float = 0.0
    seed: int = 0


class SynthRequest(BaseModel):
    config: ConfigModel = ConfigModel()
    boxes: list[BoxModel]
    sensor: SensorSpecModel = SensorSpecModel()
    frame_id: str = "synthetic"


class SynthResponse(BaseModel):
    frame: FrameModel
    box_ids_b64: str  # TNS1 f64, per-point source box index


class HeatmapRequest(BaseModel):
    tns1_b64: str
    channel: int = 0


class HeatmapResponse(BaseModel):
    pgm_b64: str
    height: int
    width: int
