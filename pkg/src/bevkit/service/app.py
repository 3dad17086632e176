"""FastAPI service exposing the toolkit over HTTP."""

from __future__ import annotations

import base64

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..augment import DbEntry, GtDatabase, build_gt_database, global_augment, sample_and_paste
from ..config import preset
from ..corners import assign_frame
from ..decoder import Detection, bev_nms, decode_boxes, extract_peaks
from ..geometry import Frame
from ..losses import LossWeights, focal_loss, l1_loss, total_loss
from ..metrics import GroundTruth, evaluate_once, evaluate_waymo
from ..synth import SensorSpec, make_fixture, fixture_names, raycast_scene
from ..targets import build_targets
from ..tensorio import DataFormatError, heatmap_to_pgm
from ..voxelizer import voxelize
from .models import (
    AssignRequest,
    AssignResponse,
    AugmentRequest,
    AugmentResponse,
    BoxModel,
    BuildDbRequest,
    BuildDbResponse,
    ConfigModel,
    CornerSelectionModel,
    DbEntryModel,
    DecodeRequest,
    DecodeResponse,
    EvaluateRequest,
    EvaluateResponse,
    FrameModel,
    HealthResponse,
    HeatmapRequest,
    HeatmapResponse,
    LossResponse,
    PairLossRequest,
    SynthRequest,
    SynthResponse,
    TargetsRequest,
    TargetsResponse,
    TotalLossRequest,
    TotalLossResponse,
    VoxelizeRequest,
    VoxelizeResponse,
    b64_cloud,
    b64_tensor,
    cloud_from_b64,
    tensor_from_b64,
)


def _weights(model) -> LossWeights:
    return LossWeights(
        gamma=model.gamma, lam=model.lam, alpha=model.alpha, beta=model.beta
    )


def _group_by_frame(config, det_models, gt_models):
    """Frame-id keyed detection/GT lists in sorted frame order."""
    frame_ids = sorted(
        {m.frame_id for m in det_models} | {m.frame_id for m in gt_models}
    )
    index = {fid: i for i, fid in enumerate(frame_ids)}
    dets = [[] for _ in frame_ids]
    gts = [[] for _ in frame_ids]
    for m in det_models:
        box = m.to_box(config.class_names)
        dets[index[m.frame_id]].append(
            Detection(box=box, score=m.score if m.score is not None else 0.0,
                      class_id=box.class_id)
        )
    for m in gt_models:
        box = m.to_box(config.class_names)
        gts[index[m.frame_id]].append(GroundTruth(box, num_points=m.num_points))
    return dets, gts


def create_app() -> FastAPI:
    app = FastAPI(
        title="bevkit",
        version=__version__,
        description="Voxelization, corner supervision targets, losses, box "
        "decoding and AP/APH evaluation for BEV 3D object detection.",
    )

    @app.exception_handler(ValueError)
    async def value_error_handler(request, exc):
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(DataFormatError)
    async def data_error_handler(request, exc):
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.get("/config/presets/{name}")
    def config_preset(name: str) -> dict:
        try:
            return preset(name).to_dict()
        except ValueError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.post("/voxelize", response_model=VoxelizeResponse)
    def voxelize_endpoint(request: VoxelizeRequest) -> VoxelizeResponse:
        config = request.config.to_core()
        cloud = cloud_from_b64(request.cloud_b64, config.attr_dim)
        voxels = voxelize(cloud, config.grid, seed=request.seed)
        return VoxelizeResponse(
            num_voxels=len(voxels),
            indices_b64=b64_tensor(voxels.indices.astype(np.float64)),
            blocks_b64=b64_tensor(voxels.point_blocks),
            counts_b64=b64_tensor(voxels.counts.astype(np.float64)),
        )

    @app.post("/corners/assign", response_model=AssignResponse)
    def assign_endpoint(request: AssignRequest) -> AssignResponse:
        config = request.config.to_core()
        frame = request.frame.to_frame(config)
        selections = assign_frame(frame.boxes, frame.cloud)
        return AssignResponse(
            selections=[
                CornerSelectionModel(
                    vc=tuple(s.vc),
                    pvcl=tuple(s.pvcl),
                    pvcw=tuple(s.pvcw),
                    ivc=tuple(s.ivc),
                    corner_indices=s.corner_indices,
                    max_quadrant=s.max_quadrant,
                    degenerate=s.degenerate,
                )
                for s in selections
            ]
        )

    @app.post("/targets/build", response_model=TargetsResponse)
    def targets_endpoint(request: TargetsRequest) -> TargetsResponse:
        config = request.config.to_core()
        frame = request.frame.to_frame(config)
        bundle = build_targets(
            frame.boxes,
            frame.cloud,
            config.grid,
            n_corners=request.corners or config.corners,
            num_classes=config.num_classes,
            skip_degenerate=request.skip_degenerate,
        )
        return TargetsResponse(
            tensors={name: b64_tensor(t) for name, t in bundle.tensors().items()},
            collisions=bundle.collisions,
            skipped_corners=bundle.skipped_corners,
            skipped_centers=bundle.skipped_centers,
        )

    @app.post("/losses/focal", response_model=LossResponse)
    def focal_endpoint(request: PairLossRequest) -> LossResponse:
        pred = tensor_from_b64(request.pred_b64)
        target = tensor_from_b64(request.target_b64)
        value, grad = focal_loss(pred, target, _weights(request.weights))
        return LossResponse(
            value=value, grad_b64=b64_tensor(grad) if request.with_grad else None
        )

    @app.post("/losses/l1", response_model=LossResponse)
    def l1_endpoint(request: PairLossRequest) -> LossResponse:
        if request.mask_b64 is None:
            raise HTTPException(status_code=422, detail="l1 loss needs mask_b64")
        pred = tensor_from_b64(request.pred_b64)
        target = tensor_from_b64(request.target_b64)
        mask = tensor_from_b64(request.mask_b64).astype(bool)
        value, grad = l1_loss(pred, target, mask)
        return LossResponse(
            value=value, grad_b64=b64_tensor(grad) if request.with_grad else None
        )

    @app.post("/losses/total", response_model=TotalLossResponse)
    def total_endpoint(request: TotalLossRequest) -> TotalLossResponse:
        report = total_loss(
            request.center_cls,
            request.center_reg,
            request.corner_cls,
            request.corner_reg,
            _weights(request.weights),
        )
        return TotalLossResponse(
            total=report.total,
            center_cls=report.center_cls,
            center_reg=report.center_reg,
            corner_cls=report.corner_cls,
            corner_reg=report.corner_reg,
        )

    @app.post("/decode", response_model=DecodeResponse)
    def decode_endpoint(request: DecodeRequest) -> DecodeResponse:
        config = request.config.to_core()
        heatmap = tensor_from_b64(request.heatmap_b64)
        regression = tensor_from_b64(request.regression_b64)
        peaks = extract_peaks(heatmap, k=request.max_peaks, threshold=request.threshold)
        detections, dropped = decode_boxes(peaks, regression, config.grid)
        if request.nms_iou is not None:
            detections = bev_nms(
                detections, request.nms_iou, class_agnostic=request.class_agnostic_nms
            )
        return DecodeResponse(
            detections=[
                BoxModel.from_box(
                    d.box,
                    config.class_names,
                    frame_id=request.frame_id,
                    score=d.score,
                )
                for d in detections
            ],
            dropped=dropped,
        )

    @app.post("/evaluate", response_model=EvaluateResponse)
    def evaluate_endpoint(request: EvaluateRequest) -> EvaluateResponse:
        config = request.config.to_core()
        if request.dataset not in ("once", "waymo"):
            raise HTTPException(status_code=422, detail="dataset must be once|waymo")
        dets, gts = _group_by_frame(config, request.detections, request.ground_truths)
        if request.dataset == "waymo":
            report = evaluate_waymo(dets, gts, config.eval)
        else:
            report = evaluate_once(dets, gts, config.eval)
        return EvaluateResponse(report=report.to_dict(), table=report.format_table())

    @app.post("/augment/build-db", response_model=BuildDbResponse)
    def build_db_endpoint(request: BuildDbRequest) -> BuildDbResponse:
        config = request.config.to_core()
        frames = [f.to_frame(config) for f in request.frames]
        db = build_gt_database(frames)
        entries = []
        for class_id in sorted(db.entries):
            for e in db.entries[class_id]:
                entries.append(
                    DbEntryModel(
                        class_id=e.class_id,
                        center=tuple(e.center),
                        dims=tuple(e.dims),
                        yaw=e.yaw,
                        points_b64=b64_tensor(e.points_local),
                        source_frame=e.source_frame,
                    )
                )
        return BuildDbResponse(entries=entries, skipped_empty=db.skipped_empty)

    @app.post("/augment", response_model=AugmentResponse)
    def augment_endpoint(request: AugmentRequest) -> AugmentResponse:
        config = request.config.to_core()
        frame = request.frame.to_frame(config)
        pasted = 0
        if request.db_entries:
            db = GtDatabase(entries={}, attr_dim=config.attr_dim)
            for m in request.db_entries:
                entry = DbEntry(
                    class_id=m.class_id,
                    center=np.array(m.center),
                    dims=np.array(m.dims),
                    yaw=m.yaw,
                    points_local=tensor_from_b64(m.points_b64).astype(np.float64),
                    source_frame=m.source_frame,
                )
                db.entries.setdefault(entry.class_id, []).append(entry)
            counts = request.sample_counts or config.sample_counts
            before = len(frame.boxes)
            frame = sample_and_paste(frame, db, counts, seed=request.seed)
            pasted = len(frame.boxes) - before
        if request.apply_global:
            frame = global_augment(frame, seed=request.seed)
        return AugmentResponse(
            frame=FrameModel.from_frame(frame, config), pasted=pasted
        )

    @app.post("/synth/scene", response_model=SynthResponse)
    def synth_endpoint(request: SynthRequest) -> SynthResponse:
        config = request.config.to_core()
        boxes = [b.to_box(config.class_names) for b in request.boxes]
        sensor = SensorSpec(**request.sensor.model_dump())
        cloud, box_ids = raycast_scene(boxes, sensor)
        frame = Frame(frame_id=request.frame_id, cloud=cloud, boxes=boxes)
        return SynthResponse(
            frame=FrameModel.from_frame(frame, config),
            box_ids_b64=b64_tensor(box_ids.astype(np.float64)),
        )

    @app.get("/synth/fixtures")
    def fixtures_endpoint() -> list[str]:
        return fixture_names()

    @app.get("/synth/fixture/{name}", response_model=FrameModel)
    def fixture_endpoint(name: str) -> FrameModel:
        try:
            frame = make_fixture(name)
        except ValueError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        config = preset("once")
        return FrameModel.from_frame(frame, config)

    @app.post("/heatmap/pgm", response_model=HeatmapResponse)
    def heatmap_endpoint(request: HeatmapRequest) -> HeatmapResponse:
        stack = tensor_from_b64(request.tns1_b64)
        if stack.ndim == 2:
            stack = stack[:, :, None]
        if stack.ndim != 3:
            raise HTTPException(status_code=422, detail="expected an (H, W, C) tensor")
        if not 0 <= request.channel < stack.shape[2]:
            raise HTTPException(
                status_code=422,
                detail=f"channel {request.channel} outside 0..{stack.shape[2] - 1}",
            )
        pgm = heatmap_to_pgm(stack[:, :, request.channel].astype(np.float64))
        return HeatmapResponse(
            pgm_b64=base64.b64encode(pgm).decode("ascii"),
            height=stack.shape[0],
            width=stack.shape[1],
        )

    return app


app = create_app()
