"""Rotated-box IoU and the orientation-aware AP / APH evaluation protocols."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Box3D, box_corners_bev, normalize_yaw

_CLIP_EPS = 1e-9


@dataclass
class GroundTruth:
    """An annotated box, optionally with its interior LiDAR point count."""

    box: Box3D
    num_points: int | None = None


def _default_thresholds():
    return {"vehicle": 0.7, "pedestrian": 0.3, "cyclist": 0.5}


def _default_merge():
    return {"car": "vehicle", "bus": "vehicle", "truck": "vehicle"}


@dataclass
class EvalConfig:
    """Evaluation protocol settings (defaults follow the ONCE convention)."""

    class_names: tuple[str, ...] = ("car", "bus", "truck", "pedestrian", "cyclist")
    iou_thresholds: dict[str, float] = field(default_factory=_default_thresholds)
    class_merge: dict[str, str] = field(default_factory=_default_merge)
    orientation_gate: bool = True
    recall_count: int = 50
    recall_start: float = 0.02
    recall_step: float = 0.02
    distance_edges: tuple[float, ...] = (30.0, 50.0)
    difficulty: str = "none"          # "none" | "waymo"
    matching_iou: str = "3d"          # "3d" | "bev"

    def __post_init__(self):
        for name, thr in self.iou_thresholds.items():
            if not 0.0 < thr <= 1.0:
                raise ValueError(f"IoU threshold for {name} must be in (0, 1]")
        if self.matching_iou not in ("3d", "bev"):
            raise ValueError("matching_iou must be '3d' or 'bev'")
        if self.difficulty not in ("none", "waymo"):
            raise ValueError("difficulty must be 'none' or 'waymo'")
        missing = [c for c in self.eval_classes if c not in self.iou_thresholds]
        if missing:
            raise ValueError(f"missing IoU thresholds for: {missing}")

    @property
    def eval_classes(self) -> list[str]:
        seen: list[str] = []
        for name in self.class_names:
            merged = self.class_merge.get(name, name)
            if merged not in seen:
                seen.append(merged)
        return seen

    @property
    def recall_grid(self) -> np.ndarray:
        return self.recall_start + self.recall_step * np.arange(self.recall_count)

    def merged_class(self, class_id: int) -> str:
        name = self.class_names[class_id]
        return self.class_merge.get(name, name)

    def bucket_labels(self) -> list[str]:
        edges = self.distance_edges
        labels = [f"0-{edges[0]:g}m"]
        labels += [f"{a:g}-{b:g}m" for a, b in zip(edges, edges[1:])]
        labels.append(f"{edges[-1]:g}m-inf")
        return labels


def waymo_eval_config() -> EvalConfig:
    return EvalConfig(
        class_names=("vehicle", "pedestrian", "cyclist"),
        iou_thresholds={"vehicle": 0.7, "pedestrian": 0.5, "cyclist": 0.5},
        class_merge={},
        difficulty="waymo",
    )


# ---------------------------------------------------------------------------
# Rotated IoU


def _corners_ccw(box: Box3D) -> np.ndarray:
    # quadrant order 0..3 walks the rectangle clockwise; reverse for CCW
    return box_corners_bev(box)[[0, 3, 2, 1]]


def _polygon_area(poly) -> float:
    if len(poly) < 3:
        return 0.0
    pts = np.asarray(poly, dtype=np.float64)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _clip_polygon(subject, clip_ccw) -> list:
    """Sutherland-Hodgman clip of a convex subject by a CCW convex polygon."""
    output = [tuple(p) for p in subject]
    n_clip = len(clip_ccw)
    for i in range(n_clip):
        if len(output) < 3:
            return []
        ax, ay = clip_ccw[i]
        bx, by = clip_ccw[(i + 1) % n_clip]
        ex, ey = bx - ax, by - ay
        points = output
        values = [ex * (py - ay) - ey * (px - ax) for px, py in points]
        output = []
        m = len(points)
        for j in range(m):
            pv, qv = values[j], values[(j + 1) % m]
            if pv >= -_CLIP_EPS:
                output.append(points[j])
            if (pv >= -_CLIP_EPS) != (qv >= -_CLIP_EPS):
                denom = pv - qv
                if abs(denom) <= 1e-300:
                    continue
                t = min(max(pv / denom, 0.0), 1.0)
                px, py = points[j]
                qx, qy = points[(j + 1) % m]
                output.append((px + t * (qx - px), py + t * (qy - py)))
    return output


def intersection_area_bev(a: Box3D, b: Box3D) -> float:
    """Area of the overlap of two rotated BEV rectangles."""
    return max(_polygon_area(_clip_polygon(_corners_ccw(a), _corners_ccw(b))), 0.0)


def iou_bev(a: Box3D, b: Box3D) -> float:
    """Rotated IoU of the two boxes' BEV footprints."""
    area_a = _polygon_area(_corners_ccw(a))
    area_b = _polygon_area(_corners_ccw(b))
    inter = intersection_area_bev(a, b)
    union = area_a + area_b - inter
    if inter <= 0.0 or union <= 0.0:
        return 0.0
    return min(inter / union, 1.0)


def _z_overlap(a: Box3D, b: Box3D) -> float:
    top = min(a.center[2] + a.h / 2, b.center[2] + b.h / 2)
    bottom = max(a.center[2] - a.h / 2, b.center[2] - b.h / 2)
    return max(top - bottom, 0.0)


def iou_3d(a: Box3D, b: Box3D) -> float:
    """Volumetric IoU: BEV overlap area times z-extent overlap."""
    inter = intersection_area_bev(a, b) * _z_overlap(a, b)
    vol_a = _polygon_area(_corners_ccw(a)) * a.h
    vol_b = _polygon_area(_corners_ccw(b)) * b.h
    union = vol_a + vol_b - inter
    if inter <= 0.0 or union <= 0.0:
        return 0.0
    return min(inter / union, 1.0)


def heading_difference(yaw_a: float, yaw_b: float) -> float:
    """Absolute heading error in [0, pi]."""
    d = abs(normalize_yaw(yaw_a) - normalize_yaw(yaw_b))
    return min(d, 2.0 * np.pi - d)


# ---------------------------------------------------------------------------
# Matching


@dataclass
class MatchResult:
    """Per-detection TP/FP labels for one frame, in input detection order."""

    tp: np.ndarray             # bool, per detection
    matched_gt: np.ndarray     # GT index, -1 when not a TP
    heading_error: np.ndarray  # radians, 0 where not a TP
    gt_matched: np.ndarray     # bool, per ground-truth box


def match_detections(detections, ground_truths, config: EvalConfig) -> MatchResult:
    """Greedy score-descending assignment with per-class IoU thresholds.

    A detection claims the unmatched same-class GT of highest IoU at or above
    the class threshold. With the orientation gate on, a heading error above
    90 degrees rejects the match (the detection becomes an FP and the GT
    stays available).
    """
    n_det, n_gt = len(detections), len(ground_truths)
    tp = np.zeros(n_det, dtype=bool)
    matched_gt = np.full(n_det, -1, dtype=np.int64)
    heading_error = np.zeros(n_det, dtype=np.float64)
    gt_matched = np.zeros(n_gt, dtype=bool)
    iou_fn = iou_3d if config.matching_iou == "3d" else iou_bev

    gt_class = [config.merged_class(g.box.class_id) for g in ground_truths]
    order = sorted(range(n_det), key=lambda i: (-detections[i].score, i))
    for i in order:
        det = detections[i]
        det_class = config.merged_class(det.class_id)
        threshold = config.iou_thresholds[det_class]
        best_j, best_iou = -1, -1.0
        for j, gt in enumerate(ground_truths):
            if gt_matched[j] or gt_class[j] != det_class:
                continue
            iou = iou_fn(det.box, gt.box)
            if iou >= threshold and iou > best_iou:
                best_j, best_iou = j, iou
        if best_j < 0:
            continue
        err = heading_difference(det.box.yaw, ground_truths[best_j].box.yaw)
        if config.orientation_gate and err > np.pi / 2:
            continue  # rejected match: FP, GT stays available
        tp[i] = True
        matched_gt[i] = best_j
        heading_error[i] = err
        gt_matched[best_j] = True
    return MatchResult(tp, matched_gt, heading_error, gt_matched)


# ---------------------------------------------------------------------------
# Average precision


@dataclass
class ApResult:
    ap: float
    aph: float | None = None
    undefined: bool = False  # no ground truth of this class


def average_precision(
    scores,
    tp,
    n_gt: int,
    recall_grid,
    heading_errors=None,
) -> ApResult:
    """Interpolated AP over a fixed recall grid.

    Precision at recall r is max precision among operating points whose
    recall is >= r (0 when unreachable). When heading_errors is given, APH is
    also computed with each TP's precision contribution weighted by
    1 - heading_error/pi.
    """
    scores = np.asarray(scores, dtype=np.float64)
    tp = np.asarray(tp, dtype=bool)
    recall_grid = np.asarray(recall_grid, dtype=np.float64)
    if n_gt == 0:
        return ApResult(0.0, 0.0 if heading_errors is not None else None, True)
    if len(scores) == 0:
        return ApResult(0.0, 0.0 if heading_errors is not None else None, False)

    order = np.lexsort((np.arange(len(scores)), -scores))
    tp_sorted = tp[order]
    cum_tp = np.cumsum(tp_sorted)
    cum_fp = np.cumsum(~tp_sorted)
    recall = cum_tp / n_gt
    precision = cum_tp / (cum_tp + cum_fp)

    def interpolate(prec: np.ndarray) -> float:
        total = 0.0
        for r in recall_grid:
            reachable = prec[recall >= r]
            total += float(reachable.max()) if reachable.size else 0.0
        return total / len(recall_grid)

    ap = interpolate(precision)
    aph = None
    if heading_errors is not None:
        errors = np.asarray(heading_errors, dtype=np.float64)[order]
        weights = np.clip(1.0 - errors / np.pi, 0.0, 1.0) * tp_sorted
        heading_precision = np.cumsum(weights) / (cum_tp + cum_fp)
        aph = interpolate(heading_precision)
    return ApResult(ap, aph, False)


# ---------------------------------------------------------------------------
# Dataset protocols


@dataclass
class ClassEval:
    ap: float
    aph: float | None = None
    buckets: dict[str, float] = field(default_factory=dict)
    tp: int = 0
    fp: int = 0
    fn: int = 0
    n_gt: int = 0
    undefined: bool = False

    def to_dict(self) -> dict:
        out = {
            "ap": self.ap,
            "buckets": dict(self.buckets),
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "n_gt": self.n_gt,
            "undefined": self.undefined,
        }
        if self.aph is not None:
            out["aph"] = self.aph
        return out


@dataclass
class EvalReport:
    classes: dict[str, ClassEval]
    mean_ap: float
    bucket_labels: list[str] = field(default_factory=list)
    levels: dict[str, dict] | None = None

    def to_dict(self) -> dict:
        out = {
            "classes": {k: v.to_dict() for k, v in self.classes.items()},
            "mAP": self.mean_ap,
            "bucket_labels": list(self.bucket_labels),
        }
        if self.levels is not None:
            out["levels"] = {
                level: {
                    "classes": {k: v.to_dict() for k, v in data["classes"].items()},
                    "mAP": data["mAP"],
                    "mAPH": data["mAPH"],
                }
                for level, data in self.levels.items()
            }
        return out

    def format_table(self) -> str:
        lines = []
        if self.bucket_labels:
            header = f"{'class':<12}{'overall':>10}" + "".join(
                f"{label:>10}" for label in self.bucket_labels
            )
            lines.append(header)
            for name, result in self.classes.items():
                row = f"{name:<12}{100 * result.ap:>10.2f}"
                for label in self.bucket_labels:
                    row += f"{100 * result.buckets.get(label, 0.0):>10.2f}"
                lines.append(row)
        else:
            lines.append(f"{'class':<12}{'AP':>10}{'APH':>10}")
            for name, result in self.classes.items():
                aph = 100 * result.aph if result.aph is not None else float("nan")
                lines.append(f"{name:<12}{100 * result.ap:>10.2f}{aph:>10.2f}")
        lines.append(f"mAP: {100 * self.mean_ap:.2f}")
        if self.levels is not None:
            for level, data in self.levels.items():
                lines.append(f"[{level}]")
                lines.append(f"{'class':<12}{'AP':>10}{'APH':>10}")
                for name, result in data["classes"].items():
                    lines.append(
                        f"{name:<12}{100 * result.ap:>10.2f}{100 * result.aph:>10.2f}"
                    )
                lines.append(
                    f"mAP: {100 * data['mAP']:.2f}  mAPH: {100 * data['mAPH']:.2f}"
                )
        return "\n".join(lines)


def _bev_distance(box: Box3D) -> float:
    return float(np.hypot(box.center[0], box.center[1]))


def _bucket_of(distance: float, edges) -> int:
    return int(np.searchsorted(np.asarray(edges, dtype=np.float64), distance, side="right"))


def _pool_matches(dets_per_frame, gts_per_frame, config: EvalConfig):
    """Match every frame and pool detections per evaluated class."""
    if len(dets_per_frame) != len(gts_per_frame):
        raise ValueError("detection and ground-truth frame counts differ")
    pooled = {
        name: {"scores": [], "tp": [], "heading": [], "bucket": []}
        for name in config.eval_classes
    }
    gt_totals = {name: 0 for name in config.eval_classes}
    gt_bucket_totals = {
        name: np.zeros(len(config.distance_edges) + 1, dtype=np.int64)
        for name in config.eval_classes
    }
    for dets, gts in zip(dets_per_frame, gts_per_frame):
        result = match_detections(dets, gts, config)
        gt_buckets = [_bucket_of(_bev_distance(g.box), config.distance_edges) for g in gts]
        for g, bucket in zip(gts, gt_buckets):
            name = config.merged_class(g.box.class_id)
            gt_totals[name] += 1
            gt_bucket_totals[name][bucket] += 1
        for i, det in enumerate(dets):
            name = config.merged_class(det.class_id)
            entry = pooled[name]
            entry["scores"].append(det.score)
            entry["tp"].append(bool(result.tp[i]))
            entry["heading"].append(float(result.heading_error[i]))
            if result.tp[i]:
                entry["bucket"].append(gt_buckets[result.matched_gt[i]])
            else:
                entry["bucket"].append(_bucket_of(_bev_distance(det.box), config.distance_edges))
    return pooled, gt_totals, gt_bucket_totals


def evaluate_once(dets_per_frame, gts_per_frame, config: EvalConfig | None = None) -> EvalReport:
    """ONCE-style protocol: merged super-classes, AP overall and per
    ground-truth-distance bucket, mAP as the unweighted class mean."""
    config = config or EvalConfig()
    pooled, gt_totals, gt_bucket_totals = _pool_matches(
        dets_per_frame, gts_per_frame, config
    )
    labels = config.bucket_labels()
    classes: dict[str, ClassEval] = {}
    for name in config.eval_classes:
        entry = pooled[name]
        scores = np.asarray(entry["scores"])
        tp = np.asarray(entry["tp"], dtype=bool)
        buckets = np.asarray(entry["bucket"], dtype=np.int64)
        overall = average_precision(scores, tp, gt_totals[name], config.recall_grid)
        per_bucket = {}
        for b, label in enumerate(labels):
            in_bucket = buckets == b
            per_bucket[label] = average_precision(
                scores[in_bucket],
                tp[in_bucket],
                int(gt_bucket_totals[name][b]),
                config.recall_grid,
            ).ap
        n_tp = int(tp.sum())
        classes[name] = ClassEval(
            ap=overall.ap,
            buckets=per_bucket,
            tp=n_tp,
            fp=int(len(tp) - n_tp),
            fn=gt_totals[name] - n_tp,
            n_gt=gt_totals[name],
            undefined=overall.undefined,
        )
    mean_ap = float(np.mean([c.ap for c in classes.values()])) if classes else 0.0
    return EvalReport(classes=classes, mean_ap=mean_ap, bucket_labels=labels)


def evaluate_waymo(dets_per_frame, gts_per_frame, config: EvalConfig | None = None) -> EvalReport:
    """Waymo-style protocol: AP and APH per difficulty level.

    LEVEL_1 ground truths have more than five interior points, LEVEL_2 at
    least one; matching reruns against each level's ground-truth subset.
    """
    config = config or waymo_eval_config()
    for gts in gts_per_frame:
        for g in gts:
            if g.num_points is None:
                raise ValueError(
                    "Waymo levels need per-box point counts on every ground truth"
                )
    levels = {}
    for level, min_points in (("LEVEL_1", 6), ("LEVEL_2", 1)):
        filtered = [
            [g for g in gts if g.num_points >= min_points] for gts in gts_per_frame
        ]
        pooled, gt_totals, _ = _pool_matches(dets_per_frame, filtered, config)
        classes: dict[str, ClassEval] = {}
        for name in config.eval_classes:
            entry = pooled[name]
            result = average_precision(
                np.asarray(entry["scores"]),
                np.asarray(entry["tp"], dtype=bool),
                gt_totals[name],
                config.recall_grid,
                heading_errors=np.asarray(entry["heading"]),
            )
            n_tp = int(np.asarray(entry["tp"], dtype=bool).sum())
            classes[name] = ClassEval(
                ap=result.ap,
                aph=result.aph,
                tp=n_tp,
                fp=len(entry["tp"]) - n_tp,
                fn=gt_totals[name] - n_tp,
                n_gt=gt_totals[name],
                undefined=result.undefined,
            )
        mean_ap = float(np.mean([c.ap for c in classes.values()])) if classes else 0.0
        mean_aph = float(np.mean([c.aph for c in classes.values()])) if classes else 0.0
        levels[level] = {"classes": classes, "mAP": mean_ap, "mAPH": mean_aph}

    report = EvalReport(
        classes=levels["LEVEL_2"]["classes"],
        mean_ap=levels["LEVEL_2"]["mAP"],
        bucket_labels=[],
        levels=levels,
    )
    return report
