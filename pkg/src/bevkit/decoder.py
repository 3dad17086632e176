"""Convert heatmap peaks plus regression grids back into scored 3D boxes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Box3D
from .metrics import iou_bev
from .voxelizer import GridSpec


@dataclass
class Detection:
    box: Box3D
    score: float
    class_id: int


def extract_peaks(heatmap: np.ndarray, k: int, threshold: float):
    """Strict 3x3 local maxima with score >= threshold, best k first.

    Returns (row, col, channel, score) tuples ordered by descending score,
    ties broken by (row, col, channel).
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    hm = np.asarray(heatmap, dtype=np.float64)
    if hm.ndim == 2:
        hm = hm[:, :, None]
    h, w, c = hm.shape

    padded = np.full((h + 2, w + 2, c), -np.inf)
    padded[1:-1, 1:-1] = hm
    is_peak = hm >= threshold
    for dy, dx in ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)):
        is_peak &= hm > padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]

    rows, cols, chans = np.nonzero(is_peak)
    scores = hm[rows, cols, chans]
    order = np.lexsort((chans, cols, rows, -scores))
    return [
        (int(rows[i]), int(cols[i]), int(chans[i]), float(scores[i]))
        for i in order[:k]
    ]


def decode_boxes(peaks, regression: np.ndarray, spec: GridSpec):
    """Invert the regression encoding at each peak into a Detection.

    Channel layout is (x_off, y_off, z, log w, log l, log h, sin, cos); yaw
    is recovered as atan2(sin, cos). Peaks with non-finite regression rows
    are dropped. Returns (detections, dropped_count).
    """
    reg = np.asarray(regression, dtype=np.float64)
    if reg.ndim != 3 or reg.shape[2] != 8:
        raise ValueError(f"regression grid must be (H, W, 8), got {reg.shape}")
    cell_x, cell_y = spec.bev_cell_size
    detections = []
    dropped = 0
    for row, col, channel, score in peaks:
        vec = reg[row, col]
        if not np.isfinite(vec).all():
            dropped += 1
            continue
        x = col * cell_x + spec.range[0] + vec[0]
        y = row * cell_y + spec.range[1] + vec[1]
        box = Box3D(
            center=(x, y, vec[2]),
            dims=np.exp(vec[3:6]),
            yaw=float(np.arctan2(vec[6], vec[7])),
            class_id=channel,
        )
        detections.append(Detection(box=box, score=score, class_id=channel))
    return detections, dropped


def bev_nms(detections, iou_threshold: float, class_agnostic: bool = False):
    """Greedy descending-score suppression with rotated BEV IoU.

    Detections suppress later ones of the same class (any class when
    class_agnostic) whose IoU exceeds the threshold.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError("iou_threshold must be in [0, 1]")
    order = sorted(range(len(detections)), key=lambda i: (-detections[i].score, i))
    kept: list[int] = []
    for i in order:
        det = detections[i]
        suppressed = False
        for j in kept:
            other = detections[j]
            if not class_agnostic and other.class_id != det.class_id:
                continue
            if iou_bev(other.box, det.box) > iou_threshold:
                suppressed = True
                break
        if not suppressed:
            kept.append(i)
    return [detections[i] for i in kept]
