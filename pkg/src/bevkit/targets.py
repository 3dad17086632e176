"""Supervision-target generation: corner/center heatmaps, sub-cell offsets,
and the 8-channel center regression grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corners import CornerSelection, assign_frame
from .geometry import Box3D, PointCloud
from .voxelizer import GridSpec, bev_shape

GAUSSIAN_RADIUS = 2

# Channel order of the center regression vector.
REGRESSION_CHANNELS = ("x_off", "y_off", "z", "log_w", "log_l", "log_h", "sin", "cos")


@dataclass
class TargetBundle:
    """Dense per-frame supervision tensors on the BEV grid.

    Corner heatmap channels are class-major (class_id * n + corner_type with
    types ordered IVC, PVCL, PVCW, VC); offset planes are shared across
    classes, one (x, y) pair per corner type.
    """

    corner_heatmap: np.ndarray   # (H, W, C*n) float64 in [0, 1]
    corner_offsets: np.ndarray   # (H, W, n, 2) float64
    corner_mask: np.ndarray      # (H, W, n) bool
    center_heatmap: np.ndarray   # (H, W, C) float64 in [0, 1]
    center_regression: np.ndarray  # (H, W, 8) float64
    center_mask: np.ndarray      # (H, W) bool
    n_corners: int
    num_classes: int
    collisions: int = 0
    skipped_corners: int = 0
    skipped_centers: int = 0

    def tensors(self) -> dict[str, np.ndarray]:
        """Named dense tensors, masks as uint8 (serialization order is fixed)."""
        return {
            "corner_heatmap": self.corner_heatmap,
            "corner_offsets": self.corner_offsets,
            "corner_mask": self.corner_mask.astype(np.uint8),
            "center_heatmap": self.center_heatmap,
            "center_regression": self.center_regression,
            "center_mask": self.center_mask.astype(np.uint8),
        }

    @classmethod
    def empty(cls, spec: GridSpec, n_corners: int, num_classes: int) -> "TargetBundle":
        h, w = bev_shape(spec)
        return cls(
            corner_heatmap=np.zeros((h, w, num_classes * n_corners)),
            corner_offsets=np.zeros((h, w, n_corners, 2)),
            corner_mask=np.zeros((h, w, n_corners), dtype=bool),
            center_heatmap=np.zeros((h, w, num_classes)),
            center_regression=np.zeros((h, w, 8)),
            center_mask=np.zeros((h, w), dtype=bool),
            n_corners=n_corners,
            num_classes=num_classes,
        )


def _gaussian_stamp(r: int):
    """Pixel offsets with dx^2 + dy^2 <= r^2 and their Gaussian values (sigma = r/3)."""
    sigma = r / 3.0
    dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
    d2 = dx * dx + dy * dy
    keep = d2 <= r * r
    return dy[keep], dx[keep], np.exp(-d2[keep] / (2.0 * sigma * sigma))


_STAMP_CACHE: dict[int, tuple] = {}


def gaussian_splat(heatmap: np.ndarray, center_px: tuple[int, int], r: int) -> np.ndarray:
    """Max-merge a Gaussian bump (sigma = r/3) into a 2D heatmap at (row, col).

    Touches exactly the integer pixels with dx^2 + dy^2 <= r^2; the center
    pixel receives 1.0.
    """
    h, w = heatmap.shape
    row, col = center_px
    if not (0 <= row < h and 0 <= col < w):
        raise ValueError(f"center pixel {center_px} outside {heatmap.shape} grid")
    if r not in _STAMP_CACHE:
        _STAMP_CACHE[r] = _gaussian_stamp(r)
    dy, dx, values = _STAMP_CACHE[r]
    py = row + dy
    px = col + dx
    inside = (py >= 0) & (py < h) & (px >= 0) & (px < w)
    np.maximum.at(heatmap, (py[inside], px[inside]), values[inside])
    return heatmap


def bev_pixel(spec: GridSpec, x: float, y: float):
    """Floored BEV pixel of a metric point plus its sub-cell offsets.

    Returns (row, col, x_off, y_off), or None when the pixel falls off the
    grid. Offsets reconstruct the exact position: x = col*cell_x + x_min + x_off.
    """
    h, w = bev_shape(spec)
    cell_x, cell_y = spec.bev_cell_size
    px = (x - spec.range[0]) / cell_x
    py = (y - spec.range[1]) / cell_y
    col, row = int(np.floor(px)), int(np.floor(py))
    if not (0 <= row < h and 0 <= col < w):
        return None
    x_off = x - (col * cell_x + spec.range[0])
    y_off = y - (row * cell_y + spec.range[1])
    return row, col, x_off, y_off


def corner_targets(
    boxes: list[Box3D],
    selections: list[CornerSelection],
    spec: GridSpec,
    n_corners: int,
    num_classes: int,
    skip_degenerate: bool = False,
):
    """Corner heatmaps, shared offset planes, and per-type positive mask.

    Returns (heatmap (H,W,C*n), offsets (H,W,n,2), mask (H,W,n), skipped)
    where skipped counts corners whose pixel fell outside the grid.
    """
    h, w = bev_shape(spec)
    heatmap = np.zeros((h, w, num_classes * n_corners))
    offsets = np.zeros((h, w, n_corners, 2))
    mask = np.zeros((h, w, n_corners), dtype=bool)
    skipped = 0
    for box, sel in zip(boxes, selections):
        if skip_degenerate and sel.degenerate:
            continue
        for ctype, (cx, cy) in enumerate(sel.auxiliary_corners(n_corners)):
            hit = bev_pixel(spec, cx, cy)
            if hit is None:
                skipped += 1
                continue
            row, col, x_off, y_off = hit
            gaussian_splat(
                heatmap[:, :, box.class_id * n_corners + ctype],
                (row, col),
                GAUSSIAN_RADIUS,
            )
            offsets[row, col, ctype] = (x_off, y_off)
            mask[row, col, ctype] = True
    return heatmap, offsets, mask, skipped


def center_targets(boxes: list[Box3D], spec: GridSpec, num_classes: int):
    """Center heatmap plus the 8-channel regression grid.

    At each positive pixel the regression row is (x_off, y_off, z, log w,
    log l, log h, sin yaw, cos yaw). Two boxes landing on one pixel keep the
    later box's regression row; such collisions are counted. Returns
    (heatmap, regression, mask, collisions, skipped).
    """
    h, w = bev_shape(spec)
    heatmap = np.zeros((h, w, num_classes))
    regression = np.zeros((h, w, 8))
    mask = np.zeros((h, w), dtype=bool)
    collisions = 0
    skipped = 0
    for box in boxes:
        hit = bev_pixel(spec, box.center[0], box.center[1])
        if hit is None:
            skipped += 1
            continue
        row, col, x_off, y_off = hit
        gaussian_splat(heatmap[:, :, box.class_id], (row, col), GAUSSIAN_RADIUS)
        if mask[row, col]:
            collisions += 1
        regression[row, col] = (
            x_off,
            y_off,
            box.center[2],
            np.log(box.w),
            np.log(box.l),
            np.log(box.h),
            np.sin(box.yaw),
            np.cos(box.yaw),
        )
        mask[row, col] = True
    return heatmap, regression, mask, collisions, skipped


def build_targets(
    boxes: list[Box3D],
    cloud: PointCloud,
    spec: GridSpec,
    n_corners: int = 3,
    num_classes: int = 5,
    skip_degenerate: bool = False,
    selections: list[CornerSelection] | None = None,
) -> TargetBundle:
    """Full supervision bundle for one frame.

    Corner selection runs on the frame's cloud unless precomputed selections
    are passed. Overlapping Gaussians merge by per-pixel max.
    """
    for box in boxes:
        if box.class_id >= num_classes:
            raise ValueError(
                f"class_id {box.class_id} outside configured {num_classes} classes"
            )
    if selections is None:
        selections = assign_frame(boxes, cloud)
    corner_hm, corner_off, corner_mask, skipped_c = corner_targets(
        boxes, selections, spec, n_corners, num_classes, skip_degenerate
    )
    center_hm, center_reg, center_mask, collisions, skipped_z = center_targets(
        boxes, spec, num_classes
    )
    return TargetBundle(
        corner_heatmap=corner_hm,
        corner_offsets=corner_off,
        corner_mask=corner_mask,
        center_heatmap=center_hm,
        center_regression=center_reg,
        center_mask=center_mask,
        n_corners=n_corners,
        num_classes=num_classes,
        collisions=collisions,
        skipped_corners=skipped_c,
        skipped_centers=skipped_z,
    )
