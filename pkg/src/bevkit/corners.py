"""Adaptive corner selection: classify a box's BEV corners as VC/PVCL/PVCW/IVC
from the quadrant distribution of its interior points."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BevBuckets, Box3D, _as_xyz, box_corners_bev, points_in_box, to_local

# Row k: corner indices (IVC, PVCL, PVCW) when the dominant quadrant is k;
# the visible corner is k itself and the IVC is its diagonal, (k + 2) mod 4.
SELECT_TABLE = ((2, 3, 1), (3, 2, 0), (0, 1, 3), (1, 0, 2))

# Each quadrant plus its two edge-neighbours (diagonal excluded).
_SUBQ_TERMS = ((0, 1, 3), (1, 0, 2), (2, 1, 3), (3, 2, 0))


@dataclass
class CornerSelection:
    """Result of corner classification for one box.

    corner_indices holds the source corner index of (vc, pvcl, pvcw, ivc) in
    that order; degenerate marks boxes selected without any interior points.
    """

    vc: np.ndarray
    pvcl: np.ndarray
    pvcw: np.ndarray
    ivc: np.ndarray
    corner_indices: tuple[int, int, int, int]
    max_quadrant: int
    degenerate: bool = False

    def auxiliary_corners(self, n: int) -> np.ndarray:
        """First n supervision corners in (IVC, PVCL, PVCW, VC) order, (n, 2)."""
        if not 1 <= n <= 4:
            raise ValueError("corner count must be in 1..4")
        return np.stack([self.ivc, self.pvcl, self.pvcw, self.vc][:n])


def quadrant_histogram(local_points) -> np.ndarray:
    """Strict-sign quadrant counts (q0..q3) of local-frame points.

    Points on either axis belong to no quadrant and are not counted.
    """
    pts = np.asarray(local_points, dtype=np.float64)
    if pts.size == 0:
        return np.zeros(4, dtype=np.int64)
    x, y = pts[:, 0], pts[:, 1]
    return np.array(
        [
            int(((x < 0) & (y > 0)).sum()),
            int(((x > 0) & (y > 0)).sum()),
            int(((x > 0) & (y < 0)).sum()),
            int(((x < 0) & (y < 0)).sum()),
        ],
        dtype=np.int64,
    )


def _dominant_quadrant(q: np.ndarray) -> int:
    valid_q = int((q > 0).sum())
    if valid_q <= 2:
        return int(np.argmax(q))
    sub_q = np.array([q[a] + q[b] + q[c] for a, b, c in _SUBQ_TERMS])
    return int(np.argmax(sub_q))


def select_corners(box: Box3D, points) -> CornerSelection:
    """Classify the box's corners from the quadrant histogram of its points.

    A box without interior points keeps the literal selection (quadrant 0)
    and is flagged degenerate.
    """
    xyz = _as_xyz(points)
    if len(xyz):
        local = to_local(xyz[points_in_box(xyz, box)], box)
    else:
        local = np.zeros((0, 3))
    q = quadrant_histogram(local)
    max_i = _dominant_quadrant(q)
    corners = box_corners_bev(box)
    ivc_i, pvcl_i, pvcw_i = SELECT_TABLE[max_i]
    return CornerSelection(
        vc=corners[max_i],
        pvcl=corners[pvcl_i],
        pvcw=corners[pvcw_i],
        ivc=corners[ivc_i],
        corner_indices=(max_i, pvcl_i, pvcw_i, ivc_i),
        max_quadrant=max_i,
        degenerate=bool(q.sum() == 0),
    )


def assign_frame(boxes, cloud) -> list[CornerSelection]:
    """Per-box corner selection; points inside overlapping boxes count for each."""
    xyz = _as_xyz(cloud)
    if len(boxes) > 1 and len(xyz) > 4096:
        buckets = BevBuckets(xyz)
        return [select_corners(box, xyz[buckets.box_candidates(box)]) for box in boxes]
    return [select_corners(box, xyz) for box in boxes]
