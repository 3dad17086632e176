"""Training-time augmentation: ground-truth database sampling and global
flip / rotate / scale transforms."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import (
    Box3D,
    Frame,
    PointCloud,
    from_local,
    normalize_yaw,
    points_in_box,
    to_local,
)
from .metrics import iou_bev
from .tensorio import read_tns1, write_tns1

ROTATION_RANGE = (-np.pi / 4, np.pi / 4)
SCALE_RANGE = (0.95, 1.05)
FLIP_PROBABILITY = 0.5


@dataclass
class DbEntry:
    """One cropped ground-truth object: box pose plus its interior points in
    the box-local frame."""

    class_id: int
    center: np.ndarray
    dims: np.ndarray
    yaw: float
    points_local: np.ndarray  # K x (3 + m)
    source_frame: str

    @property
    def box(self) -> Box3D:
        return Box3D(self.center, self.dims, self.yaw, self.class_id)

    def points_global(self, attr_dim: int) -> np.ndarray:
        pts = from_local(self.points_local[:, :3], self.box)
        return np.concatenate([pts, self.points_local[:, 3 : 3 + attr_dim]], axis=1)


@dataclass
class GtDatabase:
    entries: dict[int, list[DbEntry]]
    attr_dim: int = 0
    skipped_empty: int = 0

    def class_counts(self) -> dict[int, int]:
        return {c: len(v) for c, v in self.entries.items()}

    def save(self, directory) -> None:
        """One TNS1 blob of local points per entry plus a JSON manifest."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = {"attr_dim": self.attr_dim, "skipped_empty": self.skipped_empty, "entries": []}
        i = 0
        for class_id in sorted(self.entries):
            for entry in self.entries[class_id]:
                blob_name = f"entry_{i:06d}.tns1"
                write_tns1(directory / blob_name, entry.points_local)
                manifest["entries"].append(
                    {
                        "class_id": class_id,
                        "center": list(entry.center),
                        "dims": list(entry.dims),
                        "yaw": entry.yaw,
                        "source_frame": entry.source_frame,
                        "points": blob_name,
                    }
                )
                i += 1
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))

    @classmethod
    def load(cls, directory) -> "GtDatabase":
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        db = cls(entries={}, attr_dim=manifest["attr_dim"], skipped_empty=manifest.get("skipped_empty", 0))
        for row in manifest["entries"]:
            entry = DbEntry(
                class_id=row["class_id"],
                center=np.array(row["center"]),
                dims=np.array(row["dims"]),
                yaw=row["yaw"],
                points_local=read_tns1(directory / row["points"]).astype(np.float64),
                source_frame=row["source_frame"],
            )
            db.entries.setdefault(entry.class_id, []).append(entry)
        return db


def build_gt_database(frames) -> GtDatabase:
    """Crop every annotated box's interior points into box-local coordinates.

    Boxes without interior points are skipped and counted.
    """
    frames = list(frames)
    attr_dim = frames[0].cloud.attr_dim if frames else 0
    db = GtDatabase(entries={}, attr_dim=attr_dim)
    for frame in frames:
        for box in frame.boxes:
            mask = points_in_box(frame.cloud, box)
            if not mask.any():
                db.skipped_empty += 1
                continue
            local = to_local(frame.cloud.xyz[mask], box)
            points_local = np.concatenate([local, frame.cloud.attrs[mask]], axis=1)
            db.entries.setdefault(box.class_id, []).append(
                DbEntry(
                    class_id=box.class_id,
                    center=box.center.copy(),
                    dims=box.dims.copy(),
                    yaw=box.yaw,
                    points_local=points_local,
                    source_frame=frame.frame_id,
                )
            )
    return db


def sample_and_paste(frame: Frame, db: GtDatabase, counts, seed: int = 0) -> Frame:
    """Paste sampled database objects (at their stored poses) into the frame.

    Per class, up to counts[c] entries are drawn without replacement; a
    candidate overlapping any existing or already-pasted box in BEV is
    rejected outright.
    """
    rng = np.random.default_rng(seed)
    boxes = list(frame.boxes)
    clouds = [frame.cloud.data]
    for class_id, count in enumerate(counts):
        pool = db.entries.get(class_id, [])
        if count <= 0 or not pool:
            continue
        take = min(int(count), len(pool))
        chosen = rng.choice(len(pool), size=take, replace=False)
        for idx in chosen:
            entry = pool[int(idx)]
            candidate = entry.box
            if any(iou_bev(candidate, existing) > 0.0 for existing in boxes):
                continue
            boxes.append(candidate)
            clouds.append(entry.points_global(frame.cloud.attr_dim))
    return Frame(
        frame_id=frame.frame_id,
        cloud=PointCloud(np.concatenate(clouds, axis=0), frame.cloud.attr_dim),
        boxes=boxes,
    )


def apply_global_transform(
    frame: Frame,
    flip_x: bool = False,
    flip_y: bool = False,
    rotation: float = 0.0,
    scale: float = 1.0,
) -> Frame:
    """Apply flips about the x/y axes, a rotation about the origin, and a
    uniform scale, to the whole frame (points, box centers, dims, yaws)."""
    xyz = frame.cloud.xyz.copy()
    centers = np.array([b.center for b in frame.boxes]).reshape(-1, 3)
    yaws = np.array([b.yaw for b in frame.boxes])
    dims = np.array([b.dims for b in frame.boxes]).reshape(-1, 3)

    if flip_x:  # mirror about the x axis: negate y
        xyz[:, 1] *= -1
        centers[:, 1] *= -1
        yaws = -yaws
    if flip_y:  # mirror about the y axis: negate x
        xyz[:, 0] *= -1
        centers[:, 0] *= -1
        yaws = np.pi - yaws
    if rotation != 0.0:
        c, s = np.cos(rotation), np.sin(rotation)
        for arr in (xyz, centers):
            x = arr[:, 0] * c - arr[:, 1] * s
            y = arr[:, 0] * s + arr[:, 1] * c
            arr[:, 0], arr[:, 1] = x, y
        yaws = yaws + rotation
    if scale != 1.0:
        xyz *= scale
        centers *= scale
        dims *= scale

    data = np.concatenate([xyz, frame.cloud.attrs], axis=1)
    boxes = [
        Box3D(centers[i], dims[i], normalize_yaw(yaws[i]), frame.boxes[i].class_id)
        for i in range(len(frame.boxes))
    ]
    return Frame(
        frame_id=frame.frame_id,
        cloud=PointCloud(data, frame.cloud.attr_dim),
        boxes=boxes,
    )


@dataclass(frozen=True)
class AugmentDraw:
    flip_x: bool
    flip_y: bool
    rotation: float
    scale: float


def draw_global_augment(seed: int) -> AugmentDraw:
    """Seeded draw of the global augmentation parameters (fixed draw order)."""
    rng = np.random.default_rng(seed)
    return AugmentDraw(
        flip_x=bool(rng.random() < FLIP_PROBABILITY),
        flip_y=bool(rng.random() < FLIP_PROBABILITY),
        rotation=float(rng.uniform(*ROTATION_RANGE)),
        scale=float(rng.uniform(*SCALE_RANGE)),
    )


def global_augment(frame: Frame, seed: int = 0) -> Frame:
    """Seeded whole-frame flip / rotate / scale."""
    draw = draw_global_augment(seed)
    return apply_global_transform(
        frame, draw.flip_x, draw.flip_y, draw.rotation, draw.scale
    )
