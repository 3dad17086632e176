"""Single JSON configuration document for the pipeline and its presets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .losses import LossWeights
from .metrics import EvalConfig, waymo_eval_config
from .voxelizer import GridSpec

DEFAULT_SAMPLE_COUNTS = (1, 4, 3, 2, 2)


@dataclass
class ToolkitConfig:
    """Everything the CLI / service needs to process frames."""

    grid: GridSpec
    class_names: tuple[str, ...]
    attr_dim: int = 1
    corners: int = 3
    loss_weights: LossWeights = field(default_factory=LossWeights)
    eval: EvalConfig = field(default_factory=EvalConfig)
    sample_counts: tuple[int, ...] = DEFAULT_SAMPLE_COUNTS

    def __post_init__(self):
        if not 1 <= self.corners <= 4:
            raise ValueError("corners must be in 1..4")
        if self.attr_dim < 0:
            raise ValueError("attr_dim must be >= 0")
        if len(self.sample_counts) != len(self.class_names):
            raise ValueError("sample_counts must list one count per class")
        if tuple(self.eval.class_names) != tuple(self.class_names):
            raise ValueError("eval.class_names must match the class table")

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def to_dict(self) -> dict:
        return {
            "grid": {
                "range": list(self.grid.range),
                "voxel_size": list(self.grid.voxel_size),
                "max_points_per_voxel": self.grid.max_points_per_voxel,
                "out_factor": self.grid.out_factor,
                "max_voxels": self.grid.max_voxels,
            },
            "classes": list(self.class_names),
            "attr_dim": self.attr_dim,
            "corners": self.corners,
            "loss_weights": {
                "gamma": self.loss_weights.gamma,
                "lambda": self.loss_weights.lam,
                "alpha": self.loss_weights.alpha,
                "beta": self.loss_weights.beta,
            },
            "eval": {
                "iou_thresholds": dict(self.eval.iou_thresholds),
                "class_merge": dict(self.eval.class_merge),
                "orientation_gate": self.eval.orientation_gate,
                "recall_count": self.eval.recall_count,
                "recall_start": self.eval.recall_start,
                "recall_step": self.eval.recall_step,
                "distance_buckets": list(self.eval.distance_edges),
                "difficulty": self.eval.difficulty,
                "matching_iou": self.eval.matching_iou,
            },
            "augmentation": {"sample_counts": list(self.sample_counts)},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ToolkitConfig":
        base = once_config()
        grid_doc = doc.get("grid", {})
        grid = GridSpec(
            range=tuple(grid_doc.get("range", base.grid.range)),
            voxel_size=tuple(grid_doc.get("voxel_size", base.grid.voxel_size)),
            max_points_per_voxel=grid_doc.get(
                "max_points_per_voxel", base.grid.max_points_per_voxel
            ),
            out_factor=grid_doc.get("out_factor", base.grid.out_factor),
            max_voxels=grid_doc.get("max_voxels", base.grid.max_voxels),
        )
        class_names = tuple(doc.get("classes", base.class_names))
        lw_doc = doc.get("loss_weights", {})
        loss_weights = LossWeights(
            gamma=lw_doc.get("gamma", 0.25),
            lam=lw_doc.get("lambda", 0.25),
            alpha=lw_doc.get("alpha", 2.0),
            beta=lw_doc.get("beta", 4.0),
        )
        ev_doc = doc.get("eval", {})
        base_eval = base.eval if class_names == base.class_names else EvalConfig(
            class_names=class_names,
            iou_thresholds={name: 0.5 for name in class_names},
            class_merge={},
        )
        eval_config = EvalConfig(
            class_names=class_names,
            iou_thresholds=dict(ev_doc.get("iou_thresholds", base_eval.iou_thresholds)),
            class_merge=dict(ev_doc.get("class_merge", base_eval.class_merge)),
            orientation_gate=ev_doc.get("orientation_gate", base_eval.orientation_gate),
            recall_count=ev_doc.get("recall_count", 50),
            recall_start=ev_doc.get("recall_start", 0.02),
            recall_step=ev_doc.get("recall_step", 0.02),
            distance_edges=tuple(ev_doc.get("distance_buckets", base_eval.distance_edges)),
            difficulty=ev_doc.get("difficulty", base_eval.difficulty),
            matching_iou=ev_doc.get("matching_iou", base_eval.matching_iou),
        )
        aug_doc = doc.get("augmentation", {})
        return cls(
            grid=grid,
            class_names=class_names,
            attr_dim=doc.get("attr_dim", base.attr_dim),
            corners=doc.get("corners", base.corners),
            loss_weights=loss_weights,
            eval=eval_config,
            sample_counts=tuple(
                aug_doc.get("sample_counts", [1] * len(class_names))
                if class_names != base.class_names
                else aug_doc.get("sample_counts", DEFAULT_SAMPLE_COUNTS)
            ),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ToolkitConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def once_config() -> ToolkitConfig:
    """Five ONCE classes on the 188 x 188 default grid."""
    return ToolkitConfig(
        grid=GridSpec(
            range=(-75.2, -75.2, -5.0, 75.2, 75.2, 3.0),
            voxel_size=(0.1, 0.1, 0.2),
            max_points_per_voxel=5,
        ),
        class_names=("car", "bus", "truck", "pedestrian", "cyclist"),
        eval=EvalConfig(),
    )


def waymo_config() -> ToolkitConfig:
    """Waymo classes, z range, thresholds and difficulty levels."""
    return ToolkitConfig(
        grid=GridSpec(
            range=(-75.2, -75.2, -2.0, 75.2, 75.2, 4.0),
            voxel_size=(0.1, 0.1, 0.15),
            max_points_per_voxel=5,
        ),
        class_names=("vehicle", "pedestrian", "cyclist"),
        eval=waymo_eval_config(),
        sample_counts=(1, 2, 2),
    )


def preset(name: str) -> ToolkitConfig:
    presets = {"once": once_config, "waymo": waymo_config}
    if name not in presets:
        raise ValueError(f"unknown preset {name!r}; available: {sorted(presets)}")
    return presets[name]()
