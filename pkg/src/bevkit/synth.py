"""Deterministic synthetic LiDAR scenes: ray-cast visible box surfaces from a
sensor origin to produce partial point clouds with known visibility."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Box3D, Frame, PointCloud, from_local, to_local, yaw_rotation

FIXTURE_VERSION = 1

# Hit points are pulled fractionally inside the box so membership tests stay
# true through round-trip frame transforms.
_INSET = 1e-11


@dataclass(frozen=True)
class SensorSpec:
    """A spinning range sensor: evenly spaced azimuths x fixed elevation rings."""

    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    azimuth_count: int = 512
    elevation_angles: tuple[float, ...] = (0.0,)
    max_range: float = 100.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.azimuth_count < 1 or len(self.elevation_angles) < 1:
            raise ValueError("need at least one azimuth and one elevation ring")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be >= 0")

    @property
    def ring_count(self) -> int:
        return len(self.elevation_angles)


def _slab_entry_distances(o_local, d_local, half) -> np.ndarray:
    """Entry distance per ray into an axis-aligned box (inf where missed)."""
    parallel = np.abs(d_local) < 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lo = (-half - o_local) / d_local
        t_hi = (half - o_local) / d_local
    near = np.where(parallel, -np.inf, np.minimum(t_lo, t_hi))
    far = np.where(parallel, np.inf, np.maximum(t_lo, t_hi))
    parallel_miss = (parallel & (np.abs(o_local) > half)).any(axis=1)
    t_near = np.maximum(near.max(axis=1), 0.0)
    t_far = far.min(axis=1)
    hit = ~parallel_miss & (t_near <= t_far) & (t_near > 0.0)
    return np.where(hit, t_near, np.inf)


def raycast_scene(boxes, sensor: SensorSpec):
    """Nearest-surface returns for every (azimuth, elevation) ray.

    Returns (cloud, box_ids): an N x 4 cloud whose attribute column is the
    hit range normalized by max_range, plus the index of the box each point
    landed on. Output order is azimuth-major; with noise_sigma > 0 a seeded
    Gaussian range perturbation is applied along each ray.
    """
    origin = np.asarray(sensor.origin, dtype=np.float64)
    for i, box in enumerate(boxes):
        local = (origin - box.center) @ yaw_rotation(box.yaw)
        if (np.abs(local) <= 0.5 * box.dims).all():
            raise ValueError(f"sensor origin lies inside box {i}")

    azimuths = 2.0 * np.pi * np.arange(sensor.azimuth_count) / sensor.azimuth_count
    elevations = np.asarray(sensor.elevation_angles, dtype=np.float64)
    az = np.repeat(azimuths, len(elevations))
    el = np.tile(elevations, sensor.azimuth_count)
    dirs = np.stack(
        [np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=1
    )

    n_rays = len(dirs)
    best_t = np.full(n_rays, np.inf)
    best_i = np.full(n_rays, -1, dtype=np.int64)
    for i, box in enumerate(boxes):
        rot = yaw_rotation(box.yaw)
        t = _slab_entry_distances(
            (origin - box.center) @ rot, dirs @ rot, 0.5 * box.dims
        )
        closer = t < best_t
        best_t[closer] = t[closer]
        best_i[closer] = i

    hit = (best_i >= 0) & (best_t <= sensor.max_range)
    t = best_t[hit]
    ids = best_i[hit]
    if sensor.noise_sigma > 0.0:
        rng = np.random.default_rng(sensor.seed)
        t = np.maximum(t + rng.normal(0.0, sensor.noise_sigma, size=t.shape), 1e-6)
    raw = origin + t[:, None] * dirs[hit]
    points = np.empty((len(t), 3))
    for i, box in enumerate(boxes):
        sel = ids == i
        if sel.any():
            points[sel] = from_local(to_local(raw[sel], box) * (1.0 - _INSET), box)
    cloud = PointCloud(
        np.concatenate([points, (t / sensor.max_range)[:, None]], axis=1),
        attr_dim=1,
    )
    return cloud, ids


# ---------------------------------------------------------------------------
# Canonical fixtures (versioned; regenerating differently breaks baselines)


def _fixture_sensor(**overrides) -> SensorSpec:
    base = dict(
        origin=(0.0, 0.0, 0.0),
        azimuth_count=2048,
        elevation_angles=tuple(np.linspace(-0.045, 0.03, 6)),
        max_range=90.0,
        noise_sigma=0.0,
        seed=7,
    )
    base.update(overrides)
    return SensorSpec(**base)


def _boxes_single_quadrant():
    # The occluder blanks the lower half of the target's sensor-facing face,
    # leaving returns only in local quadrant 0.
    target = Box3D(center=(30.0, 0.0, 0.0), dims=(4.0, 6.0, 2.0), yaw=0.0, class_id=0)
    occluder = Box3D(center=(15.0, -0.9, 0.0), dims=(1.0, 2.0, 3.0), yaw=0.0, class_id=3)
    return [target, occluder]


def _boxes_two_face():
    return [Box3D(center=(22.0, 18.0, 0.0), dims=(4.0, 5.0, 2.0), yaw=0.35, class_id=0)]


def _boxes_occluded():
    front = Box3D(center=(14.0, 0.0, 0.0), dims=(5.0, 5.0, 3.5), yaw=0.0, class_id=1)
    rear = Box3D(center=(32.0, 0.0, 0.0), dims=(4.0, 4.0, 2.0), yaw=0.2, class_id=0)
    return [front, rear]


def _boxes_far_sparse():
    return [Box3D(center=(70.0, 24.0, 0.0), dims=(1.0, 1.0, 1.8), yaw=1.1, class_id=3)]


def _boxes_zero_point():
    # Beyond max range: annotated but never hit.
    visible = Box3D(center=(20.0, -8.0, 0.0), dims=(4.0, 5.0, 2.0), yaw=-0.4, class_id=0)
    unreachable = Box3D(center=(72.0, -72.0, 0.0), dims=(4.0, 5.0, 2.0), yaw=0.9, class_id=2)
    return [visible, unreachable]


_FIXTURES = {
    "single-quadrant": _boxes_single_quadrant,
    "two-face": _boxes_two_face,
    "occluded": _boxes_occluded,
    "far-sparse": _boxes_far_sparse,
    "zero-point": _boxes_zero_point,
    "empty": lambda: [],
}


def fixture_names() -> list[str]:
    return sorted(_FIXTURES)


def fixture_boxes(name: str) -> list[Box3D]:
    if name not in _FIXTURES:
        raise ValueError(f"unknown fixture {name!r}; available: {fixture_names()}")
    return _FIXTURES[name]()


def make_fixture(name: str) -> Frame:
    """Byte-stable canonical frame for regression tests."""
    boxes = fixture_boxes(name)
    cloud, _ = raycast_scene(boxes, _fixture_sensor())
    return Frame(frame_id=f"fixture-{name}-v{FIXTURE_VERSION}", cloud=cloud, boxes=boxes)
