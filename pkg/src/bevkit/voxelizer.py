"""Point-to-grid assignment, per-voxel sampling, and BEV shape arithmetic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import PointCloud

# Config arithmetic tolerates float noise: 150.4 / 0.8 may land a hair below
# the integer it equals in exact arithmetic.
_DIM_SNAP = 1e-9


def _cells(extent: float, cell: float) -> int:
    return int(np.floor(extent / cell + _DIM_SNAP))


@dataclass(frozen=True)
class GridSpec:
    """Regular voxel grid over a fixed detection range.

    range is (x_min, y_min, z_min, x_max, y_max, z_max); the BEV feature map
    runs at out_factor-downsampled resolution.
    """

    range: tuple[float, float, float, float, float, float]
    voxel_size: tuple[float, float, float] = (0.1, 0.1, 0.2)
    max_points_per_voxel: int = 5
    out_factor: int = 8
    max_voxels: int | None = None

    def __post_init__(self):
        lo, hi = np.array(self.range[:3]), np.array(self.range[3:])
        if not (hi > lo).all():
            raise ValueError(f"range max must exceed min per axis: {self.range}")
        if not (np.array(self.voxel_size) > 0).all():
            raise ValueError("voxel_size must be positive")
        if self.max_points_per_voxel < 1:
            raise ValueError("max_points_per_voxel must be >= 1")
        if self.out_factor < 1:
            raise ValueError("out_factor must be >= 1")
        if any(n < 1 for n in self.grid_shape):
            raise ValueError("grid must contain at least one voxel per axis")

    @property
    def grid_shape(self) -> tuple[int, int, int]:
        """Voxel counts (nx, ny, nz)."""
        return tuple(
            _cells(self.range[3 + i] - self.range[i], self.voxel_size[i])
            for i in range(3)
        )

    @property
    def bev_cell_size(self) -> tuple[float, float]:
        return (
            self.voxel_size[0] * self.out_factor,
            self.voxel_size[1] * self.out_factor,
        )


@dataclass
class VoxelSet:
    """Sparse occupied voxels: integer indices, fixed-size sampled point blocks.

    point_blocks is V x T x (3 + m) float32; rows past counts[v] are zero.
    """

    indices: np.ndarray
    point_blocks: np.ndarray
    counts: np.ndarray

    def __len__(self) -> int:
        return self.indices.shape[0]

    @classmethod
    def empty(cls, spec: GridSpec, attr_dim: int = 0) -> "VoxelSet":
        t = spec.max_points_per_voxel
        return cls(
            indices=np.zeros((0, 3), dtype=np.int64),
            point_blocks=np.zeros((0, t, 3 + attr_dim), dtype=np.float32),
            counts=np.zeros(0, dtype=np.int64),
        )


def _axis_indices(xyz: np.ndarray, spec: GridSpec) -> np.ndarray:
    lo = np.array(spec.range[:3])
    size = np.array(spec.voxel_size)
    return np.floor((xyz - lo) / size).astype(np.int64)


def voxel_index(p, spec: GridSpec) -> tuple[int, int, int] | None:
    """Voxel index triple of a single point, or None when outside the grid."""
    idx = _axis_indices(np.asarray(p, dtype=np.float64).reshape(1, 3), spec)[0]
    if ((idx < 0) | (idx >= np.array(spec.grid_shape))).any():
        return None
    return (int(idx[0]), int(idx[1]), int(idx[2]))


def bev_shape(spec: GridSpec) -> tuple[int, int]:
    """(H, W) of the BEV map; H indexes y, W indexes x."""
    h = _cells(spec.range[4] - spec.range[1], spec.voxel_size[1] * spec.out_factor)
    w = _cells(spec.range[3] - spec.range[0], spec.voxel_size[0] * spec.out_factor)
    return (h, w)


def fused_channel_count(f: int, num_classes: int, n_corners: int) -> int:
    """Channel count after concatenating backbone features with corner maps."""
    if min(f, num_classes, n_corners) < 0:
        raise ValueError("channel counts must be non-negative")
    return f + num_classes * n_corners + 2 * n_corners


def _sample_without_replacement(count: int, take: int, rng) -> np.ndarray:
    # Fisher-Yates prefix: uniform subset, deterministic per rng state.
    pool = np.arange(count)
    for i in range(take):
        j = int(rng.integers(i, count))
        pool[i], pool[j] = pool[j], pool[i]
    sel = pool[:take]
    sel.sort()
    return sel


def voxelize(cloud: PointCloud, spec: GridSpec, seed: int = 0) -> VoxelSet:
    """Group in-range points into voxels, sampling down to T points per voxel.

    Overfull voxels keep a seeded uniform subset of size T (original relative
    order); underfull voxels are zero-padded. Output is deterministic for a
    fixed (cloud order, spec, seed) and voxels are sorted by flat grid index.
    """
    t = spec.max_points_per_voxel
    attr_dim = cloud.attr_dim
    if len(cloud) == 0:
        return VoxelSet.empty(spec, attr_dim)

    nx, ny, nz = spec.grid_shape
    idx = _axis_indices(cloud.xyz, spec)
    in_range = ((idx >= 0) & (idx < np.array([nx, ny, nz]))).all(axis=1)
    if not in_range.any():
        return VoxelSet.empty(spec, attr_dim)

    idx = idx[in_range]
    data = cloud.data[in_range]
    flat = (idx[:, 0] * ny + idx[:, 1]) * nz + idx[:, 2]

    # single stable sort groups points by voxel, preserving cloud order within
    order = np.argsort(flat, kind="stable")
    sorted_flat = flat[order]
    change = np.empty(len(sorted_flat), dtype=bool)
    change[0] = True
    np.not_equal(sorted_flat[1:], sorted_flat[:-1], out=change[1:])
    starts = np.flatnonzero(change)
    uniq = sorted_flat[starts]
    n_groups = len(uniq)
    group_sizes = np.diff(np.append(starts, len(sorted_flat)))
    sorted_group = np.cumsum(change) - 1
    pos = np.arange(len(order)) - starts[sorted_group]

    n_keep = n_groups
    if spec.max_voxels is not None:
        n_keep = min(n_groups, spec.max_voxels)

    keep = (pos < t) & (sorted_group < n_keep)
    rng = np.random.default_rng(seed)
    for v in np.nonzero(group_sizes[:n_keep] > t)[0]:
        size = int(group_sizes[v])
        grp_keep = np.zeros(size, dtype=bool)
        grp_keep[_sample_without_replacement(size, t, rng)] = True
        keep[starts[v] : starts[v] + size] = grp_keep

    # Block row of each kept point = its rank among kept points of its group.
    cum_kept = np.cumsum(keep)
    kept_before = np.zeros(n_groups, dtype=np.int64)
    kept_before[1:] = cum_kept[starts[1:] - 1]
    new_pos = (cum_kept - 1) - kept_before[sorted_group]

    blocks = np.zeros((n_keep, t, 3 + attr_dim), dtype=np.float32)
    blocks[sorted_group[keep], new_pos[keep]] = data[order[keep]]
    counts = np.minimum(group_sizes[:n_keep], t).astype(np.int64)
    uniq = uniq[:n_keep]
    indices = np.stack(
        [uniq // (ny * nz), (uniq // nz) % ny, uniq % nz], axis=1
    ).astype(np.int64)
    return VoxelSet(indices=indices, point_blocks=blocks, counts=counts)
