"""File formats: raw float32 point clouds, the TNS1 tensor container,
JSON-lines annotations/detections, and PGM heatmap dumps.

Everything on disk is little-endian and byte-stable across platforms.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .geometry import Box3D, Frame, PointCloud

TNS1_MAGIC = b"TNS1"
_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("u1")}
_CODE_FOR_KIND = {"f4": 0, "f8": 1, "u1": 2}


class DataFormatError(Exception):
    """Malformed or inconsistent on-disk data; offset is in bytes when known."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


# ---------------------------------------------------------------------------
# Point cloud .bin (raw little-endian float32 rows of 3 + m scalars)


def read_point_cloud_bin(path, attr_dim: int) -> PointCloud:
    raw = Path(path).read_bytes()
    width = 3 + attr_dim
    if len(raw) % (4 * width) != 0:
        raise DataFormatError(
            f"{path}: size {len(raw)} is not a multiple of {4 * width} "
            f"(rows of {width} float32)",
        )
    data = np.frombuffer(raw, dtype="<f4").reshape(-1, width)
    return PointCloud(data.astype(np.float64), attr_dim)


def write_point_cloud_bin(path, cloud: PointCloud) -> None:
    Path(path).write_bytes(cloud.data.astype("<f4").tobytes())


# ---------------------------------------------------------------------------
# TNS1 tensor container


def encode_tns1(array: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(array)
    if arr.dtype == np.bool_:
        arr = arr.astype(np.uint8)
    kind = arr.dtype.newbyteorder("<").str.lstrip("<|=")
    if kind not in _CODE_FOR_KIND:
        raise ValueError(f"unsupported dtype {arr.dtype} (use f32, f64 or u8)")
    header = TNS1_MAGIC + struct.pack("<I", arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    header += struct.pack("<I", _CODE_FOR_KIND[kind])
    return header + arr.astype(f"<{kind}").tobytes()


def decode_tns1(blob: bytes) -> np.ndarray:
    if len(blob) < 8:
        raise DataFormatError("TNS1 blob shorter than fixed header", offset=0)
    if blob[:4] != TNS1_MAGIC:
        raise DataFormatError(f"bad magic {blob[:4]!r}, expected {TNS1_MAGIC!r}", offset=0)
    (rank,) = struct.unpack_from("<I", blob, 4)
    if rank > 32:
        raise DataFormatError(f"implausible rank {rank}", offset=4)
    dims_end = 8 + 4 * rank
    if len(blob) < dims_end + 4:
        raise DataFormatError("truncated TNS1 header", offset=len(blob))
    dims = struct.unpack_from(f"<{rank}I", blob, 8)
    (dtype_code,) = struct.unpack_from("<I", blob, dims_end)
    if dtype_code not in _DTYPE_CODES:
        raise DataFormatError(f"unknown dtype code {dtype_code}", offset=dims_end)
    dtype = _DTYPE_CODES[dtype_code]
    payload_start = dims_end + 4
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if len(blob) - payload_start != expected:
        raise DataFormatError(
            f"payload is {len(blob) - payload_start} bytes, expected {expected}",
            offset=payload_start,
        )
    return np.frombuffer(blob[payload_start:], dtype=dtype).reshape(dims).copy()


def write_tns1(path, array: np.ndarray) -> None:
    Path(path).write_bytes(encode_tns1(array))


def read_tns1(path) -> np.ndarray:
    return decode_tns1(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# Annotations / detections as JSON lines


def _box_record(frame_id: str, box: Box3D, class_name: str) -> dict:
    return {
        "frame_id": frame_id,
        "class": class_name,
        "cx": box.center[0],
        "cy": box.center[1],
        "cz": box.center[2],
        "w": box.w,
        "l": box.l,
        "h": box.h,
        "yaw": box.yaw,
    }


def write_boxes_jsonl(path, rows: list[dict]) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def boxes_to_rows(frame_id, boxes, class_names, scores=None, num_points=None):
    rows = []
    for i, box in enumerate(boxes):
        row = _box_record(frame_id, box, class_names[box.class_id])
        if scores is not None:
            row["score"] = float(scores[i])
        if num_points is not None and num_points[i] is not None:
            row["num_points"] = int(num_points[i])
        rows.append(row)
    return rows


def read_boxes_jsonl(path, class_names) -> list[dict]:
    """Parse box records, resolving class names to ids.

    Returns dicts with keys frame_id, box, and optionally score / num_points.
    """
    name_to_id = {name: i for i, name in enumerate(class_names)}
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                class_name = row["class"]
                if class_name not in name_to_id:
                    raise DataFormatError(
                        f"{path}:{lineno}: unknown class {class_name!r} "
                        f"(configured: {list(class_names)})"
                    )
                box = Box3D(
                    center=(row["cx"], row["cy"], row["cz"]),
                    dims=(row["w"], row["l"], row["h"]),
                    yaw=row["yaw"],
                    class_id=name_to_id[class_name],
                )
            except DataFormatError:
                raise
            except (KeyError, TypeError, ValueError) as exc:
                raise DataFormatError(f"{path}:{lineno}: bad box record: {exc}") from exc
            record = {"frame_id": row.get("frame_id", ""), "box": box}
            if "score" in row:
                record["score"] = float(row["score"])
            if "num_points" in row:
                record["num_points"] = int(row["num_points"])
            records.append(record)
    return records


def read_frame(cloud_path, boxes_path, attr_dim: int, class_names, frame_id=None) -> Frame:
    """Load a frame from its cloud file plus annotation lines."""
    cloud = read_point_cloud_bin(cloud_path, attr_dim)
    boxes = []
    fid = frame_id
    if boxes_path is not None:
        for record in read_boxes_jsonl(boxes_path, class_names):
            boxes.append(record["box"])
            if fid is None and record["frame_id"]:
                fid = record["frame_id"]
    return Frame(frame_id=fid or Path(cloud_path).stem, cloud=cloud, boxes=boxes)


def write_frame(frame: Frame, cloud_path, boxes_path, class_names) -> None:
    write_point_cloud_bin(cloud_path, frame.cloud)
    write_boxes_jsonl(
        boxes_path, boxes_to_rows(frame.frame_id, frame.boxes, class_names)
    )


# ---------------------------------------------------------------------------
# PGM heatmap dump


def heatmap_to_pgm(channel: np.ndarray) -> bytes:
    """Render one [0, 1] heatmap channel as a binary (P5) PGM image."""
    if channel.ndim != 2:
        raise ValueError(f"expected a 2D channel, got shape {channel.shape}")
    levels = np.clip(np.round(np.asarray(channel, dtype=np.float64) * 255), 0, 255)
    h, w = channel.shape
    return f"P5\n{w} {h}\n255\n".encode() + levels.astype(np.uint8).tobytes()
