import numpy as np
import pytest

from bevkit.config import ToolkitConfig, once_config, preset, waymo_config
from bevkit.geometry import Box3D, Frame, PointCloud
from bevkit.tensorio import (
    DataFormatError,
    boxes_to_rows,
    decode_tns1,
    encode_tns1,
    heatmap_to_pgm,
    read_boxes_jsonl,
    read_frame,
    read_point_cloud_bin,
    read_tns1,
    write_boxes_jsonl,
    write_frame,
    write_point_cloud_bin,
    write_tns1,
)

CLASSES = ("car", "bus", "truck", "pedestrian", "cyclist")


class TestPointCloudBin:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        data = rng.normal(size=(50, 4)).astype(np.float32).astype(np.float64)
        cloud = PointCloud(data, attr_dim=1)
        path = tmp_path / "c.bin"
        write_point_cloud_bin(path, cloud)
        back = read_point_cloud_bin(path, attr_dim=1)
        np.testing.assert_array_equal(back.data, cloud.data)

    def test_bad_size(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"\x00" * 10)
        with pytest.raises(DataFormatError):
            read_point_cloud_bin(path, attr_dim=1)


class TestTns1:
    @pytest.mark.parametrize(
        "array",
        [
            np.arange(24, dtype=np.float32).reshape(2, 3, 4),
            np.linspace(-1, 1, 10, dtype=np.float64).reshape(5, 2),
            (np.arange(6) % 2).astype(np.uint8).reshape(3, 2),
            np.zeros((0, 3), dtype=np.float32),
        ],
    )
    def test_round_trip(self, array, tmp_path):
        path = tmp_path / "t.tns1"
        write_tns1(path, array)
        back = read_tns1(path)
        assert back.dtype == array.dtype
        np.testing.assert_array_equal(back, array)

    def test_bool_stored_as_u8(self):
        blob = encode_tns1(np.array([[True, False]]))
        back = decode_tns1(blob)
        assert back.dtype == np.uint8
        np.testing.assert_array_equal(back, [[1, 0]])

    def test_little_endian_layout(self):
        blob = encode_tns1(np.array([1.0], dtype=np.float32))
        assert blob[:4] == b"TNS1"
        assert blob[4:8] == (1).to_bytes(4, "little")   # rank
        assert blob[8:12] == (1).to_bytes(4, "little")  # dim 0
        assert blob[12:16] == (0).to_bytes(4, "little")  # dtype f32
        assert blob[16:20] == np.float32(1.0).tobytes()

    def test_bad_magic_offset_zero(self):
        with pytest.raises(DataFormatError) as err:
            decode_tns1(b"NOPE" + b"\x00" * 16)
        assert err.value.offset == 0

    def test_truncated_payload(self):
        blob = encode_tns1(np.zeros(4, dtype=np.float32))
        with pytest.raises(DataFormatError):
            decode_tns1(blob[:-2])

    def test_unknown_dtype_code(self):
        blob = bytearray(encode_tns1(np.zeros(2, dtype=np.float32)))
        blob[12] = 9
        with pytest.raises(DataFormatError):
            decode_tns1(bytes(blob))

    def test_unsupported_dtype_rejected(self):
        with pytest.raises(ValueError):
            encode_tns1(np.zeros(3, dtype=np.int64))


class TestBoxesJsonl:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        boxes = [
            Box3D(
                center=rng.uniform(-50, 50, 3),
                dims=rng.uniform(0.5, 5, 3),
                yaw=rng.uniform(-np.pi, np.pi),
                class_id=int(rng.integers(0, 5)),
            )
            for _ in range(10)
        ]
        scores = rng.uniform(0, 1, 10)
        rows = boxes_to_rows("frame7", boxes, CLASSES, scores=scores)
        path = tmp_path / "d.jsonl"
        write_boxes_jsonl(path, rows)
        records = read_boxes_jsonl(path, CLASSES)
        assert len(records) == 10
        for rec, box, score in zip(records, boxes, scores):
            assert rec["frame_id"] == "frame7"
            np.testing.assert_allclose(rec["box"].center, box.center)
            np.testing.assert_allclose(rec["box"].dims, box.dims)
            assert rec["box"].yaw == pytest.approx(box.yaw)
            assert rec["box"].class_id == box.class_id
            assert rec["score"] == pytest.approx(score)

    def test_unknown_class(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(
            '{"frame_id":"a","class":"boat","cx":0,"cy":0,"cz":0,"w":1,"l":1,"h":1,"yaw":0}\n'
        )
        with pytest.raises(DataFormatError, match="unknown class"):
            read_boxes_jsonl(path, CLASSES)

    def test_invalid_json_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text("{not json}\n")
        with pytest.raises(DataFormatError, match="invalid JSON"):
            read_boxes_jsonl(path, CLASSES)

    def test_nonfinite_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(
            '{"frame_id":"a","class":"car","cx":null,"cy":0,"cz":0,"w":1,"l":1,"h":1,"yaw":0}\n'
        )
        with pytest.raises(DataFormatError):
            read_boxes_jsonl(path, CLASSES)

    def test_empty_annotations_valid(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert read_boxes_jsonl(path, CLASSES) == []

    def test_num_points_carried(self, tmp_path):
        path = tmp_path / "g.jsonl"
        path.write_text(
            '{"frame_id":"a","class":"car","cx":1,"cy":2,"cz":0,"w":1,"l":2,"h":1,"yaw":0.5,"num_points":17}\n'
        )
        rec = read_boxes_jsonl(path, CLASSES)[0]
        assert rec["num_points"] == 17


class TestFrameIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        data = rng.normal(size=(30, 4)).astype(np.float32).astype(np.float64)
        frame = Frame(
            frame_id="f1",
            cloud=PointCloud(data, attr_dim=1),
            boxes=[Box3D((1, 2, 0), (2, 4, 1.5), 0.3, class_id=1)],
        )
        write_frame(frame, tmp_path / "f.bin", tmp_path / "f.jsonl", CLASSES)
        back = read_frame(tmp_path / "f.bin", tmp_path / "f.jsonl", 1, CLASSES)
        assert back.frame_id == "f1"
        np.testing.assert_array_equal(back.cloud.data, frame.cloud.data)
        assert len(back.boxes) == 1
        np.testing.assert_allclose(back.boxes[0].center, (1, 2, 0))


class TestPgm:
    def test_header_and_payload(self):
        channel = np.array([[0.0, 1.0], [0.5, 0.25]])
        blob = heatmap_to_pgm(channel)
        assert blob.startswith(b"P5\n2 2\n255\n")
        payload = blob.split(b"255\n", 1)[1]
        assert list(payload) == [0, 255, 128, 64]

    def test_requires_2d(self):
        with pytest.raises(ValueError):
            heatmap_to_pgm(np.zeros((2, 2, 2)))


class TestConfig:
    def test_round_trip(self, tmp_path):
        config = once_config()
        config.save(tmp_path / "c.json")
        back = ToolkitConfig.load(tmp_path / "c.json")
        assert back.class_names == config.class_names
        assert back.grid == config.grid
        assert back.eval.iou_thresholds == config.eval.iou_thresholds
        assert back.sample_counts == config.sample_counts
        assert back.loss_weights == config.loss_weights

    def test_presets(self):
        assert preset("once").class_names[0] == "car"
        assert preset("waymo").eval.difficulty == "waymo"
        with pytest.raises(ValueError):
            preset("kitti")

    def test_defaults(self):
        config = once_config()
        assert config.corners == 3
        assert config.sample_counts == (1, 4, 3, 2, 2)
        assert config.loss_weights.gamma == 0.25
        assert config.loss_weights.lam == 0.25

    def test_partial_document_fills_defaults(self):
        config = ToolkitConfig.from_dict({"corners": 2})
        assert config.corners == 2
        assert config.class_names == once_config().class_names

    def test_waymo_grid(self):
        assert waymo_config().grid.range[2] == -2.0
        assert waymo_config().eval.iou_thresholds["pedestrian"] == 0.5
