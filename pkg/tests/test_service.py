import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

from bevkit.config import once_config
from bevkit.geometry import Box3D, Frame, PointCloud, from_local
from bevkit.losses import focal_loss
from bevkit.service import create_app
from bevkit.service.models import (
    FrameModel,
    b64_cloud,
    b64_tensor,
    cloud_from_b64,
    tensor_from_b64,
)
from bevkit.targets import build_targets
from bevkit.tensorio import decode_tns1
from bevkit.voxelizer import voxelize


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture(scope="module")
def config():
    return once_config()


def sample_frame(config, n_boxes=3, seed=0):
    rng = np.random.default_rng(seed)
    boxes, clouds = [], []
    for _ in range(n_boxes):
        box = Box3D(
            center=rng.uniform(-40, 40, 3) * [1, 1, 0.02],
            dims=rng.uniform(1.2, 4.0, 3),
            yaw=rng.uniform(-np.pi, np.pi),
            class_id=int(rng.integers(0, 5)),
        )
        pts = from_local(rng.uniform(-0.45, 0.45, (40, 3)) * box.dims, box)
        clouds.append(np.concatenate([pts, rng.uniform(0, 1, (40, 1))], axis=1))
        boxes.append(box)
    data = np.concatenate(clouds).astype(np.float32).astype(np.float64)
    return Frame("s0", PointCloud(data, attr_dim=1), boxes)


class TestHealthAndConfig:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"

    def test_presets(self, client):
        once = client.get("/config/presets/once").json()
        assert once["classes"][0] == "car"
        assert client.get("/config/presets/kitti").status_code == 404


class TestVoxelizeEndpoint:
    def test_matches_library(self, client, config):
        frame = sample_frame(config)
        response = client.post(
            "/voxelize",
            json={
                "config": config.to_dict(),
                "cloud_b64": b64_cloud(frame.cloud),
                "seed": 4,
            },
        ).json()
        direct = voxelize(frame.cloud, config.grid, seed=4)
        assert response["num_voxels"] == len(direct)
        np.testing.assert_array_equal(
            tensor_from_b64(response["indices_b64"]), direct.indices.astype(np.float64)
        )
        np.testing.assert_array_equal(
            tensor_from_b64(response["blocks_b64"]), direct.point_blocks
        )

    def test_bad_payload_is_400(self, client, config):
        response = client.post(
            "/voxelize",
            json={
                "config": config.to_dict(),
                "cloud_b64": base64.b64encode(b"\x00" * 10).decode(),
            },
        )
        assert response.status_code == 400
        assert "float32" in response.json()["detail"]


class TestTargetsEndpoint:
    def test_matches_library_bytes(self, client, config):
        frame = sample_frame(config, seed=3)
        model = FrameModel.from_frame(frame, config)
        response = client.post(
            "/targets/build",
            json={"config": config.to_dict(), "frame": model.model_dump(by_alias=True)},
        ).json()
        # round-trip the frame exactly as the service sees it
        served = model.to_frame(config)
        bundle = build_targets(
            served.boxes, served.cloud, config.grid, config.corners, config.num_classes
        )
        for name, tensor in bundle.tensors().items():
            got = tensor_from_b64(response["tensors"][name])
            np.testing.assert_array_equal(got, tensor)

    def test_unknown_class_rejected(self, client, config):
        frame = {
            "frame_id": "x",
            "cloud_b64": "",
            "boxes": [
                {
                    "frame_id": "x",
                    "class": "spaceship",
                    "cx": 0,
                    "cy": 0,
                    "cz": 0,
                    "w": 1,
                    "l": 1,
                    "h": 1,
                    "yaw": 0,
                }
            ],
        }
        response = client.post(
            "/targets/build", json={"config": config.to_dict(), "frame": frame}
        )
        assert response.status_code == 400
        assert "spaceship" in response.json()["detail"]


class TestLossEndpoints:
    def test_focal_matches_library(self, client):
        rng = np.random.default_rng(8)
        pred = rng.uniform(0.05, 0.95, (8, 8, 2))
        target = rng.uniform(0, 0.9, (8, 8, 2))
        target[1, 1, 0] = 1.0
        response = client.post(
            "/losses/focal",
            json={
                "pred_b64": b64_tensor(pred),
                "target_b64": b64_tensor(target),
                "with_grad": True,
            },
        ).json()
        value, grad = focal_loss(pred, target)
        assert response["value"] == pytest.approx(value, rel=1e-12)
        np.testing.assert_array_equal(tensor_from_b64(response["grad_b64"]), grad)

    def test_l1_requires_mask(self, client):
        x = b64_tensor(np.zeros((2, 2, 2)))
        response = client.post("/losses/l1", json={"pred_b64": x, "target_b64": x})
        assert response.status_code == 422

    def test_shape_mismatch_400(self, client):
        response = client.post(
            "/losses/focal",
            json={
                "pred_b64": b64_tensor(np.zeros((2, 2, 1))),
                "target_b64": b64_tensor(np.zeros((2, 3, 1))),
            },
        )
        assert response.status_code == 400
        assert "shape mismatch" in response.json()["detail"]

    def test_total(self, client):
        response = client.post(
            "/losses/total",
            json={"center_cls": 1, "center_reg": 1, "corner_cls": 1, "corner_reg": 1},
        ).json()
        assert response["total"] == pytest.approx(1.75)


class TestDecodeAndEvaluate:
    def test_decode_round_trip(self, client, config):
        box = Box3D((10.0, -20.0, -0.5), (2.0, 4.5, 1.6), 0.6, class_id=0)
        bundle = build_targets([box], PointCloud.empty(1), config.grid, 3, 5)
        response = client.post(
            "/decode",
            json={
                "config": config.to_dict(),
                "heatmap_b64": b64_tensor(bundle.center_heatmap),
                "regression_b64": b64_tensor(bundle.center_regression),
                "threshold": 0.5,
                "frame_id": "f9",
            },
        ).json()
        assert response["dropped"] == 0
        assert len(response["detections"]) == 1
        det = response["detections"][0]
        assert det["class"] == "car"
        assert det["frame_id"] == "f9"
        assert det["cx"] == pytest.approx(10.0, abs=1e-4)
        assert det["yaw"] == pytest.approx(0.6, abs=1e-6)

    def test_evaluate_once_perfect(self, client, config):
        rows = [
            {
                "frame_id": "a",
                "class": "car",
                "cx": 5.0,
                "cy": 0.0,
                "cz": 0.0,
                "w": 2.0,
                "l": 4.0,
                "h": 1.5,
                "yaw": 0.2,
            }
        ]
        dets = [dict(rows[0], score=0.9)]
        response = client.post(
            "/evaluate",
            json={
                "config": config.to_dict(),
                "dataset": "once",
                "detections": dets,
                "ground_truths": rows,
            },
        ).json()
        assert response["report"]["classes"]["vehicle"]["ap"] == 1.0
        assert "overall" in response["table"]

    def test_evaluate_waymo_needs_point_counts(self, client):
        waymo = client.get("/config/presets/waymo").json()
        gt = {
            "frame_id": "a",
            "class": "vehicle",
            "cx": 5.0,
            "cy": 0.0,
            "cz": 0.0,
            "w": 2.0,
            "l": 4.0,
            "h": 1.5,
            "yaw": 0.0,
        }
        response = client.post(
            "/evaluate",
            json={
                "config": waymo,
                "dataset": "waymo",
                "detections": [],
                "ground_truths": [gt],
            },
        )
        assert response.status_code == 400
        response = client.post(
            "/evaluate",
            json={
                "config": waymo,
                "dataset": "waymo",
                "detections": [dict(gt, score=0.8)],
                "ground_truths": [dict(gt, num_points=12)],
            },
        ).json()
        level1 = response["report"]["levels"]["LEVEL_1"]["classes"]["vehicle"]
        assert level1["ap"] == 1.0 and level1["aph"] == 1.0


class TestAugmentEndpoints:
    def test_build_db_and_sample(self, client, config):
        frame = sample_frame(config, seed=5)
        model = FrameModel.from_frame(frame, config).model_dump(by_alias=True)
        db_response = client.post(
            "/augment/build-db", json={"config": config.to_dict(), "frames": [model]}
        ).json()
        assert len(db_response["entries"]) == len(frame.boxes)
        empty = {"frame_id": "t", "cloud_b64": "", "boxes": []}
        response = client.post(
            "/augment",
            json={
                "config": config.to_dict(),
                "frame": empty,
                "seed": 1,
                "db_entries": db_response["entries"],
                "apply_global": False,
            },
        ).json()
        assert response["pasted"] > 0
        assert len(response["frame"]["boxes"]) == response["pasted"]

    def test_global_deterministic(self, client, config):
        frame = sample_frame(config, seed=6)
        model = FrameModel.from_frame(frame, config).model_dump(by_alias=True)
        payload = {"config": config.to_dict(), "frame": model, "seed": 3}
        a = client.post("/augment", json=payload).json()
        b = client.post("/augment", json=payload).json()
        assert a["frame"]["cloud_b64"] == b["frame"]["cloud_b64"]
        assert a["frame"]["boxes"] == b["frame"]["boxes"]


class TestSynthEndpoints:
    def test_fixture_list_and_fetch(self, client, config):
        names = client.get("/synth/fixtures").json()
        assert "single-quadrant" in names
        frame = client.get("/synth/fixture/single-quadrant").json()
        cloud = cloud_from_b64(frame["cloud_b64"], config.attr_dim)
        assert len(cloud) > 0
        assert client.get("/synth/fixture/bogus").status_code == 404

    def test_scene(self, client, config):
        box = {
            "frame_id": "s",
            "class": "car",
            "cx": 20.0,
            "cy": 0.0,
            "cz": 0.0,
            "w": 4.0,
            "l": 4.0,
            "h": 2.0,
            "yaw": 0.0,
        }
        response = client.post(
            "/synth/scene",
            json={
                "config": config.to_dict(),
                "boxes": [box],
                "sensor": {"azimuth_count": 360, "elevation_angles": [0.0]},
            },
        ).json()
        ids = tensor_from_b64(response["box_ids_b64"])
        assert (ids == 0).all() and len(ids) > 0


class TestHeatmapEndpoint:
    def test_pgm(self, client):
        hm = np.zeros((4, 6, 2))
        hm[1, 2, 1] = 1.0
        response = client.post(
            "/heatmap/pgm", json={"tns1_b64": b64_tensor(hm), "channel": 1}
        ).json()
        pgm = base64.b64decode(response["pgm_b64"])
        assert pgm.startswith(b"P5\n6 4\n255\n")
        assert response["height"] == 4 and response["width"] == 6

    def test_channel_out_of_range(self, client):
        hm = np.zeros((4, 6, 2))
        response = client.post(
            "/heatmap/pgm", json={"tns1_b64": b64_tensor(hm), "channel": 5}
        )
        assert response.status_code == 422


def test_decode_tns1_payload_passthrough():
    # the b64 helpers speak exactly the on-disk container
    arr = np.arange(6, dtype=np.float32).reshape(2, 3)
    blob = base64.b64decode(b64_tensor(arr))
    np.testing.assert_array_equal(decode_tns1(blob), arr)
