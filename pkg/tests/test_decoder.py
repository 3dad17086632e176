import numpy as np
import pytest

from bevkit.decoder import Detection, bev_nms, decode_boxes, extract_peaks
from bevkit.geometry import Box3D, PointCloud
from bevkit.metrics import iou_bev
from bevkit.targets import build_targets, gaussian_splat
from bevkit.voxelizer import GridSpec

GRID = GridSpec(
    range=(-75.2, -75.2, -5.0, 75.2, 75.2, 3.0),
    voxel_size=(0.1, 0.1, 0.2),
    max_points_per_voxel=5,
)


class TestExtractPeaks:
    def test_all_zero(self):
        assert extract_peaks(np.zeros((10, 10, 2)), k=5, threshold=0.1) == []

    def test_single_splat_center(self):
        hm = np.zeros((20, 20, 1))
        gaussian_splat(hm[:, :, 0], (7, 11), r=2)
        peaks = extract_peaks(hm, k=10, threshold=0.1)
        assert peaks == [(7, 11, 0, 1.0)]

    def test_fifty_separated_impulses(self):
        rng = np.random.default_rng(9)
        hm = np.zeros((64, 64, 1))
        cells = [(3 * r + 1, 3 * c + 1) for r in range(10) for c in range(10)]
        chosen = rng.choice(len(cells), size=50, replace=False)
        expected = set()
        for idx in chosen:
            r, c = cells[idx]
            score = float(rng.uniform(0.3, 1.0))
            hm[r, c, 0] = score
            expected.add((r, c))
        peaks = extract_peaks(hm, k=50, threshold=0.05)
        assert {(p[0], p[1]) for p in peaks} == expected

    def test_threshold_filters(self):
        hm = np.zeros((10, 10, 1))
        hm[2, 2, 0] = 0.4
        hm[7, 7, 0] = 0.8
        assert len(extract_peaks(hm, k=10, threshold=0.5)) == 1

    def test_top_k_and_tie_order(self):
        hm = np.zeros((10, 10, 2))
        hm[1, 1, 0] = 0.5
        hm[1, 1, 1] = 0.5
        hm[5, 5, 0] = 0.5
        peaks = extract_peaks(hm, k=2, threshold=0.0)
        assert peaks == [(1, 1, 0, 0.5), (1, 1, 1, 0.5)]

    def test_plateau_is_not_strict_peak(self):
        hm = np.zeros((10, 10, 1))
        hm[4, 4, 0] = hm[4, 5, 0] = 0.6
        assert extract_peaks(hm, k=10, threshold=0.1) == []

    def test_invalid_threshold(self):
        with pytest.raises(ValueError):
            extract_peaks(np.zeros((4, 4, 1)), k=1, threshold=1.5)


class TestDecodeBoxes:
    def test_round_trip_single_box(self):
        box = Box3D((12.3, -41.7, -0.8), (1.9, 4.4, 1.6), 0.77, class_id=2)
        bundle = build_targets([box], PointCloud.empty(), GRID, 3, 5)
        peaks = extract_peaks(bundle.center_heatmap, k=5, threshold=0.5)
        dets, dropped = decode_boxes(peaks, bundle.center_regression, GRID)
        assert dropped == 0 and len(dets) == 1
        det = dets[0]
        assert det.class_id == 2
        np.testing.assert_allclose(det.box.center, box.center, atol=1e-4)
        np.testing.assert_allclose(det.box.dims, box.dims, rtol=1e-5)
        assert abs(det.box.yaw - box.yaw) < 1e-6

    def test_yaw_inversion(self):
        reg = np.zeros((4, 4, 8))
        reg[..., 3:6] = np.log(2.0)
        reg[1, 1, 6:8] = (0.0, 1.0)   # sin, cos -> yaw 0
        reg[2, 2, 6:8] = (1.0, 0.0)   # -> yaw pi/2
        spec = GridSpec(range=(0, 0, 0, 4, 4, 2), voxel_size=(1, 1, 1), out_factor=1)
        dets, _ = decode_boxes([(1, 1, 0, 0.9), (2, 2, 0, 0.8)], reg, spec)
        assert dets[0].box.yaw == 0.0
        assert dets[1].box.yaw == pytest.approx(np.pi / 2)

    def test_nonfinite_dropped(self):
        reg = np.zeros((4, 4, 8))
        reg[1, 1, 3] = np.nan
        spec = GridSpec(range=(0, 0, 0, 4, 4, 2), voxel_size=(1, 1, 1), out_factor=1)
        dets, dropped = decode_boxes([(1, 1, 0, 0.9)], reg, spec)
        assert dets == [] and dropped == 1

    def test_scale_consistency(self):
        reg = np.zeros((4, 4, 8))
        reg[1, 1, 3:6] = np.log((1.5, 3.0, 1.2))
        reg[1, 1, 7] = 1.0
        spec = GridSpec(range=(0, 0, 0, 4, 4, 2), voxel_size=(1, 1, 1), out_factor=1)
        base, _ = decode_boxes([(1, 1, 0, 1.0)], reg, spec)
        scaled_reg = reg.copy()
        scaled_reg[1, 1, 3:6] += np.log(2.5)
        scaled, _ = decode_boxes([(1, 1, 0, 1.0)], scaled_reg, spec)
        np.testing.assert_allclose(scaled[0].box.dims, 2.5 * base[0].box.dims, rtol=1e-12)

    def test_bad_regression_shape(self):
        with pytest.raises(ValueError):
            decode_boxes([], np.zeros((4, 4, 7)), GRID)


def _make_detection(rng, class_id=None):
    box = Box3D(
        center=rng.uniform(-20, 20, 3) * [1, 1, 0.05],
        dims=rng.uniform(1, 4, 3),
        yaw=rng.uniform(-np.pi, np.pi),
        class_id=int(rng.integers(0, 3)) if class_id is None else class_id,
    )
    return Detection(box=box, score=float(rng.uniform(0.05, 1.0)), class_id=box.class_id)


def reference_nms(detections, threshold, class_agnostic=False):
    """Independent quadratic greedy pass for comparison."""
    order = sorted(range(len(detections)), key=lambda i: (-detections[i].score, i))
    keep = []
    for i in order:
        ok = True
        for j in keep:
            same = class_agnostic or detections[j].class_id == detections[i].class_id
            if same and iou_bev(detections[j].box, detections[i].box) > threshold:
                ok = False
                break
        if ok:
            keep.append(i)
    return [detections[i] for i in keep]


class TestBevNms:
    def test_single_detection(self):
        rng = np.random.default_rng(1)
        det = _make_detection(rng)
        assert bev_nms([det], 0.5) == [det]

    def test_identical_boxes_keep_higher_score(self):
        box = Box3D((0, 0, 0), (2, 4, 1.5), 0.3, class_id=0)
        hi = Detection(box=box, score=0.9, class_id=0)
        lo = Detection(box=box, score=0.8, class_id=0)
        kept = bev_nms([lo, hi], 0.5)
        assert kept == [hi]

    def test_different_classes_not_suppressed(self):
        box = Box3D((0, 0, 0), (2, 4, 1.5), 0.3)
        a = Detection(box=box, score=0.9, class_id=0)
        b = Detection(box=box.with_class(1), score=0.8, class_id=1)
        assert len(bev_nms([a, b], 0.5)) == 2
        assert len(bev_nms([a, b], 0.5, class_agnostic=True)) == 1

    def test_hundred_random_matches_reference(self):
        rng = np.random.default_rng(123)
        dets = [_make_detection(rng) for _ in range(100)]
        for thr in (0.1, 0.5, 0.7):
            got = bev_nms(dets, thr)
            want = reference_nms(dets, thr)
            assert [id(d) for d in got] == [id(d) for d in want]

    def test_invalid_threshold(self):
        with pytest.raises(ValueError):
            bev_nms([], 1.2)
