import numpy as np
import pytest
import torch

from cpmask.exceptions import GeometryError, MalformedAnnotationError, ShapeMismatchError
from cpmask.maskops import Box, decode_rle, encode_rle, extract_boundary, make_roi_targets, mask_iou, resample_to_roi, roi_align, roi_align_batch


class TestRLE:
    def test_empty_and_full(self):
        assert encode_rle(np.zeros((2, 2), bool)) == [4]
        assert encode_rle(np.ones((2, 2), bool)) == [0, 4]
        assert not decode_rle([4], 2, 2).any()
        assert decode_rle([0, 4], 2, 2).all()

    def test_column_major(self):
        mask = np.array([[1, 0], [0, 0]], bool)
        assert encode_rle(mask) == [0, 1, 3]
        mask = np.array([[0, 1], [0, 0]], bool)
        assert encode_rle(mask) == [2, 1, 1]

    def test_random_roundtrip(self):
        for seed in range(100):
            mask = np.random.default_rng(seed).random((8, 8)) < 0.4
            np.testing.assert_array_equal(decode_rle(encode_rle(mask), 8, 8), mask)

    def test_count_mismatch_names_annotation(self):
        with pytest.raises(MalformedAnnotationError, match="annotation 17"):
            decode_rle([3], 2, 2, annotation_id=17)

    def test_negative_counts(self):
        with pytest.raises(MalformedAnnotationError):
            decode_rle([5, -1], 2, 2)


class TestBoundary:
    def test_ring(self):
        edge = extract_boundary(np.ones((3, 3)))
        expected = np.ones((3, 3), bool)
        expected[1, 1] = False
        np.testing.assert_array_equal(edge, expected)

    def test_single_pixel_and_empty(self):
        mask = np.zeros((5, 5))
        assert not extract_boundary(mask).any()
        mask[2, 2] = 1
        np.testing.assert_array_equal(extract_boundary(mask), mask.astype(bool))

    def test_subset_and_monotone(self, rng):
        yy, xx = np.mgrid[:32, :32]
        for _ in range(10):
            cy, cx, r = rng.uniform(8, 24), rng.uniform(8, 24), rng.uniform(3, 10)
            mask = ((yy - cy) ** 2 + (xx - cx) ** 2 <= r * r).astype(float)
            prev = extract_boundary(mask, 0.5, 1)
            assert not (prev & ~(mask >= 0.5)).any()
            for width in range(2, 5):
                cur = extract_boundary(mask, 0.5, width)
                assert not (prev & ~cur).any()
                assert not (cur & ~(mask >= 0.5)).any()
                prev = cur

    def test_soft_threshold(self):
        mask = np.full((4, 4), 0.4)
        assert not extract_boundary(mask, 0.5).any()
        assert extract_boundary(mask, 0.3).sum() == 12

    def test_invalid_width(self):
        with pytest.raises(ValueError):
            extract_boundary(np.ones((2, 2)), width=0)


class TestIoU:
    def test_values(self):
        a = np.zeros((2, 2), bool)
        b = np.zeros((2, 2), bool)
        a[0, 0] = a[0, 1] = True
        b[0, 1] = b[1, 1] = True
        assert mask_iou(a, b) == pytest.approx(1 / 3)
        assert mask_iou(b, a) == pytest.approx(1 / 3)
        assert mask_iou(a, a) == 1.0
        assert mask_iou(a, ~a) == 0.0
        assert mask_iou(np.zeros((3, 3)), np.zeros((3, 3))) == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            mask_iou(np.zeros((2, 2)), np.zeros((2, 3)))


class TestBox:
    def test_degenerate(self):
        with pytest.raises(GeometryError):
            Box(0, 0, 0, 5)
        with pytest.raises(GeometryError):
            Box(0, 0, 5, -1)

    def test_outside_image(self):
        with pytest.raises(GeometryError):
            Box(20, 20, 5, 5).validate(10, 10)

    def test_from_mask(self):
        mask = np.zeros((10, 10), bool)
        mask[2:5, 3:9] = True
        assert Box.from_mask(mask) == Box(3, 2, 6, 3)

    def test_clip(self):
        assert Box(-2, 3, 6, 10).clip(8, 8) == Box(0, 3, 4, 5)


class TestResample:
    def test_constant(self):
        box = Box(1.3, 2.7, 5.1, 3.3)
        np.testing.assert_allclose(resample_to_roi(np.ones((10, 10)), box, 4), 1.0)
        np.testing.assert_allclose(resample_to_roi(np.zeros((10, 10)), box, 4), 0.0)

    def test_half_split(self):
        mask = np.zeros((8, 8))
        mask[:, :4] = 1
        out = resample_to_roi(mask, Box(0, 0, 8, 8), 2)
        np.testing.assert_allclose(out, [[1, 0], [1, 0]])

    def test_mass_preserved(self, rng):
        for _ in range(20):
            mask = (rng.random((16, 16)) < 0.5).astype(float)
            x, y = rng.integers(0, 8, size=2)
            w, h = rng.integers(4, 9, size=2)
            out = resample_to_roi(mask, Box(x, y, w, h), 4)
            assert out.mean() == pytest.approx(mask[y:y + h, x:x + w].mean(), abs=1e-6)

    def test_supersampling_oracle(self):
        mask = np.zeros((6, 6))
        mask[1:4, 2:5] = 1
        out = resample_to_roi(mask, Box(1, 1, 4, 4), 2)
        ref = np.array([[mask[1:3, 1:3].mean(), mask[1:3, 3:5].mean()], [mask[3:5, 1:3].mean(), mask[3:5, 3:5].mean()]])
        np.testing.assert_allclose(out, ref)

    def test_degenerate_box(self):
        with pytest.raises(GeometryError):
            resample_to_roi(np.ones((4, 4)), Box(10, 10, 2, 2), 2)


class TestRoIAlign:
    def test_constant(self):
        feats = np.full((2, 6, 6), 3.5)
        np.testing.assert_allclose(roi_align(feats, Box(0.5, 1.2, 3.3, 2.2), 4), 3.5)

    def test_affine_exact(self, rng):
        H, W = 12, 10
        yy, xx = np.mgrid[:H, :W]
        feats = np.stack([xx + 0.5, yy + 0.5, 2 * (xx + 0.5) - 3 * (yy + 0.5) + 1]).astype(np.float64)
        for _ in range(20):
            x, y = rng.uniform(0, W - 2), rng.uniform(0, H - 2)
            w, h = rng.uniform(0.5, W - x), rng.uniform(0.5, H - y)
            out = roi_align(feats, Box(x, y, w, h), 5)
            cx = x + (np.arange(5) + 0.5) * w / 5
            cy = y + (np.arange(5) + 0.5) * h / 5
            np.testing.assert_allclose(out[0], np.broadcast_to(cx, (5, 5)), atol=1e-6)
            np.testing.assert_allclose(out[1], np.broadcast_to(cy[:, None], (5, 5)), atol=1e-6)
            np.testing.assert_allclose(out[2], 2 * cx[None, :] - 3 * cy[:, None] + 1, atol=1e-6)

    def test_identity(self):
        feats = np.random.default_rng(0).random((3, 5, 5))
        np.testing.assert_allclose(roi_align(feats, Box(0, 0, 5, 5), 5), feats, atol=1e-12)

    def test_spatial_scale(self):
        feats = np.random.default_rng(0).random((2, 4, 4))
        np.testing.assert_allclose(roi_align(feats, Box(0, 0, 16, 16), 4, 0.25), feats, atol=1e-12)

    def test_torch_gradient_flows(self):
        feats = torch.rand(2, 6, 6, requires_grad=True)
        out = roi_align_batch(feats, [Box(0, 0, 3, 3), Box(2, 2, 4, 4)], 3)
        assert out.shape == (2, 2, 3, 3)
        out.sum().backward()
        assert feats.grad is not None and torch.isfinite(feats.grad).all()


class TestTargets:
    def test_inside_and_outside(self):
        mask = np.zeros((20, 20), bool)
        mask[2:18, 2:18] = True
        inside = make_roi_targets(mask, Box(5, 5, 8, 8), 8, 4)
        assert inside.fg_indices.size == 16 and inside.bg_indices.size == 0
        assert not inside.affinity_valid
        mask = np.zeros((20, 20), bool)
        mask[:2, :2] = True
        outside = make_roi_targets(mask, Box(8, 8, 8, 8), 8, 4)
        assert outside.fg_indices.size == 0 and not outside.affinity_valid
        assert not outside.boundary_target.any()

    def test_quarter_square(self):
        mask = np.zeros((64, 64), bool)
        mask[24:40, 24:40] = True
        targets = make_roi_targets(mask, Box(16, 16, 32, 32), 16, 8)
        assert abs(targets.fg_indices.size - 0.25 * 8 ** 2) <= 2
        assert set(targets.fg_indices) | set(targets.bg_indices) == set(range(8 * 8))
        assert not set(targets.fg_indices) & set(targets.bg_indices)
        assert targets.affinity_valid
        assert targets.mask_target.shape == (16, 16)
        assert not (targets.boundary_target & ~(targets.mask_target >= 0.5)).any()
        np.testing.assert_array_equal(targets.fg_mask().nonzero()[0], targets.fg_indices)

    def test_threshold_range(self):
        with pytest.raises(ValueError):
            make_roi_targets(np.ones((4, 4), bool), Box(0, 0, 4, 4), 4, 2, fg_threshold=0)
