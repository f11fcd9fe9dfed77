import numpy as np
import pytest

from lfdepth.lightfield import (LightField, ViewCombination, ViewIndexError, auxiliary_views,
                                base_grid, combination_views, enumerate_combinations,
                                finalize_disparity, rotate_inputs, warp_source_to_center,
                                warp_view_to_center)
from lfdepth.synthetic import generate_synthetic, single_plane_spec
from oracles import bilinear_reference


def test_lightfield_validation():
    with pytest.raises(ValueError, match="odd"):
        LightField(np.zeros((6, 7, 4, 4, 1), dtype=np.float32))
    with pytest.raises(ValueError, match="0,1"):
        LightField(np.full((3, 3, 4, 4, 1), 2.0, dtype=np.float32))
    with pytest.raises(ValueError, match="U,V,X,Y,C"):
        LightField(np.zeros((3, 3, 4, 4), dtype=np.float32))


class TestExtractView:
    def test_center_matches_generator(self, plane2_scene):
        lf, _, _ = plane2_scene
        assert np.array_equal(lf.center_view(), lf.extract_view(3, 3))

    def test_out_of_range(self, plane2_scene):
        lf, _, _ = plane2_scene
        with pytest.raises(ViewIndexError):
            lf.extract_view(lf.u_count, 0)

    def test_constant_disparity_view_is_shifted_center(self, plane2_scene):
        # (u_c-3, v_c) sees the center shifted by 3*d = 6 along x
        lf, _, _ = plane2_scene
        view = lf.extract_view(0, 3)
        center = lf.center_view()
        np.testing.assert_array_equal(view[6:, :], center[:-6, :])

    def test_returns_copy(self, plane2_scene):
        lf, _, _ = plane2_scene
        v = lf.extract_view(0, 0)
        v[0, 0] = 0.0  # must not raise (the container itself is read-only)


class TestCombinations:
    def test_seven_by_seven_offsets_123_gives_six(self, plane2_scene):
        lf, _, _ = plane2_scene
        assert len(enumerate_combinations(lf, [1, 2, 3])) == 6

    def test_dense_mode_offsets_23_gives_four(self, plane2_scene):
        lf, _, _ = plane2_scene
        combos = enumerate_combinations(lf, [3, 2])
        assert len(combos) == 4
        rows = [c for c in combos if c.orientation == "row"]
        assert {(c.left, c.right) for c in rows} == {((0, 3), (6, 3)), ((1, 3), (5, 3))}

    def test_three_by_three_offset_1(self):
        lf = LightField(np.zeros((3, 3, 4, 4, 1), dtype=np.float32))
        assert len(enumerate_combinations(lf, [1])) == 2

    def test_count_and_symmetry_property(self, plane2_scene):
        lf, _, _ = plane2_scene
        for offsets in ([1], [2, 3], [1, 2, 3]):
            combos = enumerate_combinations(lf, offsets)
            assert len(combos) == 2 * len(offsets)
            for c in combos:
                assert (c.left[0] + c.right[0], c.left[1] + c.right[1]) == \
                       (2 * c.center[0], 2 * c.center[1])

    def test_offset_too_large(self, plane2_scene):
        lf, _, _ = plane2_scene
        with pytest.raises(ValueError, match="exceeds"):
            enumerate_combinations(lf, [4])

    def test_asymmetric_combination_rejected(self):
        with pytest.raises(ValueError, match="symmetric"):
            ViewCombination((0, 3), (3, 3), (5, 3), "row", 3)


class TestRotateInputs:
    def test_row_passthrough(self, plane2_scene):
        lf, _, _ = plane2_scene
        combo = enumerate_combinations(lf, [2])[0]
        views = combination_views(lf, combo)
        out = rotate_inputs(views, "row")
        for a, b in zip(views, out):
            assert np.array_equal(a, b)

    def test_column_rotation_makes_vertical_shift_horizontal(self, plane2_scene):
        # after rotation, the left view must lead the center by d*b along x,
        # exactly like a row combination (d=2, b=1 here)
        lf, _, _ = plane2_scene
        combo = [c for c in enumerate_combinations(lf, [1]) if c.orientation == "column"][0]
        left, center, right = rotate_inputs(combination_views(lf, combo), "column")
        np.testing.assert_array_equal(center[:-2, :], left[2:, :])
        np.testing.assert_array_equal(center[2:, :], right[:-2, :])

    def test_rotation_round_trip(self, plane2_scene):
        lf, _, _ = plane2_scene
        img = lf.center_view()
        rotated = rotate_inputs([img], "column")[0]
        back = np.rot90(rotated, k=1, axes=(0, 1))
        assert np.array_equal(back, img)


class TestWarpSourceToCenter:
    def test_zero_disparity_is_identity(self, plane2_scene):
        lf, _, _ = plane2_scene
        img = lf.extract_view(1, 2)
        out = warp_source_to_center(img, np.zeros(img.shape[:2], np.float32), "left")
        np.testing.assert_array_equal(out, img)

    def test_constant_image_stays_constant(self):
        img = np.full((8, 8, 1), 0.6, np.float32)
        d = np.random.default_rng(0).uniform(-3, 3, (8, 8)).astype(np.float32)
        for side in ("left", "right"):
            out = warp_source_to_center(img, d, side)
            np.testing.assert_allclose(out, 0.6, atol=1e-6)

    def test_horizontal_ramp_shift(self):
        x_len = 16
        ramp = (np.arange(x_len, dtype=np.float32) / (x_len - 1))[:, None, None]
        img = np.broadcast_to(ramp, (x_len, 8, 1)).copy()
        d = np.ones((x_len, 8), np.float32)
        out = warp_source_to_center(img, d, "left")
        expected = bilinear_reference(np.moveaxis(img, -1, 0).astype(np.float64),
                                      *[g + (1.0 if i == 0 else 0.0)
                                        for i, g in enumerate(base_grid((x_len, 8), np.float64))])
        np.testing.assert_allclose(out[..., 0], expected[0], atol=1e-6)
        np.testing.assert_allclose(out[:-1, :, 0], img[1:, :, 0], atol=1e-6)

    def test_side_validation(self):
        with pytest.raises(ValueError, match="side"):
            warp_source_to_center(np.zeros((4, 4, 1), np.float32), np.zeros((4, 4)), "up")

    def test_gt_warp_reproduces_center(self, plane2_scene):
        lf, gt, _ = plane2_scene
        center = lf.center_view()
        combo = enumerate_combinations(lf, [1])[0]
        left = lf.extract_view(*combo.left)
        out = warp_source_to_center(left, gt * combo.baseline, "left")
        err = np.abs(out - center)[2:-2, 2:-2]
        assert err.mean() < 1e-3


class TestFinalizeDisparity:
    def test_row_baseline3_scaling(self, plane2_scene):
        lf, _, _ = plane2_scene
        combo = [c for c in enumerate_combinations(lf, [3]) if c.orientation == "row"][0]
        d = np.full((8, 8), 3.0, np.float32)
        np.testing.assert_allclose(finalize_disparity(d, combo), 1.0)

    def test_baseline1_identity(self, plane2_scene):
        lf, _, _ = plane2_scene
        combo = [c for c in enumerate_combinations(lf, [1]) if c.orientation == "row"][0]
        d = np.random.default_rng(0).standard_normal((8, 8)).astype(np.float32)
        np.testing.assert_array_equal(finalize_disparity(d, combo), d)

    def test_column_round_trip(self, plane2_scene):
        lf, _, _ = plane2_scene
        combo = [c for c in enumerate_combinations(lf, [2]) if c.orientation == "column"][0]
        d = np.random.default_rng(1).standard_normal((6, 6)).astype(np.float32)
        out = finalize_disparity(d, combo)
        # re-rotating the finalized map into the estimation frame recovers d / b
        np.testing.assert_allclose(np.rot90(out, k=-1), d / 2.0, atol=1e-7)

    def test_column_on_synthetic_scene(self, plane2_scene, oracle_net):
        from lfdepth.pipeline import estimate_combination
        lf, gt, _ = plane2_scene
        combo = [c for c in enumerate_combinations(lf, [2]) if c.orientation == "column"][0]
        d_hat = estimate_combination(oracle_net, lf, combo)
        err = np.abs(d_hat - gt)[4:-4, 4:-4]
        assert np.median(err) < 0.1


class TestAuxiliaryViews:
    def test_diag12(self, plane2_scene):
        lf, _, _ = plane2_scene
        views = auxiliary_views(lf, "diag12")
        assert len(views) == 12
        assert all(abs(u - 3) == abs(v - 3) for u, v in views)

    def test_default16(self, plane2_scene):
        lf, _, _ = plane2_scene
        views = auxiliary_views(lf, "default16")
        assert len(views) == 16
        assert set(auxiliary_views(lf, "diag12")) < set(views)

    def test_duplicate_rejected(self, plane2_scene):
        lf, _, _ = plane2_scene
        with pytest.raises(ValueError, match="duplicate"):
            auxiliary_views(lf, [(1, 1), (1, 1)])

    def test_center_rejected(self, plane2_scene):
        lf, _, _ = plane2_scene
        with pytest.raises(ValueError, match="central"):
            auxiliary_views(lf, [(3, 3)])

    def test_out_of_bounds_rejected(self, plane2_scene):
        lf, _, _ = plane2_scene
        with pytest.raises(ViewIndexError):
            auxiliary_views(lf, [(7, 0)])

    def test_exclusion(self, plane2_scene):
        lf, _, _ = plane2_scene
        views = auxiliary_views(lf, "default16", exclude=[(2, 3), (4, 3), (3, 2), (3, 4)])
        assert len(views) == 12


def test_warp_view_to_center_matches_eq1_on_synthetic(plane2_scene):
    lf, gt, masks = plane2_scene
    center = lf.center_view()
    for (u, v) in [(1, 1), (5, 2), (6, 6)]:
        warped = warp_view_to_center(lf.extract_view(u, v), gt, 3 - u, 3 - v)
        err = np.abs(warped - center)[..., 0]
        assert err[~masks[u, v]].max() < 1e-6
