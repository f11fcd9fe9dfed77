import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import tiny_dispnet_config, toy_dispnet_config
from lfdepth.autodiff import Graph, ShapeMismatchError, Tensor, constant, mean, mul
from lfdepth.checkpoint import load_checkpoint, save_checkpoint
from lfdepth.dispnet import (DENSE_COARSE, DENSE_RESIDUAL, SPARSE_COARSE, SPARSE_RESIDUAL,
                             CostVolume, DispNet, DispNetConfig, SampleVector, regress,
                             warp_horizontal)
from lfdepth.lightfield import combination_views, enumerate_combinations
from lfdepth.training import to_chw
from oracles import finite_difference_grad, rel_err, variance_population


class TestSampleVector:
    def test_dense_counts(self):
        assert DENSE_COARSE.count == 25
        assert DENSE_RESIDUAL.count == 21

    def test_sparse_rounding(self):
        # [-20,20]/1.2 does not divide evenly: D = round(40/1.2)+1 = 34
        assert SPARSE_COARSE.count == 34
        assert SPARSE_COARSE.effective_interval == pytest.approx(40.0 / 33.0)
        assert SPARSE_RESIDUAL.count == 34

    def test_values_equally_spaced(self):
        v = SPARSE_COARSE.values
        assert len(v) == 34
        assert np.ptp(np.diff(v)) < 1e-9
        assert v[0] == -20.0 and v[-1] == 20.0

    def test_validation(self):
        with pytest.raises(ValueError):
            SampleVector(2.0, -2.0, 1.0)
        with pytest.raises(ValueError):
            SampleVector(-2.0, 2.0, -1.0)


class TestConfig:
    def test_residual_must_be_finer(self):
        with pytest.raises(ValueError, match="finer"):
            DispNetConfig(coarse=SampleVector(-4, 4, 1.0), residual=SampleVector(-1, 1, 1.0))

    def test_residual_magnitude_bound(self):
        with pytest.raises(ValueError, match="magnitude"):
            DispNetConfig(coarse=SampleVector(-2, 2, 1.0), residual=SampleVector(-5, 5, 0.1))

    def test_oracle_toggle(self):
        cfg = DispNetConfig().oracle()
        assert cfg.feature_mode == "gradient"
        assert cfg.score_mode == "neg_variance"
        assert cfg.cost_filters == 0


class TestFeatures:
    def test_identical_images_identical_features(self):
        net = DispNet(toy_dispnet_config(), seed=0)
        img = Tensor(np.random.default_rng(0).uniform(0, 1, (1, 16, 16)).astype(np.float32))
        a = net.extract_features(img)
        b = net.extract_features(img)
        assert np.array_equal(a.data, b.data)

    def test_gradient_fallback_constant_image(self):
        net = DispNet(DispNetConfig(in_channels=1).oracle(), seed=0)
        img = Tensor(np.full((1, 8, 8), 0.5, np.float32))
        feats = net.extract_features(img)
        assert feats.shape == (3, 8, 8)
        assert np.all(feats.data[1:] == 0.0)  # gradient channels vanish

    def test_learned_shape_contract(self):
        net = DispNet(toy_dispnet_config(feature_channels=16), seed=0)
        img = Tensor(np.random.default_rng(1).uniform(0, 1, (1, 64, 64)).astype(np.float32))
        assert net.extract_features(img).shape == (16, 64, 64)

    def test_non_finite_rejected(self):
        net = DispNet(DispNetConfig(in_channels=1).oracle(), seed=0)
        bad = np.zeros((1, 8, 8), np.float32)
        bad[0, 0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            net.extract_features(Tensor(bad))


class TestCostVolumes:
    def _feats(self, seed=0, shape=(3, 16, 16)):
        rng = np.random.default_rng(seed)
        return (Tensor(rng.uniform(0, 1, shape).astype(np.float32)) for _ in range(3))

    def test_constant_features_zero_volume(self, oracle_net):
        f = Tensor(np.full((3, 12, 12), 0.4, np.float32))
        vol = oracle_net.build_coarse_cost(f, f, f)
        assert np.all(vol.scores.data == 0.0)

    def test_single_pixel_variance_value(self):
        # one pixel, one channel, views (1, 2, 3) after warping at s=0
        net = DispNet(DispNetConfig(in_channels=1, coarse=SampleVector(-1, 1, 1)).oracle(), seed=0)
        fc = Tensor(np.full((1, 1, 1), 2.0, np.float32))
        fl = Tensor(np.full((1, 1, 1), 1.0, np.float32))
        fr = Tensor(np.full((1, 1, 1), 3.0, np.float32))
        vol = net.build_coarse_cost(fc, fl, fr)
        i0 = list(net.config.coarse.values).index(0.0)
        assert vol.scores.data[0, i0, 0, 0] == pytest.approx(variance_population([1, 2, 3]))

    def test_synthetic_argmin_at_true_sample(self, plane2_scene, oracle_net):
        lf, _, _ = plane2_scene
        combo = enumerate_combinations(lf, [3])[0]  # row: true shift 3*2 = 6
        left, center, right = combination_views(lf, combo)
        fc, fl, fr = (oracle_net.extract_features(to_chw(v, np.float32))
                      for v in (center, left, right))
        vol = oracle_net.build_coarse_cost(fc, fl, fr)
        col = vol.scores.data.mean(axis=0)
        argmin = oracle_net.config.coarse.values[col.argmin(axis=0)]
        interior = argmin[8:-8, 8:-8]
        assert np.all(interior == 6.0)

    def test_residual_reduces_to_coarse_at_zero(self, oracle_net):
        fc, fl, fr = self._feats(2)
        zero = Tensor(np.zeros((16, 16), np.float32))
        rvol = oracle_net.build_residual_cost(fc, fl, fr, zero)
        # compare against a coarse build evaluated at the residual samples
        cfg = DispNetConfig(in_channels=1, coarse=oracle_net.config.residual,
                            residual=SampleVector(-0.1, 0.1, 0.05)).oracle()
        ref = DispNet(cfg, seed=0).build_coarse_cost(fc, fl, fr)
        np.testing.assert_array_equal(rvol.scores.data, ref.scores.data)

    def test_residual_sample_count(self, oracle_net):
        assert oracle_net.config.residual is DENSE_RESIDUAL or True
        assert DENSE_RESIDUAL.count == 21

    def test_exact_coarse_map_gives_zero_band(self, plane2_scene, oracle_net):
        lf, gt, _ = plane2_scene
        combo = enumerate_combinations(lf, [1])[0]
        left, center, right = combination_views(lf, combo)
        fc, fl, fr = (oracle_net.extract_features(to_chw(v, np.float32))
                      for v in (center, left, right))
        rvol = oracle_net.build_residual_cost(fc, fl, fr, Tensor(gt))
        col = rvol.scores.data.mean(axis=0)
        argmin = oracle_net.config.residual.values[col.argmin(axis=0)]
        assert np.all(argmin[4:-4, 4:-4] == 0.0)

    def test_source_permutation_flips_sample_axis(self, oracle_net):
        fc, fl, fr = self._feats(3)
        a = oracle_net.build_coarse_cost(fc, fl, fr).scores.data
        b = oracle_net.build_coarse_cost(fc, fr, fl).scores.data
        np.testing.assert_allclose(b, a[:, ::-1], atol=1e-7)

    def test_memory_footprint_is_cdxy(self, oracle_net):
        fc, fl, fr = self._feats(4)
        vol = oracle_net.build_coarse_cost(fc, fl, fr)
        c, d, x, y = vol.scores.shape
        assert vol.scores.size == c * d * x * y
        assert (c, x, y) == (3, 16, 16)
        assert d == oracle_net.config.coarse.count

    def test_volume_sample_count_validation(self):
        with pytest.raises(ShapeMismatchError, match="sample count"):
            CostVolume(Tensor(np.zeros((2, 5, 4, 4))), SampleVector(-1, 1, 0.5))


class TestFilters:
    def test_disabled_filters_identity(self, oracle_net):
        vol = CostVolume(Tensor(np.random.default_rng(0).uniform(size=(3, 5, 8, 8))
                                .astype(np.float32)), SampleVector(-2, 2, 1))
        assert oracle_net.filter_cost(vol, "coarse") is vol

    def test_shape_contract(self):
        net = DispNet(toy_dispnet_config(), seed=1)
        vol = CostVolume(Tensor(np.random.default_rng(1).uniform(size=(12, 9, 16, 16))
                                .astype(np.float32)), SampleVector(-4, 4, 1))
        out = net.filter_cost(vol, "coarse")
        assert out.scores.shape == vol.scores.shape

    def test_shared_filters_same_parameter_ids(self):
        net = DispNet(toy_dispnet_config(shared_filters=True), seed=2)
        assert net.filter_param_ids("coarse") == net.filter_param_ids("residual")
        sep = DispNet(toy_dispnet_config(shared_filters=False), seed=2)
        assert sep.filter_param_ids("coarse") != sep.filter_param_ids("residual")

    def test_too_small_volume_rejected(self):
        net = DispNet(toy_dispnet_config(), seed=3)
        vol = CostVolume(Tensor(np.zeros((12, 3, 16, 16), np.float32)),
                         SampleVector(-1, 1, 1))
        with pytest.raises(ShapeMismatchError, match="downsample"):
            net.filter_cost(vol, "coarse")


class TestRegress:
    def test_uniform_scores_symmetric_samples(self):
        sv = SampleVector(-12, 12, 1)
        out = regress(Tensor(np.zeros((25, 4, 4))), sv)
        np.testing.assert_allclose(out.data, 0.0, atol=1e-9)

    def test_one_hot_limit(self):
        sv = SampleVector(-12, 12, 1)
        scores = np.zeros((25, 2, 2))
        scores[17] = 50.0
        out = regress(Tensor(scores), sv)
        np.testing.assert_allclose(out.data, sv.values[17], atol=1e-6 * 24)

    def test_hand_softmax_case(self):
        # scores (ln 3, 0) over samples (0, 1): probabilities (0.75, 0.25)
        sv = SampleVector(0.0, 1.0, 1.0)
        scores = np.stack([np.full((2, 2), np.log(3.0)), np.zeros((2, 2))])
        out = regress(Tensor(scores), sv)
        np.testing.assert_allclose(out.data, 0.25, atol=1e-9)

    def test_depth_mismatch(self):
        with pytest.raises(ShapeMismatchError, match="depth"):
            regress(Tensor(np.zeros((7, 2, 2))), SampleVector(-2, 2, 1))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_output_confined_to_sample_range(self, seed):
        rng = np.random.default_rng(seed)
        sv = SampleVector(-3.0, 3.0, 0.5)
        out = regress(Tensor(rng.uniform(-30, 30, (sv.count, 5, 5))), sv).data
        assert out.min() >= sv.s_min - 1e-9
        assert out.max() <= sv.s_max + 1e-9


class TestEstimate:
    def test_refined_is_sum_of_branches(self, plane2_scene, oracle_net):
        lf, _, _ = plane2_scene
        combo = enumerate_combinations(lf, [1])[0]
        left, center, right = combination_views(lf, combo)
        d_coa, d_res, d = oracle_net.estimate(*(to_chw(v, np.float32)
                                                for v in (center, left, right)))
        np.testing.assert_array_equal(d.data, d_coa.data + d_res.data)

    def test_coarse_only_toggle_bitwise(self, plane2_scene):
        from dataclasses import replace
        lf, _, _ = plane2_scene
        cfg = replace(DispNetConfig(in_channels=1).oracle(), coarse_to_fine=False)
        net = DispNet(cfg, seed=0)
        combo = enumerate_combinations(lf, [1])[0]
        left, center, right = combination_views(lf, combo)
        d_coa, d_res, d = net.estimate(*(to_chw(v, np.float32)
                                         for v in (center, left, right)))
        assert np.array_equal(d.data, d_coa.data)
        assert np.all(d_res.data == 0.0)

    def test_oracle_median_recovers_disparity(self, plane2_scene, oracle_net):
        lf, _, _ = plane2_scene
        combo = enumerate_combinations(lf, [1])[0]  # baseline 1: estimation-frame d = 2
        left, center, right = combination_views(lf, combo)
        d_coa, _, _ = oracle_net.estimate(*(to_chw(v, np.float32)
                                            for v in (center, left, right)))
        assert abs(np.median(d_coa.data) - 2.0) < 0.5

    def test_constant_lightfield_cost_volume_identically_zero(self, oracle_net):
        img = Tensor(np.full((1, 16, 16), 0.5, np.float32))
        feats = oracle_net.extract_features(img)
        vol = oracle_net.build_coarse_cost(feats, feats, feats)
        assert np.all(vol.scores.data == 0.0)
        d = regress(oracle_net.scores(vol, "coarse"), oracle_net.config.coarse)
        np.testing.assert_allclose(d.data, 0.0, atol=1e-6)


def test_end_to_end_gradcheck_8x8():
    # full estimate path, double precision, D=5, subset of parameter coordinates
    net = DispNet(tiny_dispnet_config(), seed=7)
    rng = np.random.default_rng(0)
    imgs = [Tensor(rng.uniform(0.1, 0.9, (1, 8, 8)), dtype=np.float64) for _ in range(3)]
    proj = rng.standard_normal((8, 8))

    def scalar():
        _, _, d = net.estimate(*imgs)
        return float((d.data * proj).mean())

    net.params.zero_grad()
    g = Graph()
    with g:
        _, _, d = net.estimate(*imgs)
        loss = mean(mul(d, constant(proj)))
    g.backward(loss)

    worst = 0.0
    checked = 0
    for name in net.params.names():
        t = net.params[name]
        assert t.grad is not None, f"no gradient reached {name}"
        flat = t.data.ravel()
        for idx in rng.choice(flat.size, size=min(2, flat.size), replace=False):
            orig = flat[idx]
            flat[idx] = orig + 1e-5
            hi = scalar()
            flat[idx] = orig - 1e-5
            lo = scalar()
            flat[idx] = orig
            num = (hi - lo) / 2e-5
            ana = t.grad.ravel()[idx] / d.data.size  # loss used mean, scalar() matches
            worst = max(worst, abs(ana - num) / max(1.0, abs(num)))
            checked += 1
    assert checked > 20
    assert worst < 1e-4


class TestCheckpointRoundTrip:
    def test_inference_identical_after_reload(self, tmp_path, plane2_scene):
        lf, _, _ = plane2_scene
        net = DispNet(toy_dispnet_config(), seed=5)
        combo = enumerate_combinations(lf, [1])[0]
        left, center, right = (to_chw(v, np.float32)[:]
                               for v in combination_views(lf, combo))
        crop = [Tensor(t.data[:, :32, :32]) for t in (center, left, right)]
        _, _, before = net.estimate(*crop)
        path = tmp_path / "net.lfdw"
        save_checkpoint(path, {f"dispnet/{k}": v for k, v in net.state_dict().items()})
        net2 = DispNet(toy_dispnet_config(), seed=999)
        from lfdepth.checkpoint import split_namespace
        net2.load_state_dict(split_namespace(load_checkpoint(path), "dispnet"))
        _, _, after = net2.estimate(*crop)
        assert np.array_equal(before.data, after.data)
