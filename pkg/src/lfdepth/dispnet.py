"""Coarse-to-fine disparity estimator.

Three views pass through a shared feature extractor (residual blocks plus a
dilated-convolution pyramid with a global-average branch). Matching costs
are the per-pixel population variance of the center feature and the two
source features warped by each disparity hypothesis; the coarse branch
sweeps a wide sample vector, the refinement branch sweeps a narrow residual
vector around the coarse estimate. Both volumes run through shared 3D cost
filters and a soft-argmax regression.

Two non-learned fallbacks make the geometry testable without training:
``feature_mode="gradient"`` (image plus forward-difference gradients) and
``score_mode="neg_variance"`` (scores are the channel-mean variance, negated
and scaled so the soft-argmax concentrates).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import (Graph, ShapeMismatchError, Tensor, absolute, add, concat, constant,
                       inner, masked_variance, mean, smul, softmax, stack, sub, take,
                       bilinear_sample, upsample_nearest, upsample_trilinear, variance)
from .lightfield import base_grid
from .nn import ParamBag, apply_conv2d, apply_conv3d, init_conv2d, init_conv3d, lrelu


@dataclass(frozen=True)
class SampleVector:
    """Equally spaced disparity hypotheses from s_min to s_max."""

    s_min: float
    s_max: float
    interval: float

    def __post_init__(self):
        if self.s_max <= self.s_min:
            raise ValueError(f"need s_max > s_min, got [{self.s_min}, {self.s_max}]")
        if self.interval <= 0:
            raise ValueError(f"interval must be positive, got {self.interval}")

    @property
    def count(self) -> int:
        return int(round((self.s_max - self.s_min) / self.interval)) + 1

    @property
    def effective_interval(self) -> float:
        return (self.s_max - self.s_min) / (self.count - 1)

    @property
    def values(self) -> np.ndarray:
        v = np.linspace(self.s_min, self.s_max, self.count)
        steps = np.diff(v)
        assert steps.min() > 0 and np.ptp(steps) < 1e-9
        return v


@dataclass
class CostVolume:
    """(C, D, X, Y) match scores tied to the sample vector that built them."""

    scores: Tensor
    samples: SampleVector

    def __post_init__(self):
        if self.scores.ndim != 4:
            raise ShapeMismatchError(f"cost volume must be (C,D,X,Y), got {self.scores.shape}")
        if self.scores.shape[1] != self.samples.count:
            raise ShapeMismatchError(
                f"cost volume D={self.scores.shape[1]} does not match sample count "
                f"{self.samples.count}")
        if not np.isfinite(self.scores.data).all():
            raise ValueError("cost volume contains non-finite entries")


DENSE_COARSE = SampleVector(-12.0, 12.0, 1.0)
DENSE_RESIDUAL = SampleVector(-1.0, 1.0, 0.1)
SPARSE_COARSE = SampleVector(-20.0, 20.0, 1.2)
SPARSE_RESIDUAL = SampleVector(-2.0, 2.0, 0.12)


@dataclass
class DispNetConfig:
    in_channels: int = 1
    feature_channels: int = 16
    feature_blocks: int = 3
    aspp_dilations: tuple = (3, 6, 8)
    cost_filters: int = 2
    cost_filter_channels: int = 16
    regression_channels: int = 8
    shared_filters: bool = True
    coarse_to_fine: bool = True
    leaky_slope: float = 0.1
    coarse: SampleVector = field(default_factory=lambda: DENSE_COARSE)
    residual: SampleVector = field(default_factory=lambda: DENSE_RESIDUAL)
    feature_mode: str = "learned"       # learned | gradient
    score_mode: str = "learned"         # learned | neg_variance
    neg_variance_gain: float = 8000.0
    dtype: type = np.float32

    def __post_init__(self):
        if self.feature_mode not in ("learned", "gradient"):
            raise ValueError(f"feature_mode must be learned|gradient, got {self.feature_mode!r}")
        if self.score_mode not in ("learned", "neg_variance"):
            raise ValueError(f"score_mode must be learned|neg_variance, got {self.score_mode!r}")
        span = self.coarse.s_max - self.coarse.s_min
        mag = max(abs(self.residual.s_min), abs(self.residual.s_max))
        if mag >= span:
            raise ValueError(f"residual sample magnitude {mag} must be smaller than the "
                             f"coarse span {span}")
        if self.residual.effective_interval >= self.coarse.effective_interval:
            raise ValueError("residual interval must be finer than the coarse interval")

    def oracle(self) -> "DispNetConfig":
        """Untrained configuration: fallback features, raw-variance scores, no filters."""
        return replace(self, feature_mode="gradient", score_mode="neg_variance", cost_filters=0)


def regress(scores: Tensor, samples: SampleVector) -> Tensor:
    """Soft-argmax: inner product of samples with softmax over the D axis."""
    if scores.shape[0] != samples.count:
        raise ShapeMismatchError(
            f"score depth {scores.shape[0]} does not match sample count {samples.count}")
    probs = softmax(scores, axis=0)
    vec = constant(samples.values, dtype=scores.dtype)
    return inner(vec, probs, axis=0)


def warp_horizontal(img: Tensor, disparity, sign: int) -> Tensor:
    """Differentiable warp of (C,X,Y) along x by sign*disparity (border clamp)."""
    shape = img.shape[1:]
    bx, by = base_grid(shape, img.dtype)
    if isinstance(disparity, Tensor):
        cx = add(constant(bx), disparity) if sign > 0 else sub(constant(bx), disparity)
        grid = stack([cx, constant(by)], axis=0)
    else:
        off = np.asarray(disparity, dtype=img.dtype)
        grid = constant(np.stack([bx + sign * off, by]))
    return bilinear_sample(img, grid)


class DispNet:
    """Weights plus the forward graph; pure given parameters."""

    def __init__(self, config: DispNetConfig, seed: int = 0):
        self.config = config
        self.params = ParamBag(config.dtype)
        rng = np.random.default_rng(seed)
        c = config.feature_channels
        slope = config.leaky_slope
        if config.feature_mode == "learned":
            cb = max(c // 2, 4)
            init_conv2d(self.params, "feat.in", rng, config.in_channels, c, 3, slope)
            for i in range(config.feature_blocks):
                init_conv2d(self.params, f"feat.res{i}.a", rng, c, c, 3, slope)
                init_conv2d(self.params, f"feat.res{i}.b", rng, c, c, 3, slope)
            for j, _ in enumerate(config.aspp_dilations):
                init_conv2d(self.params, f"feat.aspp{j}", rng, c, cb, 3, slope)
            init_conv2d(self.params, "feat.gap", rng, c, cb, 1, slope)
            init_conv2d(self.params, "feat.fuse", rng,
                        cb * (len(config.aspp_dilations) + 1), c, 1, slope)
        if config.cost_filters > 0:
            branches = ("shared",) if config.shared_filters else ("coarse", "residual")
            for br in branches:
                self._init_filter(rng, br)
        if config.score_mode == "learned":
            fc = self._volume_channels()
            for br in ("coarse", "residual"):
                init_conv3d(self.params, f"head.{br}.a", rng, fc, config.regression_channels,
                            3, slope)
                init_conv3d(self.params, f"head.{br}.b", rng, config.regression_channels, 1,
                            3, slope)

    def _volume_channels(self) -> int:
        if self.config.feature_mode == "gradient":
            return 3 * self.config.in_channels
        return self.config.feature_channels

    def _init_filter(self, rng, branch: str):
        cfg = self.config
        f = cfg.cost_filter_channels
        init_conv3d(self.params, f"filter.{branch}.in", rng, self._volume_channels(), f,
                    3, cfg.leaky_slope)
        for i in range(cfg.cost_filters):
            init_conv3d(self.params, f"filter.{branch}.f{i}.down", rng, f, f, 3, cfg.leaky_slope)
            init_conv3d(self.params, f"filter.{branch}.f{i}.a", rng, f, f, 3, cfg.leaky_slope)
            init_conv3d(self.params, f"filter.{branch}.f{i}.b", rng, f, f, 3, cfg.leaky_slope)
        init_conv3d(self.params, f"filter.{branch}.out", rng, f, self._volume_channels(),
                    1, cfg.leaky_slope)

    # ------------------------------------------------------------------
    # forward pieces
    # ------------------------------------------------------------------

    def extract_features(self, image: Tensor) -> Tensor:
        """(C_img, X, Y) image -> (C, X, Y) features; shared across views."""
        if not np.isfinite(image.data).all():
            raise ValueError("feature extractor input contains non-finite values")
        cfg = self.config
        if cfg.feature_mode == "gradient":
            from .autodiff import spatial_gradient
            g = spatial_gradient(image)
            return concat([image, take(g, 0, 0), take(g, 1, 0)], axis=0)
        s = cfg.leaky_slope
        h = lrelu(apply_conv2d(self.params, "feat.in", image), s)
        for i in range(cfg.feature_blocks):
            t = lrelu(apply_conv2d(self.params, f"feat.res{i}.a", h), s)
            t = apply_conv2d(self.params, f"feat.res{i}.b", t)
            h = lrelu(add(h, t), s)
        branches = []
        for j, rate in enumerate(cfg.aspp_dilations):
            branches.append(lrelu(apply_conv2d(self.params, f"feat.aspp{j}", h,
                                               dilation=rate), s))
        gap = mean(h, axes=(1, 2), keepdims=True)
        gap = lrelu(apply_conv2d(self.params, "feat.gap", gap, padding=0), s)
        branches.append(upsample_nearest(gap, image.shape[1:]))
        return apply_conv2d(self.params, "feat.fuse", concat(branches, axis=0), padding=0)

    def _variance_volume(self, f_c, f_l, f_r, shifts, samples) -> CostVolume:
        # views whose warp coordinate leaves the frame drop out of the
        # variance; the center is always valid and the left/right warps
        # never clamp at the same pixel, so every slice keeps >= 2 views
        x_len = f_c.shape[1]
        dtype = f_c.dtype.type
        bx, _ = base_grid(f_c.shape[1:], f_c.dtype)
        ones = np.ones(f_c.shape[1:], dtype=dtype)
        slices = []
        for sh in shifts:
            off = sh.data if isinstance(sh, Tensor) else dtype(sh)
            cl = bx + off
            cr = bx - off
            wl = ((cl >= 0) & (cl <= x_len - 1)).astype(dtype)
            wr = ((cr >= 0) & (cr <= x_len - 1)).astype(dtype)
            w = constant(np.stack([ones, wl, wr])[:, None])
            f_lw = warp_horizontal(f_l, sh, +1)
            f_rw = warp_horizontal(f_r, sh, -1)
            v = masked_variance(stack([f_c, f_lw, f_rw], axis=0), w, axis=0)
            slices.append(v)
        return CostVolume(stack(slices, axis=1), samples)

    def build_coarse_cost(self, f_c, f_l, f_r) -> CostVolume:
        if f_c.shape != f_l.shape or f_c.shape != f_r.shape:
            raise ShapeMismatchError(
                f"feature shapes differ: {f_c.shape}, {f_l.shape}, {f_r.shape}")
        sv = self.config.coarse
        return self._variance_volume(f_c, f_l, f_r, [float(s) for s in sv.values], sv)

    def build_residual_cost(self, f_c, f_l, f_r, d_coa: Tensor) -> CostVolume:
        if d_coa.shape != f_c.shape[1:]:
            raise ShapeMismatchError(
                f"coarse map {d_coa.shape} not aligned with features {f_c.shape[1:]}")
        sv = self.config.residual
        shifts = [add(d_coa, constant(np.asarray(s, dtype=d_coa.dtype.type)))
                  for s in sv.values]
        return self._variance_volume(f_c, f_l, f_r, shifts, sv)

    def filter_cost(self, volume: CostVolume, branch: str = "coarse") -> CostVolume:
        cfg = self.config
        if cfg.cost_filters == 0:
            return volume
        _, d, x, y = volume.scores.shape
        if min(d, x, y) < 4:
            raise ShapeMismatchError(
                f"cost volume (D,X,Y)=({d},{x},{y}) too small to downsample; needs >= 4")
        key = "shared" if cfg.shared_filters else branch
        s = cfg.leaky_slope
        h = lrelu(apply_conv3d(self.params, f"filter.{key}.in", volume.scores), s)
        for i in range(cfg.cost_filters):
            down = lrelu(apply_conv3d(self.params, f"filter.{key}.f{i}.down", h, stride=2), s)
            t = lrelu(apply_conv3d(self.params, f"filter.{key}.f{i}.a", down), s)
            t = apply_conv3d(self.params, f"filter.{key}.f{i}.b", t)
            h = lrelu(add(down, t), s)
        h = upsample_trilinear(h, (d, x, y))
        out = apply_conv3d(self.params, f"filter.{key}.out", h, padding=0)
        return CostVolume(out, volume.samples)

    def filter_param_ids(self, branch: str):
        key = "shared" if self.config.shared_filters else branch
        return tuple(id(self.params[n]) for n in self.params.names()
                     if n.startswith(f"filter.{key}."))

    def scores(self, volume: CostVolume, branch: str) -> Tensor:
        cfg = self.config
        if cfg.score_mode == "neg_variance":
            return smul(mean(volume.scores, axes=0), -cfg.neg_variance_gain)
        h = lrelu(apply_conv3d(self.params, f"head.{branch}.a", volume.scores), cfg.leaky_slope)
        return take(apply_conv3d(self.params, f"head.{branch}.b", h), 0, 0)

    def estimate(self, i_c: Tensor, i_l: Tensor, i_r: Tensor):
        """Full two-branch forward; returns (d_coarse, d_residual, d_refined)."""
        cfg = self.config
        if i_c.shape != i_l.shape or i_c.shape != i_r.shape:
            raise ShapeMismatchError(
                f"view shapes differ: {i_c.shape}, {i_l.shape}, {i_r.shape}")
        f_c = self.extract_features(i_c)
        f_l = self.extract_features(i_l)
        f_r = self.extract_features(i_r)
        vol = self.filter_cost(self.build_coarse_cost(f_c, f_l, f_r), "coarse")
        d_coa = regress(self.scores(vol, "coarse"), cfg.coarse)
        if not cfg.coarse_to_fine:
            d_res = constant(np.zeros(d_coa.shape, dtype=d_coa.dtype))
            return d_coa, d_res, d_coa
        rvol = self.filter_cost(self.build_residual_cost(f_c, f_l, f_r, d_coa), "residual")
        d_res = regress(self.scores(rvol, "residual"), cfg.residual)
        return d_coa, d_res, add(d_coa, d_res)

    def state_dict(self):
        return self.params.state_dict()

    def load_state_dict(self, state):
        self.params.load_state_dict(state)
