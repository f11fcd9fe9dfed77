"""Occlusion/confidence prediction for the two warped source views.

The learned predictor is a small U-shaped network over the concatenation of
the two warped views and the disparity map; its two-channel softmax head
makes the confidence pair sum to one by construction. A closed-form mode
(softmax over the negated warping residuals against the center view) keeps
the loss and fusion plumbing testable without training; it is never used
for learned results. Confidence prediction only runs during training.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .autodiff import (ShapeMismatchError, Tensor, absolute, add, concat, mean, mul,
                       reshape, smul, softmax, stack, sub, take, upsample_nearest)
from .nn import ParamBag, apply_conv2d, init_conv2d, lrelu


class ConfidencePair(NamedTuple):
    o_l: Tensor
    o_r: Tensor


@dataclass
class OccNetConfig:
    in_channels: int = 3  # two warped views + the disparity map
    depth: int = 2
    max_channels: int = 32
    leaky_slope: float = 0.1
    mode: str = "learned"  # learned | closed_form
    dtype: type = np.float32

    def __post_init__(self):
        if self.mode not in ("learned", "closed_form"):
            raise ValueError(f"mode must be learned|closed_form, got {self.mode!r}")
        if self.depth < 1:
            raise ValueError("U-shape needs depth >= 1")


class OccNet:
    """U-shape with residual bottleneck, skip connections, softmax head."""

    def __init__(self, config: OccNetConfig, seed: int = 0):
        self.config = config
        self.params = ParamBag(config.dtype)
        rng = np.random.default_rng(seed)
        s = config.leaky_slope
        c_half = max(config.max_channels // 2, 4)
        chans = [c_half] + [config.max_channels] * config.depth
        init_conv2d(self.params, "occ.in", rng, config.in_channels, chans[0], 3, s)
        for i in range(config.depth):
            init_conv2d(self.params, f"occ.down{i}", rng, chans[i], chans[i + 1], 3, s)
        top = chans[-1]
        init_conv2d(self.params, "occ.mid.a", rng, top, top, 3, s)
        init_conv2d(self.params, "occ.mid.b", rng, top, top, 3, s)
        for i in reversed(range(config.depth)):
            init_conv2d(self.params, f"occ.up{i}", rng, chans[i + 1] + chans[i], chans[i], 3, s)
        init_conv2d(self.params, "occ.head", rng, chans[0], 2, 3, s)
        self._chans = chans

    def forward(self, x: Tensor) -> ConfidencePair:
        cfg = self.config
        s = cfg.leaky_slope
        encs = [lrelu(apply_conv2d(self.params, "occ.in", x), s)]
        for i in range(cfg.depth):
            encs.append(lrelu(apply_conv2d(self.params, f"occ.down{i}", encs[-1], stride=2), s))
        h = encs[-1]
        t = lrelu(apply_conv2d(self.params, "occ.mid.a", h), s)
        t = apply_conv2d(self.params, "occ.mid.b", t)
        h = lrelu(add(h, t), s)
        for i in reversed(range(cfg.depth)):
            skip = encs[i]
            up = upsample_nearest(h, skip.shape[1:])
            h = lrelu(apply_conv2d(self.params, f"occ.up{i}", concat([up, skip], axis=0)), s)
        logits = apply_conv2d(self.params, "occ.head", h)
        probs = softmax(logits, axis=0)
        return ConfidencePair(take(probs, 0, 0), take(probs, 1, 0))

    def state_dict(self):
        return self.params.state_dict()

    def load_state_dict(self, state):
        self.params.load_state_dict(state)


def closed_form_confidence(i_lc: Tensor, i_rc: Tensor, i_c: Tensor) -> ConfidencePair:
    """Softmax over the negated channel-mean warping residuals."""
    e_l = mean(absolute(sub(i_lc, i_c)), axes=0)
    e_r = mean(absolute(sub(i_rc, i_c)), axes=0)
    probs = softmax(stack([smul(e_l, -1.0), smul(e_r, -1.0)], axis=0), axis=0)
    return ConfidencePair(take(probs, 0, 0), take(probs, 1, 0))


def predict_confidence(i_lc: Tensor, i_rc: Tensor, d_tilde: Tensor,
                       net: OccNet | None = None, center: Tensor | None = None) -> ConfidencePair:
    """Confidence pair for the two warped views (learned or closed-form)."""
    if i_lc.shape != i_rc.shape:
        raise ShapeMismatchError(f"warped views differ in shape: {i_lc.shape} vs {i_rc.shape}")
    if d_tilde.shape != i_lc.shape[1:]:
        raise ShapeMismatchError(
            f"disparity {d_tilde.shape} not aligned with views {i_lc.shape[1:]}")
    if net is not None:
        x = concat([i_lc, i_rc, reshape(d_tilde, (1,) + d_tilde.shape)], axis=0)
        return net.forward(x)
    if center is None:
        raise ValueError("closed-form confidence needs the center view")
    return closed_form_confidence(i_lc, i_rc, center)


def reconstruct_center(i_lc: Tensor, i_rc: Tensor, pair: ConfidencePair) -> Tensor:
    """Pixelwise convex combination of the warped views."""
    if i_lc.shape != i_rc.shape:
        raise ShapeMismatchError(f"warped views differ in shape: {i_lc.shape} vs {i_rc.shape}")
    if pair.o_l.shape != i_lc.shape[1:]:
        raise ShapeMismatchError(
            f"confidence {pair.o_l.shape} not aligned with views {i_lc.shape[1:]}")
    return add(mul(pair.o_l, i_lc), mul(pair.o_r, i_rc))
