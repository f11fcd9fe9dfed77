"""Unsupervised loss terms and their weighted combination.

All terms are built from autodiff ops so gradients flow to both networks.
The photometric terms compare the warped source views against the center
view; smoothness terms are edge-aware total variation; the full loss also
re-applies the photometric/SSIM/smoothness terms to the coarse branch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (ShapeMismatchError, Tensor, absolute, add, conv2d, constant, div,
                       exp, mean, mul, smul, spatial_gradient, sub, take)
from .occlusion import ConfidencePair

SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


@dataclass
class LossWeights:
    alpha1: float = 1.0       # SSIM
    alpha2: float = 0.1       # disparity smoothness
    alpha3: float = 0.05      # occlusion smoothness
    eta: float = 100.0        # edge sharpness
    coarse_weight: float = 0.5

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "alpha3", "eta", "coarse_weight"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def _check_aligned(op, a, b):
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{op}: shapes {a.shape} and {b.shape} differ")


def loss_rec(i_rec: Tensor, i_c: Tensor) -> Tensor:
    """Mean absolute reconstruction error (l1 normalized by element count)."""
    _check_aligned("loss_rec", i_rec, i_c)
    return mean(absolute(sub(i_rec, i_c)))


def loss_wpm(i_lc: Tensor, i_rc: Tensor, i_c: Tensor, pair: ConfidencePair) -> Tensor:
    """Confidence-weighted photometric loss; residuals channel-averaged per pixel."""
    _check_aligned("loss_wpm", i_lc, i_c)
    _check_aligned("loss_wpm", i_rc, i_c)
    e_l = mean(absolute(sub(i_lc, i_c)), axes=0)
    e_r = mean(absolute(sub(i_rc, i_c)), axes=0)
    return add(mean(mul(pair.o_l, e_l)), mean(mul(pair.o_r, e_r)))


_UNIFORM_CACHE: dict = {}


def _uniform3(x: Tensor) -> Tensor:
    # per-channel 3x3 box filter, valid windows only
    c = x.shape[0]
    key = (c, x.dtype.name)
    w = _UNIFORM_CACHE.get(key)
    if w is None:
        arr = np.zeros((c, c, 3, 3), dtype=x.dtype)
        for i in range(c):
            arr[i, i] = 1.0 / 9.0
        w = constant(arr)
        _UNIFORM_CACHE[key] = w
    return conv2d(x, w, stride=1, dilation=1, padding=0)


def _ssim(a: Tensor, b: Tensor) -> Tensor:
    mu_a = _uniform3(a)
    mu_b = _uniform3(b)
    var_a = sub(_uniform3(mul(a, a)), mul(mu_a, mu_a))
    var_b = sub(_uniform3(mul(b, b)), mul(mu_b, mu_b))
    cov = sub(_uniform3(mul(a, b)), mul(mu_a, mu_b))
    one = np.ones((), dtype=a.dtype)
    c1 = constant(one * SSIM_C1)
    c2 = constant(one * SSIM_C2)
    num = mul(add(smul(mul(mu_a, mu_b), 2.0), c1), add(smul(cov, 2.0), c2))
    den = mul(add(add(mul(mu_a, mu_a), mul(mu_b, mu_b)), c1), add(add(var_a, var_b), c2))
    return mean(div(num, den))


def loss_ssim(i_lc: Tensor, i_rc: Tensor, i_c: Tensor) -> Tensor:
    """1 - mean SSIM of the two warped views against the center (3x3 window)."""
    _check_aligned("loss_ssim", i_lc, i_c)
    _check_aligned("loss_ssim", i_rc, i_c)
    if i_c.shape[1] < 3 or i_c.shape[2] < 3:
        raise ShapeMismatchError(f"loss_ssim: image {i_c.shape[1:]} smaller than the 3x3 window")
    s = add(_ssim(i_lc, i_c), _ssim(i_rc, i_c))
    return add(smul(s, -0.5), constant(np.ones((), dtype=i_c.dtype)))


def loss_smooth(m: Tensor, guide: Tensor, eta: float) -> Tensor:
    """Edge-aware smoothness: |grad m| weighted by exp(-eta |grad guide|).

    ``m`` is an (X, Y) map; ``guide`` the (C, X, Y) center view whose
    gradient magnitude is channel-averaged. Horizontal and vertical terms
    are summed, then averaged over pixels.
    """
    if m.shape != guide.shape[1:]:
        raise ShapeMismatchError(f"loss_smooth: map {m.shape} vs guide {guide.shape[1:]}")
    gm = absolute(spatial_gradient(m))                       # (2, X, Y)
    gi = mean(absolute(spatial_gradient(guide)), axes=1)     # (2, X, Y)
    w = exp(smul(gi, -float(eta)))
    per_dir = mul(gm, w)
    return smul(mean(per_dir), 2.0)  # sum of the two directions, mean over pixels


@dataclass
class ForwardBundle:
    """Everything one training forward pass produces that the loss consumes."""

    i_c: Tensor
    i_lc: Tensor
    i_rc: Tensor
    pair: ConfidencePair
    i_rec: Tensor
    d_tilde: Tensor
    d_coa: Tensor | None = None
    i_lc_coa: Tensor | None = None
    i_rc_coa: Tensor | None = None


def loss_full(bundle: ForwardBundle, weights: LossWeights):
    """Weighted total plus an itemized breakdown (weighted contributions).

    The coarse branch re-applies the photometric/SSIM/disparity-smoothness
    terms to the coarse warps, scaled by ``coarse_weight`` and reusing the
    refined-branch confidence pair.
    """
    w = weights
    wpm = loss_wpm(bundle.i_lc, bundle.i_rc, bundle.i_c, bundle.pair)
    rec = loss_rec(bundle.i_rec, bundle.i_c)
    total = add(wpm, rec)
    breakdown = {"l_wpm": wpm.item(), "l_rec": rec.item(),
                 "l_ssim": 0.0, "l_smd": 0.0, "l_smo": 0.0, "l_coarse": 0.0}
    if w.alpha1 > 0:
        ssim = smul(loss_ssim(bundle.i_lc, bundle.i_rc, bundle.i_c), w.alpha1)
        breakdown["l_ssim"] = ssim.item()
        total = add(total, ssim)
    if w.alpha2 > 0:
        smd = smul(loss_smooth(bundle.d_tilde, bundle.i_c, w.eta), w.alpha2)
        breakdown["l_smd"] = smd.item()
        total = add(total, smd)
    if w.alpha3 > 0:
        smo = smul(loss_smooth(bundle.pair.o_l, bundle.i_c, w.eta), w.alpha3)
        breakdown["l_smo"] = smo.item()
        total = add(total, smo)
    if w.coarse_weight > 0 and bundle.i_lc_coa is not None:
        coarse = loss_wpm(bundle.i_lc_coa, bundle.i_rc_coa, bundle.i_c, bundle.pair)
        if w.alpha1 > 0:
            coarse = add(coarse, smul(loss_ssim(bundle.i_lc_coa, bundle.i_rc_coa, bundle.i_c),
                                      w.alpha1))
        if w.alpha2 > 0:
            coarse = add(coarse, smul(loss_smooth(bundle.d_coa, bundle.i_c, w.eta), w.alpha2))
        coarse = smul(coarse, w.coarse_weight)
        breakdown["l_coarse"] = coarse.item()
        total = add(total, coarse)
    breakdown["l_full"] = total.item()
    return total, breakdown
