"""Error-driven fusion of candidate disparity maps with occlusion handling.

Each candidate map is scored by warping the auxiliary views onto the center
and recording per-pixel warping errors. Pixels whose errors vary strongly
across the auxiliary views are flagged as occlusion via a quantile threshold
on the standard deviation, and their scalar error uses the median instead of
the mean. Candidates are then merged per pixel, either by picking the
minimum-error candidate or by softmax-weighting the n' smallest errors.

Everything here is deterministic: ties always resolve to the lowest
candidate index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lightfield import LightField, warp_view_to_center


@dataclass
class FusionConfig:
    strategy: str = "weighted"          # weighted | min_error
    n_prime: int = 2
    occlusion: str = "quantile_median"  # quantile_median | k_smallest | none
    q: float = 0.95
    k: int = 8

    def __post_init__(self):
        if self.strategy not in ("weighted", "min_error"):
            raise ValueError(f"strategy must be weighted|min_error, got {self.strategy!r}")
        if self.occlusion not in ("quantile_median", "k_smallest", "none"):
            raise ValueError(
                f"occlusion must be quantile_median|k_smallest|none, got {self.occlusion!r}")
        if self.n_prime < 1:
            raise ValueError("n_prime must be >= 1")
        if not 0 < self.q <= 1:
            raise ValueError(f"quantile q must be in (0, 1], got {self.q}")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class ErrorBundle:
    """Per-candidate warping-error stack, occlusion mask, and scalar error map."""

    eps: np.ndarray   # (X, Y, Z) nonnegative
    mask: np.ndarray  # (X, Y) in {0, 1}
    e: np.ndarray     # (X, Y)


def warping_errors(lf: LightField, d_hat: np.ndarray, aux_views) -> np.ndarray:
    """(X, Y, Z) channel-mean absolute errors of warping each aux view to center."""
    aux_views = list(aux_views)
    if not aux_views:
        raise ValueError("auxiliary view list is empty")
    uc, vc = lf.angular_center
    center = lf.center_view().astype(np.float64)
    stack = np.empty(d_hat.shape + (len(aux_views),), dtype=np.float64)
    for z, (u, v) in enumerate(aux_views):
        warped = warp_view_to_center(lf.extract_view(u, v), d_hat, uc - u, vc - v)
        stack[:, :, z] = np.abs(warped.astype(np.float64) - center).mean(axis=-1)
    return stack


def quantile_linear(values: np.ndarray, q: float) -> float:
    """Linearly interpolated empirical quantile of a flat sample."""
    s = np.sort(values.ravel())
    pos = q * (s.size - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, s.size - 1)
    frac = pos - lo
    return float(s[lo] + (s[hi] - s[lo]) * frac)


def occlusion_mask(eps: np.ndarray, q: float) -> np.ndarray:
    """Flag pixels whose errors vary strongly across aux views.

    Threshold is the q-quantile of the per-pixel standard deviation map;
    strictly-greater comparison, so q=1 flags nothing.
    """
    if eps.ndim != 3 or eps.shape[2] < 2:
        raise ValueError(f"need an (X,Y,Z) stack with Z >= 2, got shape {eps.shape}")
    sigma = np.std(eps, axis=2)
    theta = quantile_linear(sigma, q)
    return (sigma > theta).astype(np.uint8)


def error_map(eps: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Median of the errors where occluded, mean elsewhere."""
    if eps.shape[:2] != mask.shape:
        raise ValueError(f"stack {eps.shape[:2]} and mask {mask.shape} not aligned")
    med = np.median(eps, axis=2)
    avg = np.mean(eps, axis=2)
    m = mask.astype(eps.dtype)
    return med * m + avg * (1.0 - m)


def error_map_ksmall(eps: np.ndarray, k: int) -> np.ndarray:
    """Mean of the k smallest errors per pixel (occlusion-handling variant)."""
    z = eps.shape[2]
    if not 1 <= k <= z:
        raise ValueError(f"k must be in [1, {z}], got {k}")
    return np.sort(eps, axis=2)[:, :, :k].mean(axis=2)


def candidate_error(eps: np.ndarray, config: FusionConfig) -> ErrorBundle:
    """Apply the configured occlusion handling to one error stack."""
    if config.occlusion == "quantile_median":
        mask = occlusion_mask(eps, config.q)
        return ErrorBundle(eps, mask, error_map(eps, mask))
    mask = np.zeros(eps.shape[:2], dtype=np.uint8)
    if config.occlusion == "k_smallest":
        return ErrorBundle(eps, mask, error_map_ksmall(eps, config.k))
    return ErrorBundle(eps, mask, np.mean(eps, axis=2))


def fuse(candidates, config: FusionConfig) -> np.ndarray:
    """Merge (disparity, error) candidates into the final map.

    min_error picks the per-pixel argmin candidate (lowest index on ties);
    weighted selects the n' smallest errors per pixel and blends the matching
    disparities with softmax(-error) weights.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidates to fuse")
    d = np.stack([np.asarray(c[0]) for c in candidates])
    e = np.stack([np.asarray(c[1]) for c in candidates])
    if d.shape != e.shape:
        raise ValueError(f"disparity stack {d.shape} and error stack {e.shape} differ")
    n = d.shape[0]
    if config.strategy == "min_error":
        idx = np.argmin(e, axis=0)
        return np.take_along_axis(d, idx[None], axis=0)[0]
    if config.n_prime > n:
        raise ValueError(f"n_prime={config.n_prime} exceeds candidate count {n}")
    order = np.argsort(e, axis=0, kind="stable")[:config.n_prime]
    sel_e = np.take_along_axis(e, order, axis=0)
    sel_d = np.take_along_axis(d, order, axis=0)
    w = np.exp(-sel_e)
    w = w / w.sum(axis=0)
    return (w * sel_d).sum(axis=0)
