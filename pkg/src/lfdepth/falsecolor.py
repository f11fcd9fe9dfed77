"""False-color map rendering for disparity and error visualization."""

from __future__ import annotations

import numpy as np
from PIL import Image

# fixed perceptual ramp (dark violet -> teal -> yellow), anchors evenly spaced
_RAMP = np.array([
    (0.267, 0.005, 0.329),
    (0.283, 0.141, 0.458),
    (0.254, 0.265, 0.530),
    (0.207, 0.372, 0.553),
    (0.164, 0.471, 0.558),
    (0.128, 0.567, 0.551),
    (0.135, 0.659, 0.518),
    (0.267, 0.749, 0.441),
    (0.478, 0.821, 0.318),
    (0.741, 0.873, 0.150),
    (0.993, 0.906, 0.144),
])


def falsecolor(values: np.ndarray, vrange) -> np.ndarray:
    """Map values linearly onto the ramp; out-of-range clamps. Returns uint8 RGB."""
    lo, hi = float(vrange[0]), float(vrange[1])
    if not lo < hi:
        raise ValueError(f"invalid value range: min {lo} >= max {hi}")
    arr = np.asarray(values, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise ValueError("cannot render non-finite values")
    t = np.clip((arr - lo) / (hi - lo), 0.0, 1.0)
    anchors = np.linspace(0.0, 1.0, len(_RAMP))
    rgb = np.stack([np.interp(t, anchors, _RAMP[:, c]) for c in range(3)], axis=-1)
    return np.round(rgb * 255.0).astype(np.uint8)


def emit_falsecolor(values: np.ndarray, vrange, path):
    Image.fromarray(falsecolor(values, vrange), mode="RGB").save(path)


def emit_error_map(estimate: np.ndarray, gt: np.ndarray, path, vmax: float = 0.5):
    """Companion rendering of |estimate - gt| on a fixed [0, vmax] scale."""
    err = np.abs(np.asarray(estimate, dtype=np.float64) - np.asarray(gt, dtype=np.float64))
    emit_falsecolor(err, (0.0, vmax), path)
