"""Synthetic multi-layer light-field generator with analytic ground truth.

Scenes are stacks of textured planes, each with a constant or linearly
ramped disparity. Every view is rendered from an extended texture canvas by
the inverse of the center-to-view warp, so warping a view back to the
center with the true disparity reproduces the center exactly wherever the
view actually sees the same surface. Layers with larger absolute disparity
occlude layers with smaller one (ties: the later layer in the list wins).

Per-view occlusion masks mark center pixels that are invisible in that view
(hidden behind a nearer layer, or projected out of frame). Textures mix
sinusoidal gratings with band-limited noise so variance matching has
unambiguous minima, and each layer gets a disjoint intensity band so any
cross-layer mismatch is detectable. View intensities are quantized to 8-bit
levels, which keeps PNG export lossless.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .lightfield import LightField, base_grid


@dataclass(frozen=True)
class LayerSpec:
    """One textured plane. ``ramp`` overrides the constant disparity."""

    disparity: float = 0.0
    ramp: tuple | None = None  # ("x"|"y", d_start, d_end) across the center extent
    region: tuple | None = None  # (x0, x1, y0, y1) half-open, center-view coords

    def max_abs_disparity(self) -> float:
        if self.ramp is None:
            return abs(self.disparity)
        return max(abs(self.ramp[1]), abs(self.ramp[2]))


@dataclass(frozen=True)
class SyntheticSpec:
    layers: tuple = (LayerSpec(0.0),)
    resolution: tuple = (64, 64)
    angular: tuple = (7, 7)
    channels: int = 1
    disparity_range: tuple = (-4.0, 4.0)
    sine_count: int = 4
    sine_wavelengths: tuple = (4.0, 16.0)
    noise_strength: float = 0.8

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a synthetic scene needs at least one layer")
        lo, hi = self.disparity_range
        for i, layer in enumerate(self.layers):
            if layer.ramp is None:
                vals = (layer.disparity,)
            else:
                axis, d0, d1 = layer.ramp
                if axis not in ("x", "y"):
                    raise ValueError(f"layer {i}: ramp axis must be 'x' or 'y', got {axis!r}")
                vals = (d0, d1)
            for v in vals:
                if not lo <= v <= hi:
                    raise ValueError(
                        f"layer {i} disparity {v} outside declared range [{lo}, {hi}]")


def _gaussian_kernel2d(sigma: float, dtype=np.float64) -> np.ndarray:
    r = max(1, int(np.ceil(3 * sigma)))
    x = np.arange(-r, r + 1, dtype=dtype)
    k1 = np.exp(-0.5 * (x / sigma) ** 2)
    k1 /= k1.sum()
    return np.outer(k1, k1)


def _layer_texture(rng, shape, channels, spec: SyntheticSpec, band) -> np.ndarray:
    h, w = shape
    xs = np.arange(h, dtype=np.float64)[:, None]
    ys = np.arange(w, dtype=np.float64)[None, :]
    chans = []
    for _ in range(channels):
        tex = np.zeros((h, w))
        for _ in range(spec.sine_count):
            lam = rng.uniform(*spec.sine_wavelengths)
            theta = rng.uniform(0, np.pi)
            phase = rng.uniform(0, 2 * np.pi)
            fx, fy = np.cos(theta) / lam, np.sin(theta) / lam
            tex += rng.uniform(0.5, 1.0) * np.sin(2 * np.pi * (fx * xs + fy * ys) + phase)
        noise = rng.standard_normal((h, w))
        kern = _gaussian_kernel2d(1.2)
        pad = kern.shape[0] // 2
        noise = kernels.conv2d_forward(noise[None], kern[None, None], 1, 1, pad)[0]
        tex += spec.noise_strength * noise / max(noise.std(), 1e-9) * tex.std()
        lo, hi = tex.min(), tex.max()
        tex = (tex - lo) / max(hi - lo, 1e-9)
        chans.append(band[0] + tex * (band[1] - band[0]))
    tex = np.stack(chans, axis=-1)
    return np.round(tex * 255.0) / 255.0  # 8-bit levels: PNG round-trips exactly


def _layer_fields(layer: LayerSpec, du, dv, shape, tex_canvas, margin):
    """Texture, support, and disparity of one layer seen from offset (du, dv)."""
    x, y = shape
    bx, by = base_grid(shape, np.float64)
    if layer.ramp is None:
        d = float(layer.disparity)
        px = bx - d * du
        py = by - d * dv
        disp = np.full(shape, d)
    else:
        axis, d0, d1 = layer.ramp
        if axis == "x":
            slope = (d1 - d0) / max(x - 1, 1)
            denom = 1.0 + slope * du
            if denom <= 0.1:
                raise ValueError("disparity ramp too steep for the angular extent (fold-over)")
            px = (bx - d0 * du) / denom
            disp = d0 + slope * px
            py = by - disp * dv
        else:
            slope = (d1 - d0) / max(y - 1, 1)
            denom = 1.0 + slope * dv
            if denom <= 0.1:
                raise ValueError("disparity ramp too steep for the angular extent (fold-over)")
            py = (by - d0 * dv) / denom
            disp = d0 + slope * py
            px = bx - disp * du
    img = np.ascontiguousarray(np.moveaxis(tex_canvas, -1, 0))
    tex = kernels.bilinear_forward(img,
                                   np.ascontiguousarray(px + margin),
                                   np.ascontiguousarray(py + margin))
    tex = np.moveaxis(tex, 0, -1)
    if layer.region is None:
        support = np.ones(shape, dtype=bool)
    else:
        x0, x1, y0, y1 = layer.region
        rx = np.round(px)
        ry = np.round(py)
        support = (rx >= x0) & (rx < x1) & (ry >= y0) & (ry < y1)
    return tex, support, disp


def _composite(layers, fields):
    """Nearest-layer-wins painting; later layers win |d| ties."""
    shape = fields[0][1].shape
    channels = fields[0][0].shape[-1]
    img = np.zeros(shape + (channels,))
    disp = np.zeros(shape)
    ids = np.full(shape, -1, dtype=np.int32)
    best = np.full(shape, -np.inf)
    for idx, (tex, support, d) in enumerate(fields):
        pri = np.abs(d)
        win = support & (pri >= best)
        img[win] = tex[win]
        disp[win] = d[win]
        ids[win] = idx
        best[win] = pri[win]
    if (ids < 0).any():
        raise ValueError("scene leaves uncovered pixels; include a full-plane background layer")
    return img, disp, ids


def generate_synthetic(spec: SyntheticSpec, seed: int):
    """Render a scene; returns (LightField, gt disparity, per-view occlusion masks).

    The ground-truth map is the visible layer's disparity at the central
    view; masks have shape (U, V, X, Y) with True where the center pixel is
    not visible in that view.
    """
    rng = np.random.default_rng(seed)
    x, y = spec.resolution
    u_count, v_count = spec.angular
    uc, vc = (u_count - 1) // 2, (v_count - 1) // 2
    max_off = max(uc, vc)
    max_shift = max(l.max_abs_disparity() for l in spec.layers) * max_off
    margin = int(np.ceil(max_shift)) + 2

    n = len(spec.layers)
    gap = 0.9 / n
    canvases = []
    for i in range(n):
        band = (0.05 + i * gap, 0.05 + (i + 1) * gap - 0.02)
        canvases.append(_layer_texture(rng, (x + 2 * margin, y + 2 * margin),
                                       spec.channels, spec, band))

    views = np.empty((u_count, v_count, x, y, spec.channels), dtype=np.float32)
    id_maps = np.empty((u_count, v_count, x, y), dtype=np.int32)
    gt = None
    for u in range(u_count):
        for v in range(v_count):
            du, dv = uc - u, vc - v
            fields = [_layer_fields(l, du, dv, (x, y), canvases[i], margin)
                      for i, l in enumerate(spec.layers)]
            img, disp, ids = _composite(spec.layers, fields)
            views[u, v] = np.round(img * 255.0).astype(np.float32) / np.float32(255.0)
            id_maps[u, v] = ids
            if (u, v) == (uc, vc):
                gt = disp.astype(np.float32)

    bx, by = base_grid((x, y), np.float64)
    ids_center = id_maps[uc, vc]
    masks = np.zeros((u_count, v_count, x, y), dtype=bool)
    for u in range(u_count):
        for v in range(v_count):
            du, dv = uc - u, vc - v
            xs = np.round(bx + gt * du).astype(np.int64)
            ys = np.round(by + gt * dv).astype(np.int64)
            inframe = (xs >= 0) & (xs < x) & (ys >= 0) & (ys < y)
            xi = np.clip(xs, 0, x - 1)
            yi = np.clip(ys, 0, y - 1)
            masks[u, v] = ~inframe | (id_maps[u, v][xi, yi] != ids_center)

    return LightField(views), gt, masks


def single_plane_spec(disparity: float, resolution=(64, 64), angular=(7, 7),
                      channels=1, disparity_range=(-4.0, 4.0)) -> SyntheticSpec:
    return SyntheticSpec(layers=(LayerSpec(disparity),), resolution=resolution,
                         angular=angular, channels=channels,
                         disparity_range=disparity_range)


def two_plane_spec(d_background: float, d_foreground: float, rect=None,
                   resolution=(64, 64), angular=(7, 7), channels=1,
                   disparity_range=(-4.0, 4.0)) -> SyntheticSpec:
    x, y = resolution
    if rect is None:
        rect = (x // 4, 3 * x // 4, y // 4, 3 * y // 4)
    return SyntheticSpec(layers=(LayerSpec(d_background), LayerSpec(d_foreground, region=rect)),
                         resolution=resolution, angular=angular, channels=channels,
                         disparity_range=disparity_range)
