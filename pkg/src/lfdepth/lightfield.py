"""Light-field container and view geometry.

Conventions used throughout the package:

* a light field is a dense ``(U, V, X, Y, C)`` array of intensities in
  [0, 1]; the angular index ``u`` pairs with the first spatial axis ``x``
  and ``v`` pairs with ``y``;
* the central view at ``(u_c, v_c)`` relates to view ``(u, v)`` through the
  per-pixel disparity ``d``:
  ``center(x, y) = view(x + d*(u_c - u), y + d*(v_c - v))``;
* images are stored channels-last ``(X, Y, C)``; network code converts to
  channels-first at its boundary.

Estimation always happens in a frame where parallax runs along the x axis.
Row combinations (views sharing ``v``) are already in that frame; column
combinations are rotated into it by a quarter turn and their disparity maps
rotated back afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels


class ViewIndexError(IndexError):
    """Angular index outside the view grid."""


@dataclass(frozen=True)
class ViewCombination:
    """Symmetric (left, center, right) view triple fed to the estimator."""

    left: tuple[int, int]
    center: tuple[int, int]
    right: tuple[int, int]
    orientation: str  # "row" | "column"
    baseline: int

    def __post_init__(self):
        if self.orientation not in ("row", "column"):
            raise ValueError(f"orientation must be 'row' or 'column', got {self.orientation!r}")
        if self.baseline < 1:
            raise ValueError(f"baseline must be >= 1, got {self.baseline}")
        l, c, r = self.left, self.center, self.right
        if (l[0] + r[0], l[1] + r[1]) != (2 * c[0], 2 * c[1]):
            raise ValueError(f"views not symmetric about the center: {l}, {c}, {r}")
        shared = 1 if self.orientation == "row" else 0
        if not (l[shared] == c[shared] == r[shared]):
            raise ValueError(f"{self.orientation} combination must share axis {shared}: {l}, {c}, {r}")


class LightField:
    """Immutable dense light field with an odd view grid."""

    def __init__(self, views, copy: bool = False):
        arr = np.asarray(views, dtype=np.float32)
        if arr.ndim != 5:
            raise ValueError(f"light field must be (U,V,X,Y,C), got shape {arr.shape}")
        u, v = arr.shape[:2]
        if u % 2 == 0 or v % 2 == 0:
            raise ValueError(f"angular extents must be odd so the central view exists, got {u}x{v}")
        lo, hi = float(arr.min()), float(arr.max())
        if lo < -1e-6 or hi > 1 + 1e-6:
            raise ValueError(f"intensities must lie in [0,1], got range [{lo:.4g}, {hi:.4g}]")
        self.views = np.array(arr, copy=True) if copy else arr
        self.views.setflags(write=False)

    @property
    def u_count(self) -> int:
        return self.views.shape[0]

    @property
    def v_count(self) -> int:
        return self.views.shape[1]

    @property
    def spatial_shape(self) -> tuple[int, int]:
        return self.views.shape[2:4]

    @property
    def channels(self) -> int:
        return self.views.shape[4]

    @property
    def angular_center(self) -> tuple[int, int]:
        return (self.u_count - 1) // 2, (self.v_count - 1) // 2

    def extract_view(self, u: int, v: int) -> np.ndarray:
        """Copy of the sub-aperture image at (u, v), shape (X, Y, C)."""
        if not (0 <= u < self.u_count) or not (0 <= v < self.v_count):
            raise ViewIndexError(
                f"view ({u},{v}) outside grid {self.u_count}x{self.v_count}")
        return np.array(self.views[u, v], copy=True)

    def center_view(self) -> np.ndarray:
        return self.extract_view(*self.angular_center)


def enumerate_combinations(lf: LightField, offsets) -> list[ViewCombination]:
    """One row and one column combination per offset, symmetric about center.

    Offsets are the view distances between the center and each source view.
    """
    uc, vc = lf.angular_center
    combos = []
    for off in offsets:
        off = int(off)
        if off < 1:
            raise ValueError(f"offset must be >= 1, got {off}")
        if off > uc or off > vc:
            raise ValueError(
                f"offset {off} exceeds angular half-extent ({uc},{vc}) of the view grid")
        combos.append(ViewCombination((uc - off, vc), (uc, vc), (uc + off, vc), "row", off))
        combos.append(ViewCombination((uc, vc - off), (uc, vc), (uc, vc + off), "column", off))
    return combos


def combination_views(lf: LightField, combo: ViewCombination):
    """(left, center, right) images for a combination, unrotated."""
    return (lf.extract_view(*combo.left),
            lf.extract_view(*combo.center),
            lf.extract_view(*combo.right))


def _rot_to_estimation(img: np.ndarray) -> np.ndarray:
    # maps the column-combination relation center(x,y)=left(x, y+d*b) onto the
    # row convention center(x,y)=left(x+d*b, y)
    return np.ascontiguousarray(np.rot90(img, k=-1, axes=(0, 1)))


def _rot_from_estimation(img: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.rot90(img, k=1, axes=(0, 1)))


def rotate_inputs(images, orientation: str):
    """Rotate a combination's three views into the estimation frame.

    Row combinations pass through unchanged; column combinations get a
    quarter turn so their vertical parallax becomes horizontal with the same
    sign convention as row combinations.
    """
    if orientation == "row":
        return tuple(images)
    if orientation == "column":
        return tuple(_rot_to_estimation(im) for im in images)
    raise ValueError(f"orientation must be 'row' or 'column', got {orientation!r}")


_GRID_CACHE: dict = {}


def base_grid(shape_xy, dtype=np.float32):
    """Identity sampling coordinates (x_map, y_map) for an (X, Y) image."""
    key = (shape_xy, np.dtype(dtype).name)
    g = _GRID_CACHE.get(key)
    if g is None:
        x, y = shape_xy
        bx = np.broadcast_to(np.arange(x, dtype=dtype)[:, None], (x, y))
        by = np.broadcast_to(np.arange(y, dtype=dtype)[None, :], (x, y))
        g = (np.ascontiguousarray(bx), np.ascontiguousarray(by))
        _GRID_CACHE[key] = g
    return g


def warp_source_to_center(source: np.ndarray, disparity: np.ndarray, side: str) -> np.ndarray:
    """Warp a source view onto the center: left by +d along x, right by -d.

    Bilinear interpolation with border clamp; ``source`` is (X, Y, C) and
    ``disparity`` the aligned (X, Y) map in the estimation frame.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    if source.shape[:2] != disparity.shape:
        raise ValueError(
            f"source spatial shape {source.shape[:2]} != disparity shape {disparity.shape}")
    img = np.ascontiguousarray(np.moveaxis(source, -1, 0))
    bx, by = base_grid(disparity.shape, img.dtype)
    d = disparity.astype(img.dtype, copy=False)
    cx = bx + d if side == "left" else bx - d
    out = kernels.bilinear_forward(img, np.ascontiguousarray(cx), by)
    return np.ascontiguousarray(np.moveaxis(out, 0, -1))


def warp_view_to_center(view: np.ndarray, disparity: np.ndarray, du: int, dv: int) -> np.ndarray:
    """Warp any view onto the center given its angular offset (du, dv) = (u_c-u, v_c-v)."""
    if view.shape[:2] != disparity.shape:
        raise ValueError(
            f"view spatial shape {view.shape[:2]} != disparity shape {disparity.shape}")
    img = np.ascontiguousarray(np.moveaxis(view, -1, 0))
    bx, by = base_grid(disparity.shape, img.dtype)
    d = disparity.astype(img.dtype, copy=False)
    cx = np.ascontiguousarray(bx + d * du) if du else bx
    cy = np.ascontiguousarray(by + d * dv) if dv else by
    out = kernels.bilinear_forward(img, cx, cy)
    return np.ascontiguousarray(np.moveaxis(out, 0, -1))


def finalize_disparity(d_tilde: np.ndarray, combo: ViewCombination) -> np.ndarray:
    """Scale an estimation-frame map by the view distance and undo rotation.

    Row: divide by (u_c - u_left). Column: divide by (v_c - v_left), then
    rotate back so the map aligns with the unrotated central view.
    """
    if combo.orientation == "row":
        div = combo.center[0] - combo.left[0]
    else:
        div = combo.center[1] - combo.left[1]
    if div == 0:
        raise ZeroDivisionError("combination has zero baseline")
    scaled = d_tilde / np.asarray(div, dtype=d_tilde.dtype)
    if combo.orientation == "column":
        scaled = _rot_from_estimation(scaled)
    return scaled


AUX_PRESETS = ("diag12", "default16")


def auxiliary_views(lf: LightField, preset="default16", exclude=()) -> list[tuple[int, int]]:
    """Views used to score candidate maps during fusion.

    ``diag12``: the 12 diagonal views (u_c +- i, v_c +- i), i in {1,2,3}.
    ``default16``: diag12 plus the four adjacent cross views. An explicit
    list of (u, v) pairs is accepted instead of a preset name. Views listed
    in ``exclude`` (e.g. the estimator's input views) are dropped.
    """
    uc, vc = lf.angular_center
    if isinstance(preset, str):
        if preset not in AUX_PRESETS:
            raise ValueError(f"unknown auxiliary preset {preset!r}; expected one of {AUX_PRESETS}")
        reach = min(3, uc, vc)
        views = [(uc + s * i, vc + t * i)
                 for i in range(1, reach + 1)
                 for s in (-1, 1) for t in (-1, 1)]
        if preset == "default16":
            views += [(uc - 1, vc), (uc + 1, vc), (uc, vc - 1), (uc, vc + 1)]
    else:
        views = [(int(u), int(v)) for u, v in preset]
    seen = set()
    out = []
    excl = {tuple(e) for e in exclude}
    for u, v in views:
        if not (0 <= u < lf.u_count) or not (0 <= v < lf.v_count):
            raise ViewIndexError(f"auxiliary view ({u},{v}) outside grid "
                                 f"{lf.u_count}x{lf.v_count}")
        if (u, v) == (uc, vc):
            raise ValueError("auxiliary views must exclude the central view")
        if (u, v) in seen:
            raise ValueError(f"duplicate auxiliary view ({u},{v})")
        seen.add((u, v))
        if (u, v) not in excl:
            out.append((u, v))
    return out
