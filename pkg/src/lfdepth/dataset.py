"""Dataset ingestion and export.

A dataset directory holds one view image per angular position plus an
optional ground-truth PFM. The naming convention lives in a ``layout.cfg``
descriptor (INI) so other conventions - e.g. single-index HCI-style names -
can be described without code changes.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .lightfield import LightField
from .pfm import read_pfm, write_pfm


class DatasetError(ValueError):
    pass


@dataclass
class DatasetLayout:
    root: Path
    pattern: str = "view_{u:02d}_{v:02d}.png"
    gt_file: str | None = "gt_disparity.pfm"
    u_count: int = 7
    v_count: int = 7
    index_order: str = "u_major"  # for {idx}-style patterns: idx = u*V+v or v*U+u

    def view_name(self, u: int, v: int) -> str:
        if "{idx" in self.pattern:
            idx = u * self.v_count + v if self.index_order == "u_major" else v * self.u_count + u
            return self.pattern.format(idx=idx)
        return self.pattern.format(u=u, v=v)

    @classmethod
    def from_directory(cls, root) -> "DatasetLayout":
        root = Path(root)
        layout = cls(root=root)
        desc = root / "layout.cfg"
        if desc.exists():
            parser = configparser.ConfigParser()
            try:
                parser.read(desc)
            except configparser.Error as e:
                raise DatasetError(f"malformed layout descriptor {desc}: {e}") from e
            sec = parser["layout"] if parser.has_section("layout") else {}
            layout.pattern = sec.get("pattern", layout.pattern)
            layout.gt_file = sec.get("gt_file", layout.gt_file) or None
            layout.u_count = int(sec.get("u_count", layout.u_count))
            layout.v_count = int(sec.get("v_count", layout.v_count))
            layout.index_order = sec.get("index_order", layout.index_order)
        return layout


def _load_image(path: Path) -> np.ndarray:
    if path.suffix.lower() == ".pfm":
        arr = read_pfm(path)
        return arr[..., None] if arr.ndim == 2 else arr
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float32) / np.float32(255.0)
    return arr[..., None] if arr.ndim == 2 else arr


def load_lightfield(layout: DatasetLayout | str | Path):
    """Assemble the (U,V,X,Y,C) array; returns (LightField, gt-or-None)."""
    if not isinstance(layout, DatasetLayout):
        layout = DatasetLayout.from_directory(layout)
    views = None
    for u in range(layout.u_count):
        for v in range(layout.v_count):
            path = layout.root / layout.view_name(u, v)
            if not path.exists():
                raise DatasetError(f"missing view ({u},{v}): expected file {path}")
            img = _load_image(path)
            if views is None:
                views = np.empty((layout.u_count, layout.v_count) + img.shape, dtype=np.float32)
            elif img.shape != views.shape[2:]:
                raise DatasetError(
                    f"view ({u},{v}) has shape {img.shape}, expected {views.shape[2:]}")
            views[u, v] = img
    lf = LightField(views)
    gt = None
    if layout.gt_file:
        gt_path = layout.root / layout.gt_file
        if gt_path.exists():
            gt = read_pfm(gt_path)
            if gt.ndim != 2:
                raise DatasetError(f"ground truth {gt_path} must be a single-channel map")
    return lf, gt


def save_dataset(out_dir, lf: LightField, gt=None, masks=None, layout: DatasetLayout | None = None):
    """Write a light field as a loadable dataset directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    layout = layout or DatasetLayout(root=out_dir, u_count=lf.u_count, v_count=lf.v_count)
    for u in range(lf.u_count):
        for v in range(lf.v_count):
            img = lf.views[u, v]
            arr = np.round(img * 255.0).astype(np.uint8)
            if arr.shape[-1] == 1:
                pil = Image.fromarray(arr[..., 0], mode="L")
            elif arr.shape[-1] == 3:
                pil = Image.fromarray(arr, mode="RGB")
            else:
                raise DatasetError(f"cannot export {arr.shape[-1]}-channel views as PNG")
            pil.save(out_dir / layout.view_name(u, v))
    if gt is not None:
        write_pfm(out_dir / (layout.gt_file or "gt_disparity.pfm"), gt)
    if masks is not None:
        for u in range(lf.u_count):
            for v in range(lf.v_count):
                m = (masks[u, v].astype(np.uint8)) * 255
                Image.fromarray(m, mode="L").save(out_dir / f"occlusion_{u:02d}_{v:02d}.png")
    parser = configparser.ConfigParser()
    parser["layout"] = {
        "pattern": layout.pattern,
        "gt_file": layout.gt_file or "",
        "u_count": str(lf.u_count),
        "v_count": str(lf.v_count),
        "index_order": layout.index_order,
    }
    with open(out_dir / "layout.cfg", "w") as f:
        parser.write(f)
