"""End-to-end inference: combinations -> rotation -> estimation -> fusion."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dispnet import DispNet
from .fusion import FusionConfig, candidate_error, fuse, warping_errors
from .lightfield import (LightField, ViewCombination, auxiliary_views, combination_views,
                         enumerate_combinations, finalize_disparity, rotate_inputs)
from .training import to_chw


@dataclass
class PipelineConfig:
    offsets: tuple = (3, 2)       # dense default; sparse uses (1,)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    aux_preset: object = "default16"
    exclude_inputs_from_aux: bool = True


def dense_pipeline_config() -> PipelineConfig:
    return PipelineConfig(offsets=(3, 2),
                          fusion=FusionConfig(strategy="weighted", n_prime=2))


def sparse_pipeline_config() -> PipelineConfig:
    return PipelineConfig(offsets=(1,),
                          fusion=FusionConfig(strategy="min_error"))


@dataclass
class PipelineResult:
    disparity: np.ndarray
    candidates: list
    errors: list
    combos: list
    aux: list


def estimate_combination(dispnet: DispNet, lf: LightField, combo: ViewCombination) -> np.ndarray:
    """One candidate map: rotate into the estimation frame, estimate, scale back."""
    views = rotate_inputs(combination_views(lf, combo), combo.orientation)
    dtype = dispnet.config.dtype
    left, center, right = (to_chw(v, dtype) for v in views)
    _, _, d = dispnet.estimate(center, left, right)
    return finalize_disparity(d.data, combo)


def estimate_lightfield(lf: LightField, dispnet: DispNet,
                        cfg: PipelineConfig | None = None) -> PipelineResult:
    """Full pipeline over all configured view combinations, fused per config."""
    cfg = cfg or dense_pipeline_config()
    combos = enumerate_combinations(lf, cfg.offsets)
    candidates = [estimate_combination(dispnet, lf, combo) for combo in combos]
    exclude = set()
    if cfg.exclude_inputs_from_aux:
        for combo in combos:
            exclude.update((combo.left, combo.right))
    aux = auxiliary_views(lf, cfg.aux_preset, exclude=exclude)
    bundles = [candidate_error(warping_errors(lf, d, aux), cfg.fusion) for d in candidates]
    final = fuse([(d, b.e) for d, b in zip(candidates, bundles)], cfg.fusion)
    return PipelineResult(final.astype(np.float32), candidates, bundles, combos, aux)
