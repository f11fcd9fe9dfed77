"""Flat INI configuration: every hyperparameter surfaced with its default.

``mode`` (dense | sparse) picks the sampling ranges, input combinations, and
fusion strategy; any individual key can still be overridden. Every run
echoes the fully resolved configuration next to its outputs so defaults are
recorded.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dispnet import (DENSE_COARSE, DENSE_RESIDUAL, SPARSE_COARSE, SPARSE_RESIDUAL,
                      DispNetConfig, SampleVector)
from .fusion import FusionConfig
from .losses import LossWeights
from .occlusion import OccNetConfig
from .pipeline import PipelineConfig
from .training import TrainConfig


class ConfigError(ValueError):
    pass


_MODE_DEFAULTS = {
    "dense": {"coarse": DENSE_COARSE, "residual": DENSE_RESIDUAL,
              "offsets": (3, 2), "strategy": "weighted"},
    "sparse": {"coarse": SPARSE_COARSE, "residual": SPARSE_RESIDUAL,
               "offsets": (1,), "strategy": "min_error"},
}


def _defaults(mode: str) -> dict:
    md = _MODE_DEFAULTS[mode]
    return {
        "samples": {
            "mode": mode,
            "coarse_min": md["coarse"].s_min,
            "coarse_max": md["coarse"].s_max,
            "coarse_interval": md["coarse"].interval,
            "residual_min": md["residual"].s_min,
            "residual_max": md["residual"].s_max,
            "residual_interval": md["residual"].interval,
        },
        "model": {
            "in_channels": 0,  # 0 = infer from the data
            "feature_channels": 16,
            "feature_blocks": 3,
            "aspp_dilations": "3,6,8",
            "cost_filters": 2,
            "cost_filter_channels": 16,
            "regression_channels": 8,
            "shared_filters": True,
            "coarse_to_fine": True,
            "leaky_slope": 0.1,
            "feature_mode": "learned",
            "score_mode": "learned",
            "neg_variance_gain": 150.0,
            "seed": 0,
        },
        "occnet": {
            "depth": 2,
            "max_channels": 32,
            "seed": 1,
        },
        "fusion": {
            "strategy": md["strategy"],
            "n_prime": 2,
            "occlusion": "quantile_median",
            "q": 0.95,
            "k": 8,
            "aux_preset": "default16",
            "exclude_inputs_from_aux": True,
        },
        "pipeline": {
            "offsets": ",".join(str(o) for o in md["offsets"]),
        },
        "losses": {
            "alpha1": 1.0,
            "alpha2": 0.1,
            "alpha3": 0.05,
            "eta": 100.0,
            "coarse_weight": 0.5,
        },
        "training": {
            "epochs": 60,
            "lr": 1e-3,
            "lr_decay": 0.8,
            "lr_decay_every": 50,
            "crop": 48,
            "offsets": "1",
            "seed": 0,
            "checkpoint_every": 50,
        },
    }


def _parse_like(default, raw: str, where: str):
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw.strip()
    except ValueError as e:
        raise ConfigError(f"config field {where}: {e}") from e


@dataclass
class AppConfig:
    mode: str
    raw: dict

    def sample_vectors(self):
        s = self.raw["samples"]
        coarse = SampleVector(s["coarse_min"], s["coarse_max"], s["coarse_interval"])
        residual = SampleVector(s["residual_min"], s["residual_max"], s["residual_interval"])
        return coarse, residual

    def dispnet_config(self, channels: int | None = None, oracle: bool = False) -> DispNetConfig:
        m = self.raw["model"]
        coarse, residual = self.sample_vectors()
        in_channels = m["in_channels"] or (channels or 1)
        cfg = DispNetConfig(
            in_channels=in_channels,
            feature_channels=m["feature_channels"],
            feature_blocks=m["feature_blocks"],
            aspp_dilations=_int_tuple(m["aspp_dilations"], "model.aspp_dilations"),
            cost_filters=m["cost_filters"],
            cost_filter_channels=m["cost_filter_channels"],
            regression_channels=m["regression_channels"],
            shared_filters=m["shared_filters"],
            coarse_to_fine=m["coarse_to_fine"],
            leaky_slope=m["leaky_slope"],
            coarse=coarse,
            residual=residual,
            feature_mode=m["feature_mode"],
            score_mode=m["score_mode"],
            neg_variance_gain=m["neg_variance_gain"],
        )
        return cfg.oracle() if oracle else cfg

    def occnet_config(self, channels: int) -> OccNetConfig:
        o = self.raw["occnet"]
        return OccNetConfig(in_channels=2 * channels + 1, depth=o["depth"],
                            max_channels=o["max_channels"],
                            leaky_slope=self.raw["model"]["leaky_slope"])

    def fusion_config(self) -> FusionConfig:
        f = self.raw["fusion"]
        return FusionConfig(strategy=f["strategy"], n_prime=f["n_prime"],
                            occlusion=f["occlusion"], q=f["q"], k=f["k"])

    def pipeline_config(self) -> PipelineConfig:
        f = self.raw["fusion"]
        return PipelineConfig(offsets=_int_tuple(self.raw["pipeline"]["offsets"],
                                                 "pipeline.offsets"),
                              fusion=self.fusion_config(),
                              aux_preset=f["aux_preset"],
                              exclude_inputs_from_aux=f["exclude_inputs_from_aux"])

    def loss_weights(self) -> LossWeights:
        l = self.raw["losses"]
        return LossWeights(alpha1=l["alpha1"], alpha2=l["alpha2"], alpha3=l["alpha3"],
                           eta=l["eta"], coarse_weight=l["coarse_weight"])

    def train_config(self) -> TrainConfig:
        t = self.raw["training"]
        return TrainConfig(epochs=t["epochs"], lr=t["lr"], lr_decay=t["lr_decay"],
                           lr_decay_every=t["lr_decay_every"], crop=t["crop"],
                           offsets=_int_tuple(t["offsets"], "training.offsets"),
                           seed=t["seed"], checkpoint_every=t["checkpoint_every"])


def _int_tuple(raw, where: str):
    try:
        return tuple(int(p) for p in str(raw).split(",") if p.strip())
    except ValueError as e:
        raise ConfigError(f"config field {where}: {e}") from e


def load_config(path=None, mode: str | None = None) -> AppConfig:
    """Merge a config file over the mode defaults; unknown keys are errors."""
    file_mode = None
    parser = None
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            read = parser.read(path)
        except configparser.Error as e:
            raise ConfigError(f"cannot parse config {path}: {e}") from e
        if not read:
            raise ConfigError(f"config file not found: {path}")
        if parser.has_option("samples", "mode"):
            file_mode = parser.get("samples", "mode").strip().lower()
    resolved_mode = mode or file_mode or "dense"
    if resolved_mode not in _MODE_DEFAULTS:
        raise ConfigError(f"mode must be dense|sparse, got {resolved_mode!r}")
    raw = _defaults(resolved_mode)
    if parser is not None:
        for section in parser.sections():
            if section not in raw:
                raise ConfigError(f"unknown config section [{section}] "
                                  f"(known: {', '.join(sorted(raw))})")
            for key, value in parser.items(section):
                if key not in raw[section]:
                    raise ConfigError(
                        f"unknown config field {section}.{key} "
                        f"(known: {', '.join(sorted(raw[section]))})")
                raw[section][key] = _parse_like(raw[section][key], value, f"{section}.{key}")
    raw["samples"]["mode"] = resolved_mode
    return AppConfig(mode=resolved_mode, raw=raw)


def echo_config(cfg: AppConfig, path):
    """Write the fully resolved configuration (all defaults made explicit)."""
    parser = configparser.ConfigParser()
    for section, values in cfg.raw.items():
        parser[section] = {k: str(v) for k, v in values.items()}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        parser.write(f)
