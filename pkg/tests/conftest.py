import numpy as np
import pytest

from lfdepth.dispnet import DispNet, DispNetConfig, SampleVector
from lfdepth.occlusion import OccNetConfig
from lfdepth.synthetic import (LayerSpec, SyntheticSpec, generate_synthetic,
                               single_plane_spec, two_plane_spec)


def toy_dispnet_config(**overrides):
    """Desk-scale learned configuration used by the training tests."""
    base = dict(
        in_channels=1, feature_channels=12, feature_blocks=2,
        aspp_dilations=(3, 6, 8), cost_filters=2, cost_filter_channels=8,
        regression_channels=6,
        coarse=SampleVector(-4.0, 4.0, 1.0),
        residual=SampleVector(-1.0, 1.0, 0.25),
    )
    base.update(overrides)
    return DispNetConfig(**base)


def tiny_dispnet_config(**overrides):
    """Minimal learned configuration for 8x8 gradient checks (double precision)."""
    base = dict(
        in_channels=1, feature_channels=6, feature_blocks=1,
        aspp_dilations=(1, 2), cost_filters=1, cost_filter_channels=4,
        regression_channels=4,
        coarse=SampleVector(-2.0, 2.0, 1.0),
        residual=SampleVector(-0.5, 0.5, 0.25),
        dtype=np.float64,
    )
    base.update(overrides)
    return DispNetConfig(**base)


def training_scene_specs():
    return [
        single_plane_spec(-3.0), single_plane_spec(-1.5), single_plane_spec(0.5),
        single_plane_spec(2.0), single_plane_spec(3.0),
        two_plane_spec(0.0, 2.5), two_plane_spec(-2.0, 1.0),
        SyntheticSpec(layers=(LayerSpec(ramp=("x", -2.0, 2.0)),)),
    ]


def validation_scene_specs():
    return [single_plane_spec(1.5), single_plane_spec(-2.0), two_plane_spec(0.5, 3.0)]


@pytest.fixture(scope="session")
def plane2_scene():
    lf, gt, masks = generate_synthetic(single_plane_spec(2.0), seed=42)
    return lf, gt, masks


@pytest.fixture(scope="session")
def two_plane_scene():
    lf, gt, masks = generate_synthetic(two_plane_spec(0.0, 3.0), seed=9)
    return lf, gt, masks


@pytest.fixture(scope="session")
def oracle_net():
    return DispNet(DispNetConfig(in_channels=1).oracle(), seed=0)
