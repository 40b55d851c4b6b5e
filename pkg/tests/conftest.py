import numpy as np
import pytest

from backscatter_sim.core.config import parse_config, settings
from backscatter_sim.models.channel import evaluate_channel, sample_path_set
from backscatter_sim.schemas.config import PhysicalConfig, PlanarArray


@pytest.fixture(autouse=True)
def no_log_file(monkeypatch):
    """Keep test runs from appending to the rotating log file"""
    monkeypatch.setattr(settings, "log_file", "")


@pytest.fixture
def phys():
    return PhysicalConfig()


@pytest.fixture
def array():
    return PlanarArray()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def make_config():
    """parse_config with keyword overrides given as dotted keys"""

    def _make(mode="selfcheck", **overrides):
        items = [f"{key.replace('__', '.')}={value}" for key, value in overrides.items()]
        return parse_config(overrides=items, mode=mode)

    return _make


@pytest.fixture
def link_channels(phys, array):
    """Draw (h_st, h_sr) pairs for a tag at the origin and a reader 0.25 m away"""

    def _draw(rng, tag=(0.0, 0.0), reader=(0.25, 0.0)):
        paths = sample_path_set(100, rng)
        return (
            evaluate_channel(paths, array, tag, phys),
            evaluate_channel(paths, array, reader, phys),
        )

    return _draw
