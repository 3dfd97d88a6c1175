"""Shared fixtures for the stegwave test suite"""

import numpy as np
import pytest

from stegwave.config import configure_logging
from stegwave.core.imageio import ImagePlane, RgbImage
from stegwave.corpora import natural_image, natural_rgb


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run full-scale acceptance tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-scale run, enabled with --runslow")
    configure_logging("WARNING")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def gray_image() -> ImagePlane:
    return natural_image(64, 48, seed=3)


@pytest.fixture
def rgb_image() -> RgbImage:
    return natural_rgb(64, 48, seed=5)


@pytest.fixture
def ramp_plane() -> ImagePlane:
    """4x4 plane holding 1..16 row by row"""
    return ImagePlane.from_array(np.arange(1, 17, dtype=np.uint8).reshape(4, 4))
