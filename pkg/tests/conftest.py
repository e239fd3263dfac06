"""Pytest configuration and fixtures."""

from pathlib import Path

import numpy as np
import pytest

from qrasim.config import Settings, get_settings
from qrasim.core.model import Scheme, SimConfig


def pytest_addoption(parser):
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="Run statistical acceptance tests (minutes)",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def clear_settings_cache():
    """Keep environment changes from leaking through the cached settings."""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def test_settings(tmp_path: Path) -> Settings:
    """Create test settings."""
    return Settings(
        app_name="test-qrasim",
        log_level="DEBUG",
        workers=1,
        default_reps=5,
        default_max_frames=10_000,
        output_dir=tmp_path,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded random stream."""
    return np.random.default_rng(12345)


@pytest.fixture
def small_config() -> SimConfig:
    """A small scenario that converges in a handful of frames."""
    return SimConfig(
        n_devices=8,
        n_slots=6,
        packets_per_device=4,
        learning_rate=0.1,
        scheme=Scheme.PACKET_BASED,
        max_frames=10_000,
        seed=7,
    )
