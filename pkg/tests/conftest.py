import os
from unittest.mock import patch

import pytest

from schema.models import KernelFamily
from schema.schema import EventSeries, KernelParams


def pytest_addoption(parser):
    parser.addoption(
        "--run-slow", action="store_true", default=False, help="run slow statistical and end-to-end tests"
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: mark test as slow (large simulations, full pipeline)")


def pytest_collection_modifyitems(config, items):
    if not config.getoption("--run-slow"):
        skip_slow = pytest.mark.skip(reason="need --run-slow option to run")
        for item in items:
            if "slow" in item.keywords:
                item.add_marker(skip_slow)


@pytest.fixture
def mock_env():
    """Fixture to ensure environment is clean for each test."""
    with patch.dict(os.environ, {}, clear=True):
        yield


@pytest.fixture
def exp_params() -> KernelParams:
    return KernelParams(family=KernelFamily.EXP, kappa=0.8, theta=2.0)


@pytest.fixture
def pl_params() -> KernelParams:
    return KernelParams(family=KernelFamily.PL, kappa=0.3, theta=1.2, c=0.5)


@pytest.fixture
def short_series() -> EventSeries:
    """Hand-sized series with known event times, in hours."""
    return EventSeries(
        sender="u001",
        receiver="p001",
        times=[0.0, 0.5, 0.7, 2.0, 2.1, 5.0],
        observation_end=6.0,
    )
