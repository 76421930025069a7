import numpy as np
import pytest

from mllite import Dataset


@pytest.fixture
def separable() -> Dataset:
    """Two well separated Gaussian blobs, 30 and 12 rows."""
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(0.0, 0.3, (30, 3)), rng.normal(4.0, 0.3, (12, 3))])
    y = np.array(["near"] * 30 + ["far"] * 12)
    return Dataset(X, y)


@pytest.fixture
def linear_targets() -> Dataset:
    rng = np.random.default_rng(1)
    X = rng.uniform(-1.0, 1.0, (120, 4))
    y = 2.0 * X[:, 0] - X[:, 1] + rng.normal(0.0, 0.05, 120)
    return Dataset(X, y)
