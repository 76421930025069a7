from collections import Counter

import numpy as np
import pytest

from mllite import Dataset, oversample
from mllite.oversample import oversample_with_origins
from utils.custom_exception import LearningError


def test_oversample_balances_classes(separable):
    balanced = oversample(separable, seed=3)
    assert Counter(balanced.y.tolist()) == {"near": 30, "far": 30}
    np.testing.assert_array_equal(balanced.X[: len(separable)], separable.X)


def test_synthetic_rows_lie_between_same_class_rows(separable):
    balanced, origins = oversample_with_origins(separable, k=3, seed=5)
    assert len(origins) == 18
    for row, origin in zip(balanced.X[len(separable) :], origins):
        assert separable.y[origin.base] == separable.y[origin.neighbour] == "far"
        assert origin.base != origin.neighbour
        assert 0.0 <= origin.gap < 1.0
        expected = separable.X[origin.base] + origin.gap * (separable.X[origin.neighbour] - separable.X[origin.base])
        np.testing.assert_allclose(row, expected)


def test_oversample_is_deterministic(separable):
    assert np.array_equal(oversample(separable, seed=1).X, oversample(separable, seed=1).X)
    assert not np.array_equal(oversample(separable, seed=1).X, oversample(separable, seed=2).X)


def test_oversample_target_ratio(separable):
    partial = oversample(separable, target_ratio=0.5)
    assert Counter(partial.y.tolist()) == {"near": 30, "far": 15}


def test_oversample_balanced_input_is_unchanged(separable):
    near = separable.restrict(["near"])
    assert oversample(near) is near


def test_oversample_single_member_class():
    data = Dataset(np.array([[0.0], [1.0], [2.0]]), np.array(["a", "a", "b"]))
    with pytest.raises(LearningError):
        oversample(data)
