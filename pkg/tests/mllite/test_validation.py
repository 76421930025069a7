import numpy as np
import pytest

from mllite import Dataset, cross_validate
from schema.models import Task
from utils.custom_exception import LearningError

SMALL_SPACE = {"n_neighbors": [1, 3, 5]}


def test_classification_on_separable_classes(separable):
    report = cross_validate(separable, Task.CLASSIFY, folds=3, search_space=SMALL_SPACE, n_candidates=3, seed=0)

    assert report.metric == "macro_f1"
    assert len(report.folds) == 3
    assert sum(f.n_test for f in report.folds) == len(separable)
    assert report.pooled.macro_f1 > 0.95
    assert all(f.params["n_neighbors"] in SMALL_SPACE["n_neighbors"] for f in report.folds)


def test_regression_beats_constant_predictor(linear_targets):
    report = cross_validate(
        linear_targets, Task.REGRESS, folds=5, search_space=SMALL_SPACE, n_candidates=3, seed=0, target="y"
    )
    assert report.metric == "rmse"
    assert report.target == "y"
    assert report.mean_score < report.baseline_mean_score
    assert report.pooled.rmse < float(np.std(linear_targets.y))


def test_cross_validation_ignores_row_order(separable):
    order = np.random.default_rng(9).permutation(len(separable))
    first = cross_validate(separable, Task.CLASSIFY, folds=3, search_space=SMALL_SPACE, n_candidates=2, seed=4)
    second = cross_validate(
        separable.subset(order), Task.CLASSIFY, folds=3, search_space=SMALL_SPACE, n_candidates=2, seed=4
    )
    assert first == second


def test_cross_validation_jobs_do_not_change_results(linear_targets):
    kwargs = dict(folds=4, search_space=SMALL_SPACE, n_candidates=2, seed=1)
    assert cross_validate(linear_targets, Task.REGRESS, jobs=1, **kwargs) == cross_validate(
        linear_targets, Task.REGRESS, jobs=2, **kwargs
    )


def test_cross_validation_needs_enough_rows():
    tiny = Dataset(np.arange(6.0).reshape(6, 1), np.array(["a"] * 4 + ["b"] * 2))
    with pytest.raises(LearningError, match="class 'b'"):
        cross_validate(tiny, Task.CLASSIFY, folds=3)
    with pytest.raises(LearningError):
        cross_validate(tiny, Task.CLASSIFY, folds=1)
    with pytest.raises(LearningError):
        cross_validate(Dataset(np.zeros((2, 1)), np.zeros(2)), Task.REGRESS, folds=3)


def test_unknown_metric(separable):
    with pytest.raises(LearningError):
        cross_validate(separable, Task.CLASSIFY, folds=3, search_space=SMALL_SPACE, metric="rmse")
