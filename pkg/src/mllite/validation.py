import hashlib
import logging
import math
from collections import Counter
from typing import Any

import numpy as np
from sklearn.model_selection import KFold, ParameterSampler, StratifiedKFold

from core.settings import settings
from mllite.dataset import Dataset
from mllite.knn import knn_predict
from mllite.oversample import oversample
from mllite.scoring import metrics
from schema.models import Task
from schema.reports import CVReport, FoldResult
from service.utils import parallel_map
from utils.custom_exception import LearningError

logger = logging.getLogger(__name__)

DEFAULT_SEARCH_SPACE: dict[str, list[int]] = {"n_neighbors": list(range(1, 32, 2))}
LOWER_IS_BETTER = {"rmse", "mae"}


def _seed(*key: int) -> int:
    return int(np.random.SeedSequence(list(key)).generate_state(1, np.uint32)[0])


def _score(y_true: np.ndarray, y_pred: np.ndarray, task: Task, metric: str, labels: list[str] | None) -> float:
    report = metrics(y_true, y_pred, task, labels)
    value = getattr(report, metric, None)
    if value is None:
        raise LearningError(f"metric '{metric}' is not available for task {task}")
    return float(value)


def _splitter(task: Task, folds: int, seed: int) -> KFold | StratifiedKFold:
    if task is Task.CLASSIFY:
        return StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    return KFold(n_splits=folds, shuffle=True, random_state=seed)


def _constant_prediction(y: np.ndarray, task: Task, size: int) -> np.ndarray:
    if task is Task.REGRESS:
        return np.full(size, float(np.mean(y.astype(float))))
    counts = Counter(y.tolist())
    top = max(counts.values())
    majority = min(label for label, count in counts.items() if count == top)
    return np.full(size, majority, dtype=y.dtype)


def _fit_predict(
    train: Dataset, queries: np.ndarray, params: dict[str, int], task: Task, use_oversampling: bool, seed: int
) -> np.ndarray:
    if use_oversampling and task is Task.CLASSIFY:
        if min(Counter(train.y.tolist()).values()) >= 2:
            train = oversample(train, seed=seed)
        else:
            logger.debug("Skipping oversampling: a class has a single training row")
    k = min(params["n_neighbors"], len(train))
    return knn_predict(train, queries, k, task)


def _select(
    train: Dataset,
    candidates: list[dict[str, Any]],
    task: Task,
    metric: str,
    folds: int,
    labels: list[str] | None,
    use_oversampling: bool,
    seed: int,
) -> dict[str, Any]:
    """Inner loop: the candidate with the best mean inner-fold score; ties keep the earlier one."""
    inner_folds = folds
    if task is Task.CLASSIFY:
        inner_folds = min(folds, min(Counter(train.y.tolist()).values()))
    inner_folds = min(inner_folds, len(train))
    if inner_folds < 2 or len(candidates) == 1:
        return candidates[0]
    splits = list(_splitter(task, inner_folds, seed).split(train.X, train.y))
    best, best_score = candidates[0], None
    for params in candidates:
        scores = [
            _score(
                train.y[test],
                _fit_predict(train.subset(fit), train.X[test], params, task, use_oversampling, seed),
                task,
                metric,
                labels,
            )
            for fit, test in splits
        ]
        score = float(np.mean(scores))
        if best_score is None:
            best, best_score = params, score
            continue
        better = score < best_score if metric in LOWER_IS_BETTER else score > best_score
        if better:
            best, best_score = params, score
    return best


def _outer_fold(item: tuple) -> tuple[FoldResult, np.ndarray, np.ndarray]:
    (fold, train_idx, test_idx, data, search_space, n_candidates, task, metric, folds, labels,
     use_oversampling, seed) = item
    fold_seed = _seed(seed, fold)
    train = data.subset(train_idx)
    grid_size = math.prod(len(v) for v in search_space.values())
    candidates = list(
        ParameterSampler(search_space, n_iter=min(n_candidates, grid_size), random_state=fold_seed)
    )
    params = _select(train, candidates, task, metric, folds, labels, use_oversampling, fold_seed)
    predictions = _fit_predict(train, data.X[test_idx], params, task, use_oversampling, fold_seed)
    y_test = data.y[test_idx]
    baseline = _constant_prediction(train.y, task, len(test_idx))
    digest = hashlib.sha256(np.sort(train_idx).astype(np.int64).tobytes()).hexdigest()
    result = FoldResult(
        fold=fold,
        n_train=len(train_idx),
        n_test=len(test_idx),
        params={k: int(v) for k, v in params.items()},
        score=_score(y_test, predictions, task, metric, labels),
        baseline_score=_score(y_test, baseline, task, metric, labels),
        train_digest=digest,
    )
    return result, test_idx, predictions


def cross_validate(
    data: Dataset,
    task: Task,
    folds: int | None = None,
    search_space: dict[str, list[int]] | None = None,
    n_candidates: int | None = None,
    metric: str | None = None,
    seed: int | None = None,
    use_oversampling: bool = True,
    jobs: int = 1,
    target: str | None = None,
) -> CVReport:
    """
    Nested cross-validation of the kNN learner.

    The outer folds estimate generalisation; inside each outer training fold a
    random search picks hyperparameters by inner cross-validation. Oversampling
    and feature scaling only ever see training rows. Rows are put in a canonical
    order before splitting, so reordering the input leaves the folds unchanged.

    Raises:
        LearningError: If a class has fewer members than there are folds
    """
    folds = settings.FOLDS if folds is None else folds
    n_candidates = settings.N_CANDIDATES if n_candidates is None else n_candidates
    seed = settings.SEED if seed is None else seed
    metric = metric or ("rmse" if task is Task.REGRESS else "macro_f1")
    search_space = search_space or DEFAULT_SEARCH_SPACE
    if folds < 2:
        raise LearningError("cross-validation needs at least 2 folds")
    if len(data) < folds:
        raise LearningError(f"{len(data)} rows cannot fill {folds} folds")

    labels = None
    if task is Task.CLASSIFY:
        counts = Counter(data.y.astype(str).tolist())
        for label, count in sorted(counts.items()):
            if count < folds:
                raise LearningError(f"class '{label}' has {count} rows, fewer than {folds} folds")
        labels = sorted(counts)
        data = Dataset(data.X, data.y.astype(str), list(data.feature_names), data.row_ids)
        _, codes = np.unique(data.y, return_inverse=True)
        keys = np.column_stack([data.X, codes])
    else:
        keys = np.column_stack([data.X, data.y.astype(float)])
    canonical = np.lexsort(keys.T[::-1])
    ordered = data.subset(canonical)

    splits = list(_splitter(task, folds, seed).split(ordered.X, ordered.y))
    items = [
        (fold, train_idx, test_idx, ordered, search_space, n_candidates, task, metric, folds, labels,
         use_oversampling, seed)
        for fold, (train_idx, test_idx) in enumerate(splits)
    ]
    outcomes = parallel_map(_outer_fold, items, jobs, desc="cross-validate")

    pooled = np.empty(len(ordered), dtype=object)
    for _, test_idx, predictions in outcomes:
        pooled[test_idx] = predictions
    fold_results = [result for result, _, _ in outcomes]
    scores = np.array([r.score for r in fold_results])
    report = CVReport(
        task=task,
        metric=metric,
        target=target,
        folds=fold_results,
        mean_score=float(np.mean(scores)),
        std_score=float(np.std(scores)),
        baseline_mean_score=float(np.mean([r.baseline_score for r in fold_results])),
        pooled=metrics(ordered.y, pooled.astype(ordered.y.dtype), task, labels),
    )
    logger.info(f"Cross-validated {task}: mean {metric} {report.mean_score:.4f} over {folds} folds")
    return report
