import logging
import math
from typing import NamedTuple

import numpy as np
from sklearn.neighbors import NearestNeighbors

from mllite.dataset import Dataset
from service.utils import make_rng
from utils.custom_exception import LearningError

logger = logging.getLogger(__name__)


class SyntheticOrigin(NamedTuple):
    """Row indices (into the input) and coefficient a synthetic row was made from."""

    base: int
    neighbour: int
    gap: float


def oversample_with_origins(
    train: Dataset, target_ratio: float = 1.0, k: int = 5, seed: int = 0
) -> tuple[Dataset, list[SyntheticOrigin]]:
    """
    SMOTE-style oversampling: each synthetic row is base + gap * (neighbour - base)
    for a minority row, one of its k nearest same-class rows and gap ~ U[0, 1).

    Every class is raised to ceil(target_ratio * majority count); synthetic rows
    are appended after the originals, class by class in sorted label order.
    """
    if k < 1:
        raise LearningError("k must be >= 1")
    if target_ratio <= 0:
        raise LearningError("target_ratio must be positive")
    classes, counts = np.unique(train.y, return_counts=True)
    target = math.ceil(round(target_ratio * counts.max(), 9))

    new_rows: list[np.ndarray] = []
    new_labels: list[np.ndarray] = []
    origins: list[SyntheticOrigin] = []
    for class_index, (label, count) in enumerate(zip(classes, counts)):
        need = target - int(count)
        if need <= 0:
            continue
        if count < 2:
            raise LearningError(f"class '{label}' has a single member and cannot be oversampled")
        members = np.flatnonzero(train.y == label)
        points = train.X[members]
        k_eff = min(k, int(count) - 1)
        found = NearestNeighbors(n_neighbors=k_eff + 1).fit(points).kneighbors(points, return_distance=False)
        neighbours = np.array([[j for j in row if j != i][:k_eff] for i, row in enumerate(found)])

        rng = make_rng(seed, class_index)
        base = rng.integers(0, count, need)
        pick = neighbours[base, rng.integers(0, k_eff, need)]
        gap = rng.random(need)
        new_rows.append(points[base] + gap[:, None] * (points[pick] - points[base]))
        new_labels.append(np.full(need, label, dtype=train.y.dtype))
        origins.extend(
            SyntheticOrigin(int(members[b]), int(members[p]), float(g)) for b, p, g in zip(base, pick, gap)
        )
        logger.debug(f"Oversampled class {label}: {count} -> {target}")

    if not new_rows:
        return train, []
    X = np.vstack([train.X, *new_rows])
    y = np.concatenate([train.y, *new_labels])
    return Dataset(X, y, list(train.feature_names)), origins


def oversample(train: Dataset, target_ratio: float = 1.0, k: int = 5, seed: int = 0) -> Dataset:
    return oversample_with_origins(train, target_ratio, k, seed)[0]
