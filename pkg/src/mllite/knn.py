from collections import Counter

import numpy as np
from sklearn.neighbors import NearestNeighbors
from sklearn.preprocessing import StandardScaler

from mllite.dataset import Dataset
from schema.models import Task
from utils.custom_exception import LearningError


def knn_predict(train: Dataset, queries: np.ndarray, k: int, task: Task) -> np.ndarray:
    """
    k-nearest-neighbour predictions under Euclidean distance on z-scored features.

    Scaling statistics come from the training rows only. A classification vote
    tie goes to the tied class of the nearest neighbour.
    """
    if len(train) == 0:
        raise LearningError("training set is empty")
    if not 1 <= k <= len(train):
        raise LearningError(f"k must lie in [1, {len(train)}], got {k}")
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    scaler = StandardScaler().fit(train.X)
    index = NearestNeighbors(n_neighbors=k, algorithm="brute", metric="euclidean")
    index.fit(scaler.transform(train.X))
    neighbours = index.kneighbors(scaler.transform(queries), return_distance=False)

    if task is Task.REGRESS:
        return train.y[neighbours].astype(float).mean(axis=1)

    predictions = []
    for row in neighbours:
        labels = train.y[row]
        votes = Counter(labels.tolist())
        top = max(votes.values())
        tied = {label for label, count in votes.items() if count == top}
        # neighbours come ordered by distance
        predictions.append(next(label for label in labels.tolist() if label in tied))
    return np.asarray(predictions, dtype=train.y.dtype)
