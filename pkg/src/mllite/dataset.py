from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from utils.custom_exception import LearningError

DESCRIPTOR_FEATURES = ["kappa", "theta", "c", "n_star"]


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with labels (classification) or targets (regression)."""

    X: np.ndarray
    y: np.ndarray
    feature_names: list[str] = field(default_factory=list)
    row_ids: list[str] | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise LearningError("X must be a 2-d matrix")
        if X.shape[0] != len(self.y):
            raise LearningError("X and y must have the same number of rows")
        if np.isnan(X).any():
            raise LearningError("X contains NaN; impute before building a dataset")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", np.asarray(self.y))
        if not self.feature_names:
            object.__setattr__(self, "feature_names", [f"x{i}" for i in range(X.shape[1])])

    def __len__(self) -> int:
        return int(self.X.shape[0])

    def subset(self, index: Sequence[int] | np.ndarray) -> "Dataset":
        index = np.asarray(index, dtype=int)
        ids = [self.row_ids[i] for i in index] if self.row_ids is not None else None
        return Dataset(self.X[index], self.y[index], list(self.feature_names), ids)

    def restrict(self, classes: Sequence[str]) -> "Dataset":
        """Rows whose label is one of `classes`."""
        mask = np.isin(self.y.astype(str), list(classes))
        return self.subset(np.flatnonzero(mask))

    @classmethod
    def from_descriptors(cls, frame: pd.DataFrame) -> "Dataset":
        """
        Labelled descriptor rows; c is imputed as 0 for exponential fits and
        rows without a label are dropped.
        """
        labelled = frame[frame["label"].notna() & (frame["label"].astype(str) != "")]
        X = labelled[DESCRIPTOR_FEATURES].astype(float).fillna({"c": 0.0}).to_numpy()
        return cls(
            X,
            labelled["label"].astype(str).to_numpy(),
            list(DESCRIPTOR_FEATURES),
            labelled["relationship_id"].astype(str).tolist(),
        )

    @classmethod
    def from_embeddings(cls, frame: pd.DataFrame, targets: pd.DataFrame, target: str) -> "Dataset":
        """Embedding rows joined to a target column on user id."""
        if target not in targets.columns:
            raise LearningError(f"target column '{target}' not found")
        left = frame.assign(user=frame["user"].astype(str))
        right = targets[["user", target]].assign(user=targets["user"].astype(str))
        joined = left.merge(right, on="user", how="inner").sort_values("user", kind="stable")
        features = [c for c in frame.columns if c != "user"]
        return cls(
            joined[features].astype(float).to_numpy(),
            joined[target].astype(float).to_numpy(),
            features,
            joined["user"].tolist(),
        )
