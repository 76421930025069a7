from collections.abc import Sequence

import numpy as np
from sklearn.metrics import (
    accuracy_score,
    confusion_matrix,
    mean_absolute_error,
    mean_squared_error,
    precision_recall_fscore_support,
)

from schema.models import Task
from schema.reports import ClassMetrics, MetricReport
from utils.custom_exception import LearningError


def column_shares(confusion: np.ndarray) -> np.ndarray:
    """Each non-empty column scaled to sum to one; empty columns stay zero."""
    totals = confusion.sum(axis=0, keepdims=True).astype(float)
    return np.divide(confusion, totals, out=np.zeros(confusion.shape), where=totals > 0)


def metrics(
    y_true: Sequence,
    y_pred: Sequence,
    task: Task,
    labels: Sequence[str] | None = None,
) -> MetricReport:
    """
    Per-class precision/recall/F1, macro-F1 and a confusion matrix for
    classification; RMSE and MAE for regression.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.size == 0:
        raise LearningError("metrics need at least one prediction")
    if y_true.shape != y_pred.shape:
        raise LearningError("y_true and y_pred must have equal lengths")

    if task is Task.REGRESS:
        y_true = y_true.astype(float)
        y_pred = y_pred.astype(float)
        return MetricReport(
            task=task,
            n=int(y_true.size),
            rmse=float(np.sqrt(mean_squared_error(y_true, y_pred))),
            mae=float(mean_absolute_error(y_true, y_pred)),
        )

    y_true = y_true.astype(str)
    y_pred = y_pred.astype(str)
    labels = sorted(set(labels) if labels is not None else set(y_true) | set(y_pred))
    precision, recall, f1, support = precision_recall_fscore_support(
        y_true, y_pred, labels=labels, zero_division=0
    )
    confusion = confusion_matrix(y_true, y_pred, labels=labels)
    return MetricReport(
        task=task,
        n=int(y_true.size),
        per_class={
            label: ClassMetrics(precision=p, recall=r, f1=f, support=int(s))
            for label, p, r, f, s in zip(labels, precision, recall, f1, support)
        },
        macro_f1=float(np.mean(f1)),
        accuracy=float(accuracy_score(y_true, y_pred)),
        labels=list(labels),
        confusion=confusion.tolist(),
        confusion_column_share=column_shares(confusion).tolist(),
    )
