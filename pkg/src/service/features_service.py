import logging
from collections import defaultdict
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from schema.models import KernelFamily, RelationshipCategory
from schema.reports import RelationshipDescriptor, UserEmbedding
from schema.schema import EventSeries, FittedModel
from service.utils import read_layout_csv, write_csv
from utils.constants.constant import EMBEDDING_DIMENSION, SIX_POINT_SUMMARY
from utils.custom_exception import FeatureError, FeatureExportError

logger = logging.getLogger(__name__)

DESCRIPTOR_LAYOUT = "relationship-descriptor/v1"
EMBEDDING_LAYOUT = "user-embedding/v1"

# per-series quantities summarised in a user embedding, in vector order
EMBEDDING_FIT_VALUES = ("kappa", "c", "theta", "n_star")
EMBEDDING_ACTIVITY_VALUES = ("n_events", "duration", "mean_gap", "median_gap")
EMBEDDING_COLUMNS = [
    f"{name}_{stat}"
    for name in EMBEDDING_FIT_VALUES + EMBEDDING_ACTIVITY_VALUES
    for stat in SIX_POINT_SUMMARY
] + ["n_series", "total_events"]

LAYOUTS: dict[str, list[str]] = {
    DESCRIPTOR_LAYOUT: ["relationship_id", "family", "kappa", "theta", "c", "n_star", "label"],
    EMBEDDING_LAYOUT: ["user"] + EMBEDDING_COLUMNS,
}


def six_point_summary(values: Sequence[float]) -> list[float]:
    """(min, q25, median, mean, q75, max) with linear interpolation between order statistics."""
    arr = np.sort(np.asarray(values, dtype=float))
    q = np.quantile(arr, [0.0, 0.25, 0.5, 0.75, 1.0])
    return [float(q[0]), float(q[1]), float(q[2]), float(np.mean(arr)), float(q[3]), float(q[4])]


def _activity(series: EventSeries) -> dict[str, float]:
    times = series.as_array()
    gaps = np.diff(times)
    return {
        "n_events": float(times.size),
        "duration": float(times[-1] - times[0]),
        "mean_gap": float(np.mean(gaps)) if gaps.size else 0.0,
        "median_gap": float(np.median(gaps)) if gaps.size else 0.0,
    }


class FeaturesService:
    """Relationship descriptors and user embeddings built from fitted models."""

    @staticmethod
    def relationship_descriptor(
        model: FittedModel,
        label: RelationshipCategory | None = None,
        relationship_id: str | None = None,
    ) -> RelationshipDescriptor:
        if not model.converged:
            raise FeatureError("descriptor needs a converged model")
        if relationship_id is None:
            relationship_id = f"{model.sender}->{model.receiver}" if model.sender else "joint"
        return RelationshipDescriptor(
            relationship_id=relationship_id,
            family=model.family,
            kappa=model.params.kappa,
            theta=model.params.theta,
            c=model.params.c,
            n_star=model.n_star,
            label=label,
        )

    @staticmethod
    def user_embedding(
        user: str,
        models: Sequence[FittedModel],
        series: Sequence[EventSeries],
    ) -> UserEmbedding:
        """
        Fixed-length descriptor of a user's outbound activity.

        Layout (user-embedding/v1): six-point summaries of per-series kappa, c
        (0 for exponential fits), theta and n*, then of event count, duration in
        hours, mean and median inter-event gap (0 for single-event series), then
        the number of series and total events.
        """
        if not models or not series:
            raise FeatureError(f"user {user} has no fitted series")
        if len(models) != len(series):
            raise FeatureError("models and series must be aligned")
        if any(s.sender != user for s in series):
            raise FeatureError(f"every series of user {user} must be outbound from that user")

        per_series: dict[str, list[float]] = defaultdict(list)
        for model, s in zip(models, series):
            per_series["kappa"].append(model.params.kappa)
            per_series["c"].append(model.params.c if model.family is KernelFamily.PL else 0.0)
            per_series["theta"].append(model.params.theta)
            per_series["n_star"].append(model.n_star)
            for name, value in _activity(s).items():
                per_series[name].append(value)

        vector: list[float] = []
        for name in EMBEDDING_FIT_VALUES + EMBEDDING_ACTIVITY_VALUES:
            vector.extend(six_point_summary(per_series[name]))
        vector.extend([float(len(series)), float(sum(s.n_events for s in series))])
        return UserEmbedding(user=user, vector=vector, layout=EMBEDDING_LAYOUT)

    @classmethod
    def embed_users(
        cls, models: Sequence[FittedModel], series: Sequence[EventSeries]
    ) -> list[UserEmbedding]:
        """Embeddings of every sender, matching models to series by dyad, in sorted user order."""
        by_key = {(m.sender, m.receiver): m for m in models}
        grouped: dict[str, tuple[list[FittedModel], list[EventSeries]]] = defaultdict(lambda: ([], []))
        for s in series:
            model = by_key.get(s.key)
            if model is None:
                continue
            grouped[s.sender][0].append(model)
            grouped[s.sender][1].append(s)
        embeddings = [cls.user_embedding(user, *grouped[user]) for user in sorted(grouped)]
        logger.info(f"Built {len(embeddings)} user embeddings of dimension {EMBEDDING_DIMENSION}")
        return embeddings

    @staticmethod
    def to_frame(
        items: Sequence[RelationshipDescriptor] | Sequence[UserEmbedding], layout: str | None = None
    ) -> tuple[str, pd.DataFrame]:
        kinds = {type(item) for item in items}
        if len(kinds) > 1:
            raise FeatureExportError("feature items must all be of one kind")
        if items:
            inferred = DESCRIPTOR_LAYOUT if isinstance(items[0], RelationshipDescriptor) else EMBEDDING_LAYOUT
            if layout is not None and layout != inferred:
                raise FeatureExportError(f"items do not match layout {layout}")
            layout = inferred
        if layout not in LAYOUTS:
            raise FeatureExportError("an empty export needs a known layout")

        if layout == DESCRIPTOR_LAYOUT:
            rows = [
                {
                    **item.model_dump(include={"relationship_id", "kappa", "theta", "c", "n_star"}),
                    "family": str(item.family),
                    "label": str(item.label) if item.label else None,
                }
                for item in items
            ]
        else:
            rows = [{"user": item.user, **dict(zip(EMBEDDING_COLUMNS, item.vector))} for item in items]
        return layout, pd.DataFrame(rows, columns=LAYOUTS[layout])

    @classmethod
    def export_features(
        cls,
        items: Sequence[RelationshipDescriptor] | Sequence[UserEmbedding],
        sink: str | Path,
        layout: str | None = None,
    ) -> Path:
        """
        Write features as CSV: a '#layout=' line, a header naming every layout
        column, then one row per item in input order.
        """
        layout, frame = cls.to_frame(items, layout)
        return write_csv(sink, frame, layout=layout)

    @staticmethod
    def import_features(source: str | Path, expected_layout: str | None = None) -> tuple[str, pd.DataFrame]:
        layout, frame = read_layout_csv(source)
        if layout not in LAYOUTS:
            raise FeatureError(f"unknown feature layout: {layout}")
        if expected_layout is not None and layout != expected_layout:
            raise FeatureError(f"expected layout {expected_layout}, found {layout}")
        if list(frame.columns) != LAYOUTS[layout]:
            raise FeatureError(f"columns do not match layout {layout}")
        return layout, frame

    @classmethod
    def read_embeddings(cls, source: str | Path) -> list[UserEmbedding]:
        _, frame = cls.import_features(source, EMBEDDING_LAYOUT)
        return [
            UserEmbedding(user=str(row[0]), vector=[float(v) for v in row[1:]], layout=EMBEDDING_LAYOUT)
            for row in frame.itertuples(index=False)
        ]
