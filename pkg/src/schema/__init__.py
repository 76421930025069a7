from schema.models import Channel, KernelFamily, RelationshipCategory, SplitMode, Task
from schema.reports import (
    BuildSummary,
    ChangePointReport,
    CVReport,
    FitFailure,
    HoldoutReport,
    KernelComparisonReport,
    MetricReport,
    ProfileReport,
    RelationshipDescriptor,
    UserEmbedding,
    WilcoxonResult,
)
from schema.schema import EventSeries, FittedModel, KernelParams, RawEvent, RelationshipRecord

__all__ = [
    "Channel",
    "KernelFamily",
    "RelationshipCategory",
    "SplitMode",
    "Task",
    "RawEvent",
    "EventSeries",
    "KernelParams",
    "RelationshipRecord",
    "FittedModel",
    "BuildSummary",
    "ProfileReport",
    "HoldoutReport",
    "KernelComparisonReport",
    "ChangePointReport",
    "WilcoxonResult",
    "FitFailure",
    "RelationshipDescriptor",
    "UserEmbedding",
    "MetricReport",
    "CVReport",
]
