import math

from pydantic import BaseModel, Field, computed_field, model_validator

from config.settings import SCHEMA_VERSION
from schema.models import KernelFamily, RelationshipCategory, SplitMode, Task, WilcoxonMethod
from utils.constants.constant import EMBEDDING_DIMENSION


class BuildSummary(BaseModel):
    """Counts reported by series construction; filtering itself is silent."""

    dyads_seen: int = 0
    dropped_too_few: int = 0
    dropped_too_many: int = 0
    dropped_sender: int = 0
    series_kept: int = 0
    events_kept: int = 0


class UserActivity(BaseModel):
    user: str
    n_events: int
    outgoing_peers: int
    incoming_peers: int


class ProfileReport(BaseModel):
    """Exploratory statistics of a set of event series."""

    schema_version: str = SCHEMA_VERSION
    total_events: int = 0
    min_interactions: int = 20
    users: list[UserActivity] = Field(
        description="Per-user event totals and peer counts (peers above the threshold).",
        default=[],
    )
    hour_of_day_density: list[float] = Field(
        description="Share of events starting in each UTC hour 0..23.",
        default=[0.0] * 24,
    )
    inter_event_values: list[float] = Field(
        description="Sorted inter-event times in hours, pooled over series.",
        default=[],
    )
    inter_event_cdf: list[float] = Field(
        description="Empirical CDF evaluated at inter_event_values.",
        default=[],
    )


class HoldoutReport(BaseModel):
    """Temporal-holdout generalization score of one fitted series."""

    schema_version: str = SCHEMA_VERSION
    family: KernelFamily
    nll_train: float
    nll_total: float
    n_train: int = Field(ge=2)
    n_test: int = Field(ge=1)
    split_time: float
    split_mode: SplitMode = SplitMode.EVENTS
    converged: bool = True

    @computed_field
    @property
    def nll_holdout_per_event(self) -> float:
        return (self.nll_total - self.nll_train) / self.n_test


class KernelComparisonRow(BaseModel):
    index: int
    sender: str
    receiver: str
    exp_score: float
    pl_score: float

    @computed_field
    @property
    def difference(self) -> float:
        """PL minus EXP holdout NLL per event; negative when PL generalizes better."""
        return self.pl_score - self.exp_score


class FamilySummary(BaseModel):
    family: KernelFamily
    n: int
    median: float
    q25: float
    q75: float
    mean: float
    variance: float


class KernelComparisonReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    split_fraction: float
    split_mode: SplitMode
    rows: list[KernelComparisonRow] = []
    failures: list[str] = Field(
        description="Series that failed on at least one side, excluded from pairing.",
        default=[],
    )
    summaries: list[FamilySummary] = []
    pl_win_fraction: float | None = Field(
        description="Share of pairs where PL scores strictly lower.", default=None
    )
    exp_win_fraction: float | None = None


class ChangePointReport(BaseModel):
    """Before/after holdout scores around one relationship change."""

    schema_version: str = SCHEMA_VERSION
    relationship_id: str
    category: RelationshipCategory | None = None
    nll_before_per_event: float
    nll_after_per_event: float
    S1: float
    S2: float
    S3: float
    artificial_S1: bool = False
    n_before: int = Field(ge=1)
    n_after: int = Field(ge=1)
    degenerate: bool = Field(
        description="Set when either score is not finite or a fit did not converge.",
        default=False,
    )

    @model_validator(mode="after")
    def check_order(self) -> "ChangePointReport":
        if not self.S1 < self.S2 < self.S3:
            raise ValueError("tipping points must satisfy S1 < S2 < S3")
        finite = math.isfinite(self.nll_before_per_event) and math.isfinite(
            self.nll_after_per_event
        )
        if not finite:
            self.degenerate = True
        return self


class WilcoxonResult(BaseModel):
    statistic: float = Field(description="Sum of ranks of positive differences.", ge=0)
    p_value: float = Field(ge=0, le=1)
    n_effective: int = Field(ge=0)
    method: WilcoxonMethod
    zero_method: str = "drop"
    degenerate: bool = False

    @model_validator(mode="after")
    def check_statistic_range(self) -> "WilcoxonResult":
        upper = self.n_effective * (self.n_effective + 1) / 2
        if self.statistic > upper + 1e-9:
            raise ValueError("statistic exceeds n(n+1)/2")
        return self


class ChangePointSummary(BaseModel):
    category: str
    n_instances: int
    test: WilcoxonResult


class FitFailure(BaseModel):
    index: int
    sender: str
    receiver: str
    reason: str


class RelationshipDescriptor(BaseModel):
    relationship_id: str
    family: KernelFamily
    kappa: float
    theta: float
    c: float | None = None
    n_star: float
    label: RelationshipCategory | None = None

    @model_validator(mode="after")
    def check_finite(self) -> "RelationshipDescriptor":
        values = [self.kappa, self.theta, self.n_star] + ([self.c] if self.c is not None else [])
        if not all(math.isfinite(v) for v in values):
            raise ValueError("descriptor values must be finite")
        return self


class UserEmbedding(BaseModel):
    user: str
    vector: list[float]
    layout: str

    @model_validator(mode="after")
    def check_vector(self) -> "UserEmbedding":
        if len(self.vector) != EMBEDDING_DIMENSION:
            raise ValueError(f"embedding must have {EMBEDDING_DIMENSION} entries")
        if not all(math.isfinite(v) for v in self.vector):
            raise ValueError("embedding contains non-finite values")
        return self


class ClassMetrics(BaseModel):
    precision: float
    recall: float
    f1: float
    support: int


class MetricReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    task: Task
    n: int
    per_class: dict[str, ClassMetrics] = {}
    macro_f1: float | None = None
    accuracy: float | None = None
    labels: list[str] = []
    confusion: list[list[int]] = Field(
        description="Counts; rows are true classes, columns predicted classes.",
        default=[],
    )
    confusion_column_share: list[list[float]] = Field(
        description="Confusion matrix normalised so each non-empty column sums to one.",
        default=[],
    )
    rmse: float | None = None
    mae: float | None = None


class FoldResult(BaseModel):
    fold: int
    n_train: int
    n_test: int
    params: dict[str, int]
    score: float
    baseline_score: float
    train_digest: str = Field(description="SHA-256 of the training row indices.")


class CVReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    task: Task
    metric: str
    target: str | None = None
    folds: list[FoldResult]
    mean_score: float
    std_score: float
    baseline_mean_score: float
    pooled: MetricReport
