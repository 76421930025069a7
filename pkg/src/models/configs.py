from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from config.settings import SCHEMA_VERSION
from core.settings import settings
from schema.models import KernelFamily, RelationshipCategory
from schema.schema import EventSeries, KernelParams
from utils.constants.constant import DEFAULT_BOUNDS


def default_bounds(family: KernelFamily) -> dict[str, tuple[float, float]]:
    return {name: DEFAULT_BOUNDS[name] for name in family.param_names}


class LogSchema(BaseModel):
    """Column names of the raw call/text log."""

    timestamp: str = "timestamp"
    sender: str = "sender"
    receiver: str = "receiver"
    channel: str = "channel"
    duration: str = "duration"

    def required(self) -> list[str]:
        return [self.timestamp, self.sender, self.receiver, self.channel, self.duration]


class SurveySchema(BaseModel):
    """Column names of the survey-wave file."""

    sender: str = "sender"
    receiver: str = "receiver"
    wave: str = "wave"
    label: str = "label"
    wave_time: str = "wave_time"

    def required(self) -> list[str]:
        return [self.sender, self.receiver, self.wave, self.label, self.wave_time]


class LikelihoodConfig(BaseModel):
    """Likelihood conventions; both fields are fixed for call-series modeling."""

    model_config = ConfigDict(frozen=True)

    background_rate: Literal[0.0] = 0.0
    first_event_conditioned: Literal[True] = True


class FitConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: KernelFamily = Field(description="Kernel family to fit.", examples=[KernelFamily.PL])
    bounds: dict[str, tuple[float, float]] = Field(
        description="Per-parameter box (lo, hi); defaults to the family's default box.",
        default={},
    )
    n_starts: int = Field(default_factory=lambda: settings.N_STARTS, ge=1)
    tolerance: float = Field(
        description="Stop when the projected gradient norm per event falls below this.",
        default_factory=lambda: settings.TOLERANCE,
        gt=0,
    )
    max_iterations: int = Field(default_factory=lambda: settings.MAX_ITERATIONS, ge=1)
    seed: int = Field(default_factory=lambda: settings.SEED, ge=0)
    likelihood: LikelihoodConfig = LikelihoodConfig()

    @model_validator(mode="before")
    @classmethod
    def fill_bounds(cls, data: Any) -> Any:
        if isinstance(data, dict) and "family" in data:
            family = KernelFamily(data["family"])
            data = {**data, "bounds": {**default_bounds(family), **(data.get("bounds") or {})}}
        return data

    @model_validator(mode="after")
    def check_bounds(self) -> "FitConfig":
        expected = set(self.family.param_names)
        if set(self.bounds) != expected:
            raise ValueError(f"bounds must name exactly {sorted(expected)}")
        for name, (lo, hi) in self.bounds.items():
            if not lo < hi:
                raise ValueError(f"bounds for {name} must satisfy lo < hi")
            if lo <= 0:
                raise ValueError(f"lower bound for {name} must be positive")
        if self.bounds["kappa"][0] < 1e-6:
            raise ValueError("lower bound for kappa must be >= 1e-6")
        return self

    def lower(self) -> list[float]:
        return [self.bounds[name][0] for name in self.family.param_names]

    def upper(self) -> list[float]:
        return [self.bounds[name][1] for name in self.family.param_names]

    def with_family(self, family: KernelFamily) -> "FitConfig":
        """Same search settings for another family, with that family's default box."""
        return FitConfig(
            family=family,
            n_starts=self.n_starts,
            tolerance=self.tolerance,
            max_iterations=self.max_iterations,
            seed=self.seed,
        )


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    params: KernelParams
    horizon: float = Field(
        description="Observation end T in hours; infinite only for branching simulation.",
        gt=0,
    )
    seed: int = Field(ge=0, lt=2**64)
    immigrant_time: float = Field(
        description="Time of the initial event; output is rebased so it sits at 0.",
        default=0.0,
        ge=0,
        allow_inf_nan=False,
    )
    max_events: int = Field(description="Safety cap on emitted events.", default=100_000, ge=1)
    sender: str = "sim"
    receiver: str = "peer"

    @model_validator(mode="after")
    def check_horizon(self) -> "SimConfig":
        if self.immigrant_time >= self.horizon:
            raise ValueError("immigrant_time must be before the horizon")
        return self


class RunManifest(BaseModel):
    """Replay record written next to every CLI output."""

    schema_version: str = SCHEMA_VERSION
    command: str
    settings: dict[str, Any]
    flags: dict[str, Any]
    outputs: dict[str, str] = Field(
        description="Output path -> SHA-256 hex digest of its bytes.", default={}
    )


class ChangePointTask(BaseModel):
    """One relationship to test for a change; S1 None asks for an artificial tipping point."""

    relationship_id: str
    series: EventSeries
    S1: float | None = None
    S2: float
    S3: float
    category: RelationshipCategory | None = None
