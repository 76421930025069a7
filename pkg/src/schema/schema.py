import math
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator

from config.settings import SCHEMA_VERSION
from schema.models import Channel, KernelFamily, RelationshipCategory, SurveyLabel


class RawEvent(BaseModel):
    """One logged call or text."""

    model_config = ConfigDict(frozen=True)

    timestamp: float = Field(
        description="Absolute time in UTC epoch seconds.",
        ge=0,
        allow_inf_nan=False,
        examples=[1300000000],
    )
    sender: str = Field(description="Opaque id of the initiating user.", min_length=1)
    receiver: str = Field(description="Opaque id of the receiving user.", min_length=1)
    channel: Channel = Field(description="Call or text.", examples=[Channel.CALL])
    duration: float = Field(
        description="Duration in seconds; texts carry 0.",
        default=0.0,
        ge=0,
        allow_inf_nan=False,
    )

    @model_validator(mode="after")
    def check_distinct_parties(self) -> "RawEvent":
        if self.sender == self.receiver:
            raise ValueError("sender and receiver must differ")
        return self


class EventSeries(BaseModel):
    """Outbound events of one (sender, receiver) dyad, relative to its first event."""

    schema_version: str = SCHEMA_VERSION
    sender: str = Field(description="Sender id.", examples=["u001"])
    receiver: str = Field(description="Receiver id.", examples=["p042"])
    times: list[float] = Field(
        description="Strictly increasing event times in hours, times[0] = 0.",
        min_length=1,
    )
    observation_end: float = Field(
        description="End T of the observation window in hours.",
        ge=0,
        allow_inf_nan=False,
    )
    origin: float = Field(
        description="Absolute epoch seconds of the first event.",
        default=0.0,
        allow_inf_nan=False,
    )
    truncated: bool = Field(
        description="Set when a simulator stopped at its event cap.",
        default=False,
    )

    @field_validator("times")
    @classmethod
    def check_times(cls, times: list[float]) -> list[float]:
        if times[0] != 0.0:
            raise ValueError("times[0] must be 0")
        arr = np.asarray(times, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("times must be finite")
        if arr.size > 1 and not np.all(np.diff(arr) > 0):
            raise ValueError("times must be strictly increasing")
        return times

    @model_validator(mode="after")
    def check_observation_end(self) -> "EventSeries":
        if self.observation_end < self.times[-1]:
            raise ValueError("observation_end must be >= the last event time")
        return self

    @property
    def key(self) -> tuple[str, str]:
        return (self.sender, self.receiver)

    @property
    def n_events(self) -> int:
        return len(self.times)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.times, dtype=float)

    def count_between(self, start: float, end: float) -> int:
        """Events with start <= t < end."""
        arr = self.as_array()
        return int(np.count_nonzero((arr >= start) & (arr < end)))

    def window(self, end: float, inclusive: bool = False) -> "EventSeries":
        """
        Restrict to events before `end` (or at it, when inclusive) observed up to `end`.
        """
        arr = self.as_array()
        mask = arr <= end if inclusive else arr < end
        kept = arr[mask]
        if kept.size == 0:
            raise ValueError(f"no events before {end}")
        return self.model_copy(
            update={"times": kept.tolist(), "observation_end": float(end)}
        )


class KernelParams(BaseModel):
    """Parameters of one triggering kernel."""

    model_config = ConfigDict(frozen=True)

    family: KernelFamily
    kappa: float = Field(description="Non-negative scale.", ge=0, allow_inf_nan=False)
    theta: float = Field(
        description="Decay rate (EXP) or power-law exponent (PL).",
        gt=0,
        allow_inf_nan=False,
    )
    c: float | None = Field(
        description="Shift in hours, power-law kernel only.",
        default=None,
        gt=0,
        allow_inf_nan=False,
    )

    @model_validator(mode="after")
    def check_shift(self) -> "KernelParams":
        if self.family is KernelFamily.PL and self.c is None:
            raise ValueError("power-law kernel requires c > 0")
        if self.family is KernelFamily.EXP and self.c is not None:
            raise ValueError("exponential kernel takes no c")
        return self

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in self.family.param_names])

    @classmethod
    def from_vector(cls, family: KernelFamily, values: Any) -> "KernelParams":
        return cls(family=family, **dict(zip(family.param_names, map(float, values))))


class RelationshipRecord(BaseModel):
    """Survey labels of one dyad across waves, with the derived category."""

    schema_version: str = SCHEMA_VERSION
    sender: str
    receiver: str
    survey_labels: list[str] = Field(min_length=1)
    survey_times: list[float] = Field(
        description="Absolute epoch seconds of each wave, aligned with survey_labels.",
        default=[],
    )
    category: RelationshipCategory

    @model_validator(mode="after")
    def check_alignment(self) -> "RelationshipRecord":
        if self.survey_times and len(self.survey_times) != len(self.survey_labels):
            raise ValueError("survey_times must align with survey_labels")
        if any(b < a for a, b in zip(self.survey_times, self.survey_times[1:])):
            raise ValueError("survey_times must be ordered")
        return self

    @property
    def key(self) -> tuple[str, str]:
        return (self.sender, self.receiver)

    def tipping_points(self) -> tuple[float | None, float, float] | None:
        """
        Survey times (S1, S2, S3) around the single label change, or None.

        S2 is the last wave with the old label and S3 the first wave with the
        new one; S1 is the wave before S2 when it still carries the old label.
        """
        if not self.survey_times:
            return None
        waves = [
            (SurveyLabel.parse(label), t)
            for label, t in zip(self.survey_labels, self.survey_times)
            if label.strip()
        ]
        if any(label is None for label, _ in waves):
            return None
        changes = [i for i in range(1, len(waves)) if waves[i][0] != waves[i - 1][0]]
        if len(changes) != 1:
            return None
        k = changes[0]
        s1 = waves[k - 2][1] if k >= 2 else None
        return (s1, waves[k - 1][1], waves[k][1])


class FittedModel(BaseModel):
    """Outcome of maximum-likelihood fitting for one series or one group."""

    schema_version: str = SCHEMA_VERSION
    family: KernelFamily
    params: KernelParams
    nll: float = Field(description="Negative log-likelihood at the optimum (nats).")
    n_star: float = Field(description="Branching factor of the fitted kernel.")
    converged: bool
    n_events: int = Field(ge=0)
    n_series: int = Field(default=1, ge=1)
    train_window: tuple[float, float]
    sender: str | None = None
    receiver: str | None = None
    grad_norm_per_event: float | None = Field(
        description="Max-abs projected log-space gradient divided by the event count.",
        default=None,
    )
    iterations: int = 0
    starts_used: int = 0

    @model_validator(mode="after")
    def check_consistency(self) -> "FittedModel":
        if self.params.family is not self.family:
            raise ValueError("params family does not match model family")
        if self.converged and not math.isfinite(self.nll):
            raise ValueError("a converged fit must have a finite nll")
        return self

    @computed_field
    @property
    def supercritical(self) -> bool:
        return self.n_star > 1.0
