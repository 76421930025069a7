import logging
from collections import Counter, defaultdict
from collections.abc import Iterable, Mapping, Sequence
from itertools import groupby
from pathlib import Path
from typing import IO, Literal

import numpy as np
import pandas as pd
from pydantic import ValidationError

from core.settings import settings
from models.configs import LogSchema, SurveySchema
from schema.models import TRANSITION_RULES, Channel, RelationshipCategory, SurveyLabel
from schema.reports import BuildSummary, ProfileReport, UserActivity
from schema.schema import EventSeries, RawEvent, RelationshipRecord
from utils.constants.constant import HOUR_TICKS, SECONDS_PER_HOUR, TIE_EPSILON_HOURS
from utils.custom_exception import IngestError, RowError, SchemaError

logger = logging.getLogger(__name__)

Source = str | Path | IO[bytes] | IO[str]


def _read_table(source: Source, required: list[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(source, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise SchemaError("input has no header row")
    except (OSError, pd.errors.ParserError) as e:
        logger.error(f"Error reading CSV input: {str(e)}")
        raise IngestError(f"Failed to read CSV input: {str(e)}")
    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise SchemaError(f"missing required column(s): {', '.join(missing)}")
    return frame


def _first_error(error: ValidationError) -> str:
    detail = error.errors()[0]
    where = ".".join(str(x) for x in detail["loc"])
    return f"{where}: {detail['msg']}" if where else detail["msg"]


def _ticks(offset_seconds: np.ndarray | float) -> np.ndarray:
    return np.rint(np.asarray(offset_seconds, dtype=float) / SECONDS_PER_HOUR * HOUR_TICKS).astype(np.int64)


def _detie(raw_seconds: np.ndarray) -> np.ndarray:
    """
    Rebase sorted absolute seconds to hours on a 1e-9 hour grid and separate
    equal stamps by k * epsilon. Times rebuilt from origin + hours land on the
    same grid points, so flattening and rebuilding gives identical series.
    """
    ticks = _ticks(raw_seconds - raw_seconds[0])
    step = int(round(TIE_EPSILON_HOURS * HOUR_TICKS))
    for i in range(1, ticks.size):
        if ticks[i] <= ticks[i - 1]:
            ticks[i] = ticks[i - 1] + step
    return ticks / HOUR_TICKS


class IngestService:
    """Turns raw logs and survey files into event series and relationship records."""

    @staticmethod
    def parse_log(
        source: Source,
        schema: LogSchema = LogSchema(),
        on_error: Literal["raise", "skip"] = "raise",
    ) -> list[RawEvent]:
        """
        Parse a call/text log CSV into events, in file order.

        Args:
            source: Path or readable stream of CSV text with a header row
            schema: Column names of the required fields
            on_error: 'raise' stops at the first malformed row, 'skip' logs and drops it

        Returns:
            list[RawEvent]: One event per well-formed row

        Raises:
            SchemaError: If the header is missing a required column
            RowError: If a row is malformed and on_error is 'raise'
        """
        frame = _read_table(source, schema.required())
        events: list[RawEvent] = []
        for position, row in enumerate(frame.to_dict("records")):
            try:
                events.append(
                    RawEvent(
                        timestamp=row[schema.timestamp],
                        sender=row[schema.sender].strip(),
                        receiver=row[schema.receiver].strip(),
                        channel=row[schema.channel].strip().lower(),
                        duration=row[schema.duration],
                    )
                )
            except ValidationError as e:
                # header is line 1
                error = RowError(position + 2, _first_error(e))
                if on_error == "raise":
                    raise error
                logger.warning(f"Skipping {error.message}")
        logger.info(f"Parsed {len(events)} events from {len(frame)} rows")
        return events

    @staticmethod
    def build_series_report(
        events: Iterable[RawEvent],
        min_events: int | None = None,
        max_events: int | None = None,
        channels: Sequence[Channel] | None = None,
        senders: Iterable[str] | None = None,
        study_end: float | Mapping[tuple[str, str], float] | None = None,
    ) -> tuple[list[EventSeries], BuildSummary]:
        """
        Group events into one series per ordered (sender, receiver) dyad.

        Series are emitted in sorted dyad order. study_end is an absolute epoch
        second applied to every series as its observation end, or a mapping of
        dyad to epoch second (see observation_ends); dyads missing from the
        mapping end at their last event.
        """
        min_events = settings.MIN_EVENTS if min_events is None else min_events
        max_events = settings.MAX_EVENTS if max_events is None else max_events
        if min_events < 1 or max_events < min_events:
            raise IngestError("event thresholds must satisfy 1 <= min_events <= max_events")

        allowed_channels = set(channels) if channels else None
        allowed_senders = set(senders) if senders is not None else None
        groups: dict[tuple[str, str], list[float]] = defaultdict(list)
        for event in events:
            if allowed_channels is not None and event.channel not in allowed_channels:
                continue
            groups[(event.sender, event.receiver)].append(event.timestamp)

        summary = BuildSummary(dyads_seen=len(groups))
        series: list[EventSeries] = []
        for key in sorted(groups):
            sender, receiver = key
            if allowed_senders is not None and sender not in allowed_senders:
                summary.dropped_sender += 1
                continue
            stamps = groups[key]
            if len(stamps) < min_events:
                summary.dropped_too_few += 1
                continue
            if len(stamps) > max_events:
                summary.dropped_too_many += 1
                continue
            raw = np.sort(np.asarray(stamps, dtype=float), kind="stable")
            times = _detie(raw)
            end = float(times[-1])
            dyad_end = study_end.get(key) if isinstance(study_end, Mapping) else study_end
            if dyad_end is not None:
                if dyad_end < raw[-1]:
                    raise IngestError(f"study end precedes the last event of {sender}->{receiver}")
                # jitter on a tie at the last stamp may pass the end by a few epsilon
                end = max(float(_ticks(dyad_end - raw[0]) / HOUR_TICKS), end)
            series.append(
                EventSeries(
                    sender=sender,
                    receiver=receiver,
                    times=times.tolist(),
                    observation_end=end,
                    origin=float(raw[0]),
                )
            )
        summary.series_kept = len(series)
        summary.events_kept = sum(s.n_events for s in series)
        logger.info(
            f"Built {summary.series_kept} series ({summary.events_kept} events) from "
            f"{summary.dyads_seen} dyads; {summary.dropped_too_few} below and "
            f"{summary.dropped_too_many} above the event thresholds"
        )
        return series, summary

    @classmethod
    def build_series(
        cls,
        events: Iterable[RawEvent],
        min_events: int | None = None,
        max_events: int | None = None,
        **options,
    ) -> list[EventSeries]:
        return cls.build_series_report(events, min_events, max_events, **options)[0]

    @staticmethod
    def flatten_series(series: Iterable[EventSeries], channel: Channel = Channel.CALL) -> list[RawEvent]:
        """Absolute events reconstructed from each series' origin."""
        events: list[RawEvent] = []
        for s in series:
            stamps = s.origin + s.as_array() * SECONDS_PER_HOUR
            events.extend(
                RawEvent(timestamp=float(t), sender=s.sender, receiver=s.receiver, channel=channel)
                for t in stamps
            )
        return events

    @staticmethod
    def observation_ends(series: Iterable[EventSeries]) -> dict[tuple[str, str], float]:
        """Absolute observation end of each series, the study_end that rebuilds it."""
        return {s.key: s.origin + s.observation_end * SECONDS_PER_HOUR for s in series}

    @staticmethod
    def label_relationship(survey_labels: Sequence[str]) -> RelationshipCategory:
        """
        Category of a relationship from its per-wave labels.

        Blank waves are skipped and consecutive repeats collapsed. One label
        throughout gives a stable category, one listed transition gives its
        category, anything else is excluded.
        """
        if not survey_labels:
            raise IngestError("label sequence must be non-empty")
        parsed: list[SurveyLabel] = []
        for raw in survey_labels:
            if not raw or not raw.strip():
                continue
            label = SurveyLabel.parse(raw)
            if label is None:
                logger.warning(f"Unknown survey label '{raw}'; relationship excluded")
                return RelationshipCategory.EXCLUDED
            parsed.append(label)
        collapsed = [label for label, _ in groupby(parsed)]
        if len(collapsed) == 1:
            return collapsed[0].stable_category
        if len(collapsed) == 2:
            return TRANSITION_RULES.get((collapsed[0], collapsed[1]), RelationshipCategory.EXCLUDED)
        return RelationshipCategory.EXCLUDED

    @classmethod
    def parse_surveys(cls, source: Source, schema: SurveySchema = SurveySchema()) -> list[RelationshipRecord]:
        """
        Read survey waves (one row per dyad and wave) into relationship records.

        Records come out in sorted dyad order with waves ordered by index.
        """
        frame = _read_table(source, schema.required())
        waves: dict[tuple[str, str], list[tuple[int, str, float]]] = defaultdict(list)
        for position, row in enumerate(frame.to_dict("records")):
            try:
                wave = int(row[schema.wave])
                when = float(row[schema.wave_time])
            except ValueError as e:
                raise RowError(position + 2, f"bad wave or wave time: {str(e)}")
            key = (row[schema.sender].strip(), row[schema.receiver].strip())
            waves[key].append((wave, row[schema.label], when))

        records: list[RelationshipRecord] = []
        for (sender, receiver), rows in sorted(waves.items()):
            rows.sort(key=lambda r: r[0])
            labels = [label for _, label, _ in rows]
            records.append(
                RelationshipRecord(
                    sender=sender,
                    receiver=receiver,
                    survey_labels=labels,
                    survey_times=[when for _, _, when in rows],
                    category=cls.label_relationship(labels),
                )
            )
        counts = Counter(r.category for r in records)
        logger.info(f"Labelled {len(records)} relationships: {dict(sorted(counts.items()))}")
        return records

    @staticmethod
    def drop_rare_categories(
        records: Sequence[RelationshipRecord], min_count: int | None = None
    ) -> list[RelationshipRecord]:
        """Re-label categories with fewer than min_count records as excluded."""
        min_count = settings.MIN_CLASS_SIZE if min_count is None else min_count
        counts = Counter(r.category for r in records)
        rare = {c for c, n in counts.items() if n < min_count and c is not RelationshipCategory.EXCLUDED}
        if rare:
            logger.info(f"Excluding rare categories: {sorted(rare)}")
        return [
            r.model_copy(update={"category": RelationshipCategory.EXCLUDED}) if r.category in rare else r
            for r in records
        ]

    @staticmethod
    def profile_dataset(series: Sequence[EventSeries], min_interactions: int | None = None) -> ProfileReport:
        """
        Activity statistics of a set of series.

        A user's event count includes events they sent and received; a peer
        counts toward a user's incoming or outgoing peers when the dyad has at
        least min_interactions events.
        """
        threshold = settings.MIN_INTERACTIONS if min_interactions is None else min_interactions
        if not series:
            return ProfileReport(min_interactions=threshold)

        per_user: Counter[str] = Counter()
        outgoing: Counter[str] = Counter()
        incoming: Counter[str] = Counter()
        gaps: list[np.ndarray] = []
        hours: list[np.ndarray] = []
        for s in series:
            per_user[s.sender] += s.n_events
            per_user[s.receiver] += s.n_events
            if s.n_events >= threshold:
                outgoing[s.sender] += 1
                incoming[s.receiver] += 1
            times = s.as_array()
            gaps.append(np.diff(times))
            absolute = s.origin + times * SECONDS_PER_HOUR
            hours.append(np.floor(np.mod(absolute, 86400.0) / SECONDS_PER_HOUR).astype(int))

        total = sum(s.n_events for s in series)
        hour_counts = np.bincount(np.concatenate(hours), minlength=24)[:24]
        values = np.sort(np.concatenate(gaps))
        cdf = np.searchsorted(values, values, side="right") / values.size if values.size else values
        users = [
            UserActivity(
                user=user,
                n_events=per_user[user],
                outgoing_peers=outgoing[user],
                incoming_peers=incoming[user],
            )
            for user in sorted(per_user)
        ]
        return ProfileReport(
            total_events=total,
            min_interactions=threshold,
            users=users,
            hour_of_day_density=(hour_counts / total).tolist(),
            inter_event_values=values.tolist(),
            inter_event_cdf=np.asarray(cdf, dtype=float).tolist(),
        )

    @staticmethod
    def profile_frames(report: ProfileReport) -> dict[str, pd.DataFrame]:
        """Plot-ready tables of a profile report, keyed by file stem."""
        return {
            "users": pd.DataFrame([u.model_dump() for u in report.users], columns=list(UserActivity.model_fields)),
            "hour_of_day": pd.DataFrame({"hour": range(24), "density": report.hour_of_day_density}),
            "inter_event_cdf": pd.DataFrame(
                {"gap_hours": report.inter_event_values, "cdf": report.inter_event_cdf}
            ),
        }
