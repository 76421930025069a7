import logging
import math
from collections import defaultdict
from collections.abc import Sequence

import numpy as np
from scipy.stats import norm, rankdata

from core.likelihood import log_likelihood
from core.settings import settings
from models.configs import ChangePointTask, FitConfig
from schema.models import KernelFamily, RelationshipCategory, SplitMode, WilcoxonMethod
from schema.reports import (
    ChangePointReport,
    ChangePointSummary,
    FamilySummary,
    FitFailure,
    HoldoutReport,
    KernelComparisonReport,
    KernelComparisonRow,
    WilcoxonResult,
)
from schema.schema import EventSeries, KernelParams
from service.fitter_service import FitterService
from service.utils import parallel_map
from utils.custom_exception import HawkesCallsError, InsufficientEventsError

logger = logging.getLogger(__name__)

EXACT_MAX_N = 25


def _window(series: EventSeries, end: float) -> EventSeries:
    """Events strictly before `end`, observed up to it; `end` is capped at T."""
    return series.window(min(end, series.observation_end))


def _per_event_holdout(params: KernelParams, train: EventSeries, full: EventSeries, n_test: int) -> float:
    return -(log_likelihood(params, full) - log_likelihood(params, train)) / n_test


def _summarize(family: KernelFamily, scores: list[float]) -> FamilySummary:
    values = np.sort(np.asarray(scores, dtype=float))
    q25, median, q75 = np.quantile(values, [0.25, 0.5, 0.75])
    return FamilySummary(
        family=family,
        n=values.size,
        median=float(median),
        q25=float(q25),
        q75=float(q75),
        mean=float(np.mean(values)),
        variance=float(np.var(values, ddof=1)) if values.size > 1 else 0.0,
    )


class EvaluationService:
    """Holdout scoring, kernel comparison, change detection and the signed-rank test."""

    @staticmethod
    def split_series(
        series: EventSeries,
        split_fraction: float,
        mode: SplitMode = SplitMode.EVENTS,
    ) -> tuple[EventSeries, float, int]:
        """
        Training part of a temporal holdout split.

        Returns the training series (observed up to the split time), the split
        time and the number of training events.
        """
        if not 0 < split_fraction < 1:
            raise HawkesCallsError("split fraction must lie in (0, 1)")
        times = series.as_array()
        n = times.size
        if mode is SplitMode.EVENTS:
            n_train = math.ceil(round(split_fraction * n, 9))
            split_time = float(times[n_train - 1]) if n_train >= 1 else 0.0
        else:
            split_time = split_fraction * series.observation_end
            n_train = int(np.count_nonzero(times <= split_time))
        if n_train < 2:
            raise InsufficientEventsError("train", 2, n_train)
        if n - n_train < 1:
            raise InsufficientEventsError("test", 1, n - n_train)
        return series.window(split_time, inclusive=True), split_time, n_train

    @classmethod
    def holdout_eval(
        cls,
        series: EventSeries,
        cfg: FitConfig,
        split_fraction: float | None = None,
        mode: SplitMode = SplitMode.EVENTS,
    ) -> HoldoutReport:
        """
        Fit on the leading part of a series and score the rest.

        The total NLL is evaluated over the full window with the training events
        kept in the history, so nll_total - nll_train isolates the test events.
        """
        split_fraction = settings.SPLIT_FRACTION if split_fraction is None else split_fraction
        train, split_time, n_train = cls.split_series(series, split_fraction, mode)
        model = FitterService.fit_series(train, cfg)
        return HoldoutReport(
            family=cfg.family,
            nll_train=-log_likelihood(model.params, train),
            nll_total=-log_likelihood(model.params, series),
            n_train=n_train,
            n_test=series.n_events - n_train,
            split_time=split_time,
            split_mode=mode,
            converged=model.converged,
        )

    @classmethod
    def compare_kernels(
        cls,
        series_set: Sequence[EventSeries],
        cfg_exp: FitConfig,
        cfg_pl: FitConfig,
        split_fraction: float | None = None,
        mode: SplitMode = SplitMode.EVENTS,
        jobs: int = 1,
    ) -> KernelComparisonReport:
        """
        Paired holdout scores of two fit configurations over a set of series.

        A series failing on either side is listed in failures and left out of
        the pairing. Summaries are computed on sorted scores, so they do not
        depend on the order of the input.
        """
        if not series_set:
            raise HawkesCallsError("kernel comparison needs at least one series")
        split_fraction = settings.SPLIT_FRACTION if split_fraction is None else split_fraction
        tasks = [(i, s, cfg_exp, cfg_pl, split_fraction, mode) for i, s in enumerate(series_set)]
        outcomes = parallel_map(_paired_holdout, tasks, jobs, desc="compare kernels")

        rows = [o for o in outcomes if isinstance(o, KernelComparisonRow)]
        failures = [
            f"{o.sender}->{o.receiver}: {o.reason}" for o in outcomes if isinstance(o, FitFailure)
        ]
        report = KernelComparisonReport(
            split_fraction=split_fraction, split_mode=mode, rows=rows, failures=failures
        )
        if rows:
            report.summaries = [
                _summarize(cfg_exp.family, [r.exp_score for r in rows]),
                _summarize(cfg_pl.family, [r.pl_score for r in rows]),
            ]
            report.pl_win_fraction = sum(r.pl_score < r.exp_score for r in rows) / len(rows)
            report.exp_win_fraction = sum(r.exp_score < r.pl_score for r in rows) / len(rows)
        logger.info(f"Compared kernels on {len(rows)} series, {len(failures)} failed")
        return report

    @staticmethod
    def artificial_tipping_point(series: EventSeries, S2: float) -> float:
        """Midpoint between the first event and S2."""
        t0 = series.times[0]
        if S2 <= t0:
            raise HawkesCallsError("S2 must come after the first event")
        return t0 + (S2 - t0) / 2.0

    @classmethod
    def detect_change(
        cls,
        series: EventSeries,
        S1: float,
        S2: float,
        S3: float,
        cfg: FitConfig,
        relationship_id: str | None = None,
        category: RelationshipCategory | None = None,
        artificial_S1: bool = False,
    ) -> ChangePointReport:
        """
        Holdout NLL per event before and after a relationship change.

        Model A is fit on events before S1 and scored on [S1, S2); model B is fit
        on events before S2 and scored on [S2, S3).

        Raises:
            InsufficientEventsError: naming the first underpopulated window
        """
        if not S1 < S2 < S3:
            raise HawkesCallsError("tipping points must satisfy S1 < S2 < S3")
        # windows end at T at the latest; counts use the same ends as the scores
        e1, e2, e3 = (min(s, series.observation_end) for s in (S1, S2, S3))
        required = [
            ("before S1", series.count_between(-math.inf, e1), 2),
            ("[S1, S2)", series.count_between(e1, e2), 1),
            ("before S2", series.count_between(-math.inf, e2), 2),
            ("[S2, S3)", series.count_between(e2, e3), 1),
        ]
        for window, found, need in required:
            if found < need:
                raise InsufficientEventsError(window, need, found)

        upto_s1, upto_s2, upto_s3 = _window(series, S1), _window(series, S2), _window(series, S3)
        model_a = FitterService.fit_series(upto_s1, cfg)
        model_b = FitterService.fit_series(upto_s2, cfg)
        n_before = required[1][1]
        n_after = required[3][1]
        return ChangePointReport(
            relationship_id=relationship_id or f"{series.sender}->{series.receiver}",
            category=category,
            nll_before_per_event=_per_event_holdout(model_a.params, upto_s1, upto_s2, n_before),
            nll_after_per_event=_per_event_holdout(model_b.params, upto_s2, upto_s3, n_after),
            S1=S1,
            S2=S2,
            S3=S3,
            artificial_S1=artificial_S1,
            n_before=n_before,
            n_after=n_after,
            degenerate=not (model_a.converged and model_b.converged),
        )

    @classmethod
    def detect_changes(
        cls,
        tasks: Sequence[ChangePointTask],
        cfg: FitConfig,
        jobs: int = 1,
        artificial: bool = False,
    ) -> tuple[list[ChangePointReport], list[FitFailure]]:
        """
        detect_change over many relationships. A task without S1, or every task
        when `artificial` is set, uses the artificial tipping point.
        """
        outcomes = parallel_map(
            _one_change, [(i, t, cfg, artificial) for i, t in enumerate(tasks)], jobs, desc="changepoint"
        )
        reports = [o for o in outcomes if isinstance(o, ChangePointReport)]
        failures = [o for o in outcomes if isinstance(o, FitFailure)]
        logger.info(f"Change detection: {len(reports)} reports, {len(failures)} skipped")
        return reports, failures

    @classmethod
    def summarize_changes(cls, reports: Sequence[ChangePointReport]) -> list[ChangePointSummary]:
        """One signed-rank test of before vs after scores per category; degenerate reports are left out."""
        groups: dict[str, list[ChangePointReport]] = defaultdict(list)
        for report in reports:
            if report.degenerate:
                continue
            groups[str(report.category) if report.category else "all"].append(report)
        return [
            ChangePointSummary(
                category=category,
                n_instances=len(items),
                test=cls.wilcoxon_signed_rank(
                    [r.nll_before_per_event for r in items],
                    [r.nll_after_per_event for r in items],
                ),
            )
            for category, items in sorted(groups.items())
        ]

    @staticmethod
    def wilcoxon_signed_rank(
        x: Sequence[float],
        y: Sequence[float],
        method: WilcoxonMethod | None = None,
    ) -> WilcoxonResult:
        """
        Two-sided Wilcoxon signed-rank test of paired samples.

        Zero differences are dropped and tied magnitudes get mid-ranks. The
        exact null distribution is enumerated for up to 25 non-zero pairs;
        beyond that a normal approximation with tie and continuity corrections
        is used. `method` forces one of the two.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.size != y.size or x.size == 0:
            raise HawkesCallsError("signed-rank test needs two non-empty samples of equal length")
        d = x - y
        d = d[d != 0]
        n = d.size
        if n == 0:
            return WilcoxonResult(
                statistic=0.0, p_value=1.0, n_effective=0, method=WilcoxonMethod.EXACT, degenerate=True
            )
        ranks = rankdata(np.abs(d))
        statistic = float(np.sum(ranks[d > 0]))
        if method is None:
            method = WilcoxonMethod.EXACT if n <= EXACT_MAX_N else WilcoxonMethod.NORMAL_APPROX

        if method is WilcoxonMethod.EXACT:
            # mid-ranks are multiples of 1/2, so doubled ranks are integers
            doubled = np.rint(2 * ranks).astype(int)
            counts = np.zeros(int(doubled.sum()) + 1)
            counts[0] = 1.0
            for r in doubled:
                counts[r:] = counts[r:] + counts[:-r].copy()
            observed = int(round(2 * statistic))
            total = 2.0**n
            lower = counts[: observed + 1].sum() / total
            upper = counts[observed:].sum() / total
            p_value = min(1.0, 2.0 * min(lower, upper))
        else:
            mean = n * (n + 1) / 4.0
            _, ties = np.unique(np.abs(d), return_counts=True)
            variance = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(ties**3 - ties) / 48.0
            diff = statistic - mean
            z = (diff - 0.5 * np.sign(diff)) / math.sqrt(variance)
            p_value = min(1.0, float(2.0 * norm.sf(abs(z))))
        return WilcoxonResult(statistic=statistic, p_value=p_value, n_effective=n, method=method)


def _paired_holdout(
    item: tuple[int, EventSeries, FitConfig, FitConfig, float, SplitMode],
) -> KernelComparisonRow | FitFailure:
    index, series, cfg_exp, cfg_pl, split_fraction, mode = item
    try:
        left = EvaluationService.holdout_eval(series, cfg_exp, split_fraction, mode)
        right = EvaluationService.holdout_eval(series, cfg_pl, split_fraction, mode)
    except HawkesCallsError as e:
        return FitFailure(index=index, sender=series.sender, receiver=series.receiver, reason=e.message)
    scores = (left.nll_holdout_per_event, right.nll_holdout_per_event)
    if not all(math.isfinite(s) for s in scores):
        return FitFailure(
            index=index, sender=series.sender, receiver=series.receiver, reason="non-finite holdout score"
        )
    return KernelComparisonRow(
        index=index,
        sender=series.sender,
        receiver=series.receiver,
        exp_score=scores[0],
        pl_score=scores[1],
    )


def _one_change(item: tuple[int, ChangePointTask, FitConfig, bool]) -> ChangePointReport | FitFailure:
    index, task, cfg, artificial = item
    s = task.series
    try:
        S1 = task.S1
        use_artificial = artificial or S1 is None
        if use_artificial:
            S1 = EvaluationService.artificial_tipping_point(s, task.S2)
        return EvaluationService.detect_change(
            s,
            S1,
            task.S2,
            task.S3,
            cfg,
            relationship_id=task.relationship_id,
            category=task.category,
            artificial_S1=use_artificial,
        )
    except HawkesCallsError as e:
        return FitFailure(index=index, sender=s.sender, receiver=s.receiver, reason=e.message)
