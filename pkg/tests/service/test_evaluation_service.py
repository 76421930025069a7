import math

import numpy as np
import pytest
from scipy import stats

from core.likelihood import log_likelihood
from models.configs import ChangePointTask, SimConfig
from schema.models import KernelFamily, RelationshipCategory, SplitMode, WilcoxonMethod
from schema.reports import ChangePointReport
from schema.schema import EventSeries, KernelParams
from service.evaluation_service import EvaluationService
from service.fitter_service import FitterService
from service.simulator_service import SimulatorService
from utils.custom_exception import HawkesCallsError, InsufficientEventsError


@pytest.fixture
def ten_events() -> EventSeries:
    return EventSeries(
        sender="a",
        receiver="b",
        times=[0.0, 0.2, 0.5, 1.0, 1.1, 2.0, 3.5, 3.6, 5.0, 7.0],
        observation_end=8.0,
    )


def test_split_by_events(ten_events):
    train, split_time, n_train = EvaluationService.split_series(ten_events, 0.8)
    assert n_train == 8
    assert split_time == 3.6
    assert train.times == ten_events.times[:8]
    assert train.observation_end == 3.6


def test_split_by_time(ten_events):
    train, split_time, n_train = EvaluationService.split_series(ten_events, 0.5, SplitMode.TIME)
    assert split_time == 4.0
    assert n_train == 8
    assert train.observation_end == 4.0


def test_split_needs_events_on_both_sides(ten_events):
    with pytest.raises(InsufficientEventsError) as e:
        EvaluationService.split_series(ten_events, 0.1)
    assert e.value.window == "train"

    with pytest.raises(InsufficientEventsError) as e:
        EvaluationService.split_series(ten_events, 0.95)
    assert e.value.window == "test"

    with pytest.raises(HawkesCallsError):
        EvaluationService.split_series(ten_events, 1.0)


def test_holdout_eval(ten_events, fast_exp_config):
    report = EvaluationService.holdout_eval(ten_events, fast_exp_config, 0.8)
    assert report.family is KernelFamily.EXP
    assert report.n_train == 8
    assert report.n_test == 2
    assert report.split_mode is SplitMode.EVENTS
    assert report.nll_holdout_per_event == pytest.approx((report.nll_total - report.nll_train) / 2)
    assert math.isfinite(report.nll_holdout_per_event)


def test_compare_kernels(pl_params, fast_exp_config, fast_pl_config):
    cfgs = [SimConfig(params=pl_params, horizon=200.0, seed=seed, sender=f"s{seed}") for seed in range(40)]
    series = SimulatorService.simulate_batch(cfgs)
    report = EvaluationService.compare_kernels(series, fast_exp_config, fast_pl_config, split_fraction=0.8)

    assert len(report.rows) + len(report.failures) == len(series)
    assert [r.index for r in report.rows] == sorted(r.index for r in report.rows)
    if report.rows:
        assert [s.family for s in report.summaries] == [KernelFamily.EXP, KernelFamily.PL]
        assert report.pl_win_fraction + report.exp_win_fraction <= 1.0
        assert all(r.difference == pytest.approx(r.pl_score - r.exp_score) for r in report.rows)

    shuffled = EvaluationService.compare_kernels(series[::-1], fast_exp_config, fast_pl_config, split_fraction=0.8)
    assert shuffled.summaries == report.summaries


def test_compare_kernels_empty(fast_exp_config, fast_pl_config):
    with pytest.raises(HawkesCallsError):
        EvaluationService.compare_kernels([], fast_exp_config, fast_pl_config)


def test_artificial_tipping_point(ten_events):
    assert EvaluationService.artificial_tipping_point(ten_events, 4.0) == 2.0
    with pytest.raises(HawkesCallsError):
        EvaluationService.artificial_tipping_point(ten_events, 0.0)


def test_detect_change(ten_events, fast_exp_config):
    report = EvaluationService.detect_change(
        ten_events, 1.05, 3.0, 6.0, fast_exp_config, category=RelationshipCategory.FRIENDSHIP_RELAXING
    )
    assert report.relationship_id == "a->b"
    assert report.n_before == 2
    assert report.n_after == 3
    assert math.isfinite(report.nll_before_per_event)
    assert math.isfinite(report.nll_after_per_event)
    assert not report.artificial_S1


def test_detect_change_with_S3_at_observation_end(fast_exp_config):
    series = EventSeries(
        sender="a",
        receiver="b",
        times=[0.0, 0.4, 1.0, 1.5, 2.5, 3.0, 4.0, 5.0, 6.0],
        observation_end=6.0,
    )
    report = EvaluationService.detect_change(series, 2.0, 4.0, 6.0, fast_exp_config)
    assert report.n_after == 2

    # the event at S3 == T is neither counted nor scored
    params = FitterService.fit_series(series.window(4.0), fast_exp_config).params
    expected = -(log_likelihood(params, series.window(6.0)) - log_likelihood(params, series.window(4.0))) / 2
    assert report.nll_after_per_event == pytest.approx(expected)


@pytest.mark.parametrize(
    "points,window",
    [
        ((0.1, 3.0, 6.0), "before S1"),
        ((1.05, 1.08, 6.0), "[S1, S2)"),
        ((1.05, 3.0, 3.2), "[S2, S3)"),
    ],
)
def test_detect_change_names_the_short_window(ten_events, fast_exp_config, points, window):
    with pytest.raises(InsufficientEventsError) as e:
        EvaluationService.detect_change(ten_events, *points, fast_exp_config)
    assert e.value.window == window


def test_detect_change_order(ten_events, fast_exp_config):
    with pytest.raises(HawkesCallsError):
        EvaluationService.detect_change(ten_events, 3.0, 2.0, 6.0, fast_exp_config)


def test_detect_changes(ten_events, fast_exp_config):
    tasks = [
        ChangePointTask(relationship_id="given", series=ten_events, S1=1.05, S2=3.0, S3=6.0),
        ChangePointTask(relationship_id="midpoint", series=ten_events, S2=3.0, S3=6.0),
        ChangePointTask(relationship_id="short", series=ten_events, S1=0.1, S2=3.0, S3=6.0),
    ]
    reports, failures = EvaluationService.detect_changes(tasks, fast_exp_config)
    assert [r.relationship_id for r in reports] == ["given", "midpoint"]
    assert reports[1].artificial_S1
    assert reports[1].S1 == 1.5
    assert [f.index for f in failures] == [2]

    forced, _ = EvaluationService.detect_changes(tasks[:1], fast_exp_config, artificial=True)
    assert forced[0].S1 == 1.5
    assert forced[0].artificial_S1


def _report(category, before, after, degenerate=False) -> ChangePointReport:
    return ChangePointReport(
        relationship_id="r",
        category=category,
        nll_before_per_event=before,
        nll_after_per_event=after,
        S1=1.0,
        S2=2.0,
        S3=3.0,
        n_before=1,
        n_after=1,
        degenerate=degenerate,
    )


def test_summarize_changes():
    relaxing = RelationshipCategory.FRIENDSHIP_RELAXING
    reports = [_report(relaxing, 1.0 + i, 0.5 + i * 0.9) for i in range(6)]
    reports.append(_report(relaxing, 0.0, 10.0, degenerate=True))
    reports.append(_report(None, 1.0, 2.0))

    summaries = EvaluationService.summarize_changes(reports)
    assert [(s.category, s.n_instances) for s in summaries] == [("all", 1), (str(relaxing), 6)]
    assert summaries[1].test.statistic == 21.0
    assert summaries[1].test.p_value == pytest.approx(2 / 64)


def test_wilcoxon_all_positive_five():
    result = EvaluationService.wilcoxon_signed_rank([2, 3, 4, 5, 6], [1, 1, 1, 1, 1])
    assert result.method is WilcoxonMethod.EXACT
    assert result.statistic == 15.0
    assert result.p_value == pytest.approx(0.0625)


def test_wilcoxon_matches_scipy_exact():
    rng = np.random.default_rng(3)
    for n in (6, 12, 20):
        x = rng.normal(0.3, 1.0, n)
        y = rng.normal(0.0, 1.0, n)
        ours = EvaluationService.wilcoxon_signed_rank(x, y)
        theirs = stats.wilcoxon(x, y, method="exact")
        assert ours.p_value == pytest.approx(theirs.pvalue, rel=1e-9)


def test_wilcoxon_exact_and_normal_agree_at_25():
    rng = np.random.default_rng(11)
    x = rng.normal(0.2, 1.0, 25)
    y = rng.normal(0.0, 1.0, 25)
    exact = EvaluationService.wilcoxon_signed_rank(x, y, WilcoxonMethod.EXACT)
    approx = EvaluationService.wilcoxon_signed_rank(x, y, WilcoxonMethod.NORMAL_APPROX)
    assert abs(exact.p_value - approx.p_value) < 0.01


def test_wilcoxon_ties_and_zeros():
    result = EvaluationService.wilcoxon_signed_rank([1, 2, 3, 4, 5], [1, 1, 1, 2, 7])
    assert result.n_effective == 4
    assert result.statistic == 7.0
    assert 0 < result.p_value <= 1

    degenerate = EvaluationService.wilcoxon_signed_rank([1.0, 2.0], [1.0, 2.0])
    assert degenerate.degenerate
    assert degenerate.p_value == 1.0

    with pytest.raises(HawkesCallsError):
        EvaluationService.wilcoxon_signed_rank([1.0], [1.0, 2.0])


def test_wilcoxon_large_sample_uses_normal_approximation():
    rng = np.random.default_rng(5)
    result = EvaluationService.wilcoxon_signed_rank(rng.normal(size=40), rng.normal(size=40))
    assert result.method is WilcoxonMethod.NORMAL_APPROX



def _series_with_events(params, horizon: float, count: int, min_events: int = 30, max_events: int = 400):
    """The first `count` simulations holding at least min_events without hitting the cap."""
    found, seed = [], 0
    while len(found) < count:
        cfg = SimConfig(params=params, horizon=horizon, seed=seed, max_events=max_events, sender=f"s{seed:05d}")
        series = SimulatorService.simulate_thinning(cfg)
        if series.n_events >= min_events and not series.truncated:
            found.append(series)
        seed += 1
    return found


@pytest.mark.slow
def test_compare_kernels_prefers_pl_on_heavy_tailed_data(fast_exp_config, fast_pl_config):
    # n* = 0.93 with half of the delays beyond 0.9 h and a tenth beyond 200 h
    p = KernelParams(family=KernelFamily.PL, kappa=0.14, theta=0.3, c=0.1)
    report = EvaluationService.compare_kernels(
        _series_with_events(p, 2000.0, 200), fast_exp_config, fast_pl_config
    )
    assert len(report.rows) >= 180
    assert report.pl_win_fraction > 0.5
    assert np.median([r.pl_score for r in report.rows]) < np.median([r.exp_score for r in report.rows])


@pytest.mark.slow
def test_compare_kernels_prefers_exp_on_exponential_data(fast_exp_config, fast_pl_config):
    p = KernelParams(family=KernelFamily.EXP, kappa=0.9, theta=1.0)
    report = EvaluationService.compare_kernels(
        _series_with_events(p, 500.0, 200), fast_exp_config, fast_pl_config
    )
    assert len(report.rows) >= 180
    assert report.exp_win_fraction > 0.5


@pytest.mark.slow
def test_regime_change_is_detected(fast_exp_config):
    """
    Before S2 = 8 h the kernel is a short-memory EXP with n* = 0.95; afterwards it
    switches to a long-memory one (kappa 1.2, theta 0.2). Seeds are kept when every
    window of S = (4, 8, 40) holds enough events.
    """
    before = KernelParams(family=KernelFamily.EXP, kappa=0.95, theta=1.0)
    after = KernelParams(family=KernelFamily.EXP, kappa=1.2, theta=0.2)
    tasks, seed = [], 0
    while len(tasks) < 100:
        series = SimulatorService.simulate_regime_change(before, after, 8.0, 40.0, seed, max_events=3000)
        seed += 1
        if series.truncated or series.count_between(0.0, 4.0) < 2 or series.count_between(4.0, 8.0) < 1:
            continue
        if series.count_between(8.0, 40.0) < 1:
            continue
        tasks.append(ChangePointTask(relationship_id=f"r{seed:05d}", series=series, S1=4.0, S2=8.0, S3=40.0))

    reports, failures = EvaluationService.detect_changes(tasks, fast_exp_config)
    assert len(reports) + len(failures) == 100
    (summary,) = EvaluationService.summarize_changes(reports)
    assert summary.category == "all"
    assert summary.n_instances >= 60
    assert summary.test.p_value < 0.01


def _stationary_series(index: int, params: KernelParams, rate: float, horizon: float) -> EventSeries:
    """Clusters started by Poisson immigrants over [0, horizon), merged and rebased to the first event."""
    rng = np.random.default_rng(index)
    starts = np.sort(rng.uniform(0.0, horizon, size=max(rng.poisson(rate * horizon), 1)))
    absolute = []
    for j, start in enumerate(starts):
        cfg = SimConfig(params=params, horizon=horizon, seed=index * 1000 + j, immigrant_time=float(start))
        absolute.extend(start + SimulatorService.simulate_branching(cfg).as_array())
    times = np.unique(absolute)
    return EventSeries(
        sender=f"u{index:03d}",
        receiver="peer",
        times=(times - times[0]).tolist(),
        observation_end=float(horizon - times[0]),
    )


@pytest.mark.slow
def test_stationary_relationships_show_no_change(fast_exp_config):
    """
    Null corpus: 300 stationary relationships (immigrants at 0.5/h, each starting
    an EXP cluster with n* = 0.5) observed for 100 h and scored at S = (60, 75, 90).
    """
    params = KernelParams(family=KernelFamily.EXP, kappa=0.5, theta=1.0)
    tasks = [
        ChangePointTask(
            relationship_id=f"r{i:03d}",
            series=_stationary_series(i, params, rate=0.5, horizon=100.0),
            S1=60.0,
            S2=75.0,
            S3=90.0,
        )
        for i in range(300)
    ]
    reports, _ = EvaluationService.detect_changes(tasks, fast_exp_config)
    reports = [r for r in reports if not r.degenerate]
    assert len(reports) >= 200

    (summary,) = EvaluationService.summarize_changes(reports)
    assert summary.test.p_value > 0.05

    rng = np.random.default_rng(11)
    rejected = 0
    for _ in range(1000):
        picked = rng.choice(len(reports), size=10, replace=False)
        result = EvaluationService.wilcoxon_signed_rank(
            [reports[k].nll_before_per_event for k in picked],
            [reports[k].nll_after_per_event for k in picked],
        )
        rejected += result.p_value < 0.05
    assert 0.02 <= rejected / 1000 <= 0.10
