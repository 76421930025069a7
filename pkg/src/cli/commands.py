import logging
from argparse import Namespace
from collections import Counter
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import TypeAdapter

from core.settings import Settings
from mllite import Dataset, cross_validate
from models.configs import ChangePointTask, FitConfig, SimConfig
from schema.models import Channel, KernelFamily, SimulationMethod, SplitMode, Task
from schema.reports import ChangePointSummary, CVReport
from schema.schema import EventSeries, FittedModel, KernelParams, RelationshipRecord
from service.evaluation_service import EvaluationService
from service.features_service import DESCRIPTOR_LAYOUT, EMBEDDING_LAYOUT, FeaturesService
from service.fitter_service import FitterService
from service.ingest_service import IngestService
from service.simulator_service import SimulatorService
from service.utils import read_layout_csv, read_ndjson, write_csv, write_ndjson
from utils.constants.constant import BIG5_TRAITS, SECONDS_PER_HOUR
from utils.custom_exception import HawkesCallsError, UsageError

logger = logging.getLogger(__name__)


def _echo(frame: pd.DataFrame) -> None:
    if frame.empty:
        print("(no rows)")
        return
    print(frame.to_string(index=False, float_format=lambda v: f"{v:.6g}"))


def _series_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def _fit_config(args: Namespace, settings: Settings, family: KernelFamily | None = None) -> FitConfig:
    return FitConfig(
        family=family or KernelFamily(args.family),
        n_starts=settings.N_STARTS,
        tolerance=settings.TOLERANCE,
        max_iterations=settings.MAX_ITERATIONS,
        seed=settings.SEED,
    )


def _kernel(family: str, kappa: float | None, theta: float | None, c: float | None, flag: str = "") -> KernelParams:
    if kappa is None or theta is None:
        raise UsageError(f"--{flag}kappa and --{flag}theta are required")
    family = KernelFamily(family)
    if family is KernelFamily.PL and c is None:
        raise UsageError(f"--{flag}c is required for the power-law kernel")
    if family is KernelFamily.EXP and c is not None:
        raise UsageError(f"--{flag}c only applies to the power-law kernel")
    return KernelParams(family=family, kappa=kappa, theta=theta, c=c)


def _load_series(args: Namespace, settings: Settings) -> list[EventSeries]:
    if args.series is not None:
        return read_ndjson(args.series, EventSeries)
    events = IngestService.parse_log(args.log, on_error="skip" if args.skip_bad_rows else "raise")
    channels = [Channel(args.channel)] if args.channel else None
    series, _ = IngestService.build_series_report(
        events,
        min_events=settings.MIN_EVENTS,
        max_events=settings.MAX_EVENTS,
        channels=channels,
        study_end=args.study_end,
    )
    return series


def cmd_simulate(args: Namespace, settings: Settings) -> list[Path]:
    params = _kernel(args.family, args.kappa, args.theta, args.c)
    method = SimulationMethod(args.method)
    outputs: list[Path] = []

    if args.users is not None:
        series, traits = SimulatorService.synthetic_cohort(
            params,
            n_users=args.users,
            series_per_user=args.series_per_user,
            horizon=args.horizon,
            seed=settings.SEED,
            spread=args.spread,
            min_events=settings.MIN_EVENTS,
            max_events=settings.MAX_EVENTS,
            with_traits=args.traits_output is not None,
            method=method,
        )
        if traits is not None:
            outputs.append(write_csv(args.traits_output, traits))
    elif args.switch_time is not None:
        if method is not SimulationMethod.THINNING:
            raise UsageError("--switch-time needs --method thinning")
        after = _kernel(args.family, args.after_kappa, args.after_theta, args.after_c, flag="after-")
        series = [
            SimulatorService.simulate_regime_change(
                params, after, args.switch_time, args.horizon, _series_seed(settings.SEED, i), args.max_events
            ).model_copy(update={"sender": f"sim{i:04d}"})
            for i in range(args.n_series)
        ]
    else:
        cfgs = [
            SimConfig(
                params=params,
                horizon=args.horizon,
                seed=_series_seed(settings.SEED, i),
                max_events=args.max_events,
                sender=f"sim{i:04d}",
            )
            for i in range(args.n_series)
        ]
        series = SimulatorService.simulate_batch(cfgs, method, settings.JOBS)

    outputs.insert(0, write_ndjson(args.output, series))
    counts = pd.Series([s.n_events for s in series], dtype=float)
    _echo(
        pd.DataFrame(
            [{"series": len(series), "events": int(counts.sum()), "median_events": counts.median()}]
        )
    )
    return outputs


def cmd_fit(args: Namespace, settings: Settings) -> list[Path]:
    series = _load_series(args, settings)
    outputs: list[Path] = []
    if args.series_output is not None:
        outputs.append(write_ndjson(args.series_output, series))
    if not series:
        logger.warning("No series qualify for fitting; writing an empty models file")
        models: list[FittedModel] = []
    elif args.joint:
        models = [FitterService.fit_joint(series, _fit_config(args, settings))]
    else:
        models, failures = FitterService.fit_batch(series, _fit_config(args, settings), settings.JOBS)
        for failure in failures:
            logger.warning(f"Fit failed for {failure.sender}->{failure.receiver}: {failure.reason}")
    outputs.insert(0, write_ndjson(args.output, models))

    if args.descriptors is not None:
        labels = {}
        if args.records is not None:
            labels = {r.key: r.category for r in read_ndjson(args.records, RelationshipRecord)}
        converged = [m for m in models if m.converged]
        if len(converged) < len(models):
            logger.warning(f"{len(models) - len(converged)} unconverged models left out of the descriptors")
        descriptors = [
            FeaturesService.relationship_descriptor(m, labels.get((m.sender, m.receiver))) for m in converged
        ]
        outputs.append(FeaturesService.export_features(descriptors, args.descriptors, DESCRIPTOR_LAYOUT))

    _echo(
        pd.DataFrame(
            [
                {
                    "series": len(series),
                    "models": len(models),
                    "unconverged": sum(not m.converged for m in models),
                    "supercritical": sum(m.supercritical for m in models),
                }
            ]
        )
    )
    return outputs


def cmd_compare_kernels(args: Namespace, settings: Settings) -> list[Path]:
    series = _load_series(args, settings)
    report = EvaluationService.compare_kernels(
        series,
        _fit_config(args, settings, KernelFamily.EXP),
        _fit_config(args, settings, KernelFamily.PL),
        split_fraction=settings.SPLIT_FRACTION,
        mode=SplitMode(args.split_mode),
        jobs=settings.JOBS,
    )
    output = Path(args.output)
    output.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    outputs = [output]
    if args.rows_output is not None:
        rows = pd.DataFrame([r.model_dump() for r in report.rows])
        outputs.append(write_csv(args.rows_output, rows))

    for failure in report.failures:
        logger.warning(f"Left out of the comparison: {failure}")
    if not report.rows:
        logger.warning("No series could be scored by both kernels; the comparison is empty")
        return outputs
    _echo(pd.DataFrame([s.model_dump(mode="json") for s in report.summaries]))
    print(f"pl wins {report.pl_win_fraction:.3f}, exp wins {report.exp_win_fraction:.3f}")
    return outputs


def cmd_label_relationships(args: Namespace, settings: Settings) -> list[Path]:
    records = IngestService.parse_surveys(args.surveys)
    if args.drop_rare:
        records = IngestService.drop_rare_categories(records, settings.MIN_CLASS_SIZE)
    output = write_ndjson(args.output, records)
    counts = Counter(str(r.category) for r in records)
    _echo(pd.DataFrame(sorted(counts.items()), columns=["category", "relationships"]))
    return [output]


def _change_tasks(args: Namespace, series: list[EventSeries]) -> list[ChangePointTask]:
    if args.records is None:
        if args.s2 is None or args.s3 is None:
            raise UsageError("changepoint needs --records or both --s2 and --s3")
        return [
            ChangePointTask(relationship_id=f"{s.sender}->{s.receiver}", series=s, S1=args.s1, S2=args.s2, S3=args.s3)
            for s in series
        ]

    records = {r.key: r for r in read_ndjson(args.records, RelationshipRecord)}
    tasks: list[ChangePointTask] = []
    for s in series:
        record = records.get(s.key)
        points = record.tipping_points() if record else None
        if points is None:
            continue
        S1, S2, S3 = ((p - s.origin) / SECONDS_PER_HOUR if p is not None else None for p in points)
        tasks.append(
            ChangePointTask(
                relationship_id=f"{s.sender}->{s.receiver}",
                series=s,
                S1=S1,
                S2=S2,
                S3=S3,
                category=record.category,
            )
        )
    logger.info(f"{len(tasks)} of {len(series)} series have a labelled change")
    return tasks


def cmd_changepoint(args: Namespace, settings: Settings) -> list[Path]:
    series = _load_series(args, settings)
    tasks = _change_tasks(args, series)
    reports, failures = EvaluationService.detect_changes(
        tasks, _fit_config(args, settings), settings.JOBS, artificial=args.artificial_tipping
    )
    for failure in failures:
        logger.warning(f"Skipped {failure.sender}->{failure.receiver}: {failure.reason}")
    outputs = [write_ndjson(args.output, reports)]

    summaries = EvaluationService.summarize_changes(reports)
    if args.summary_output is not None:
        path = Path(args.summary_output)
        path.write_bytes(TypeAdapter(list[ChangePointSummary]).dump_json(summaries, indent=2) + b"\n")
        outputs.append(path)
    _echo(
        pd.DataFrame(
            [
                {
                    "category": s.category,
                    "n": s.n_instances,
                    "statistic": s.test.statistic,
                    "p_value": s.test.p_value,
                    "method": str(s.test.method),
                }
                for s in summaries
            ]
        )
    )
    return outputs


def cmd_embed(args: Namespace, settings: Settings) -> list[Path]:
    series = read_ndjson(args.series, EventSeries)
    models = read_ndjson(args.models, FittedModel)
    converged = [m for m in models if m.converged]
    if len(converged) < len(models):
        logger.warning(f"{len(models) - len(converged)} unconverged models left out of the embeddings")
    embeddings = FeaturesService.embed_users(converged, series)
    output = FeaturesService.export_features(embeddings, args.output, EMBEDDING_LAYOUT)
    print(f"{len(embeddings)} user embeddings")
    return [output]


def cmd_classify(args: Namespace, settings: Settings) -> list[Path]:
    _, frame = FeaturesService.import_features(args.features, DESCRIPTOR_LAYOUT)
    data = Dataset.from_descriptors(frame)
    if args.classes:
        data = data.restrict([c.strip() for c in args.classes.split(",")])
    report = cross_validate(
        data,
        Task.CLASSIFY,
        folds=settings.FOLDS,
        n_candidates=settings.N_CANDIDATES,
        seed=settings.SEED,
        use_oversampling=not args.no_oversample,
        jobs=settings.JOBS,
    )
    output = Path(args.output)
    output.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    outputs = [output]
    if args.confusion_output is not None:
        pooled = report.pooled
        confusion = pd.DataFrame(pooled.confusion, columns=pooled.labels)
        confusion.insert(0, "true", pooled.labels)
        outputs.append(write_csv(args.confusion_output, confusion))

    _echo(
        pd.DataFrame(
            [
                {"label": label, **metrics.model_dump(include={"precision", "recall", "f1", "support"})}
                for label, metrics in report.pooled.per_class.items()
            ]
        )
    )
    print(f"macro-F1 {report.pooled.macro_f1:.4f} (fold mean {report.mean_score:.4f})")
    return outputs


def cmd_regress(args: Namespace, settings: Settings) -> list[Path]:
    _, frame = FeaturesService.import_features(args.embeddings, EMBEDDING_LAYOUT)
    _, targets = read_layout_csv(args.targets)
    if "user" not in targets.columns:
        raise HawkesCallsError(f"{args.targets} has no 'user' column")
    names = args.target or [t for t in BIG5_TRAITS if t in targets.columns]
    if not names:
        raise UsageError("no target columns to regress")

    reports: list[CVReport] = []
    for name in names:
        data = Dataset.from_embeddings(frame, targets, name)
        reports.append(
            cross_validate(
                data,
                Task.REGRESS,
                folds=settings.FOLDS,
                n_candidates=settings.N_CANDIDATES,
                seed=settings.SEED,
                jobs=settings.JOBS,
                target=name,
            )
        )
    output = Path(args.output)
    output.write_bytes(TypeAdapter(list[CVReport]).dump_json(reports, indent=2) + b"\n")
    _echo(
        pd.DataFrame(
            [
                {
                    "target": r.target,
                    "rmse": r.pooled.rmse,
                    "mae": r.pooled.mae,
                    "fold_mean_rmse": r.mean_score,
                    "baseline_rmse": r.baseline_mean_score,
                }
                for r in reports
            ]
        )
    )
    return [output]


def cmd_profile(args: Namespace, settings: Settings) -> list[Path]:
    series = _load_series(args, settings)
    report = IngestService.profile_dataset(series, settings.MIN_INTERACTIONS)
    output = Path(args.output)
    output.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    outputs = [output]
    for name, table in IngestService.profile_frames(report).items():
        outputs.append(write_csv(output.with_name(f"{output.stem}.{name}.csv"), table))
    print(f"{len(report.users)} users, {report.total_events} events")
    return outputs
