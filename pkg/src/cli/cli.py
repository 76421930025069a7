import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from cli import commands
from config.logger import Logger
from config.settings import APP_DESCRIPTION, APP_NAME
from core.settings import load_settings
from schema.models import Channel, KernelFamily, SimulationMethod, SplitMode
from service.utils import write_manifest
from utils.custom_exception import HawkesCallsError

logger = logging.getLogger(__name__)

# flag dest -> Settings field; flags win over environment and config file
SETTING_FLAGS = {
    "seed": "SEED",
    "jobs": "JOBS",
    "log_level": "LOG_LEVEL",
    "min_events": "MIN_EVENTS",
    "max_series_events": "MAX_EVENTS",
    "min_interactions": "MIN_INTERACTIONS",
    "min_class_size": "MIN_CLASS_SIZE",
    "n_starts": "N_STARTS",
    "tolerance": "TOLERANCE",
    "max_iterations": "MAX_ITERATIONS",
    "split_fraction": "SPLIT_FRACTION",
    "folds": "FOLDS",
    "n_candidates": "N_CANDIDATES",
}


def _add_input(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--series", type=Path, help="Event series as newline-delimited JSON")
    source.add_argument("--log", type=Path, help="Raw call/text log CSV")
    parser.add_argument("--channel", choices=[c.value for c in Channel], help="Keep one channel of the log")
    parser.add_argument("--study-end", type=float, help="Observation end for every series, epoch seconds")
    parser.add_argument("--skip-bad-rows", action="store_true", help="Log and drop malformed log rows")
    parser.add_argument("--min-events", type=int)
    parser.add_argument("--max-series-events", type=int)


def _add_fit(parser: argparse.ArgumentParser, family: bool = True) -> None:
    if family:
        parser.add_argument("--family", choices=[f.value for f in KernelFamily], default=KernelFamily.PL.value)
    parser.add_argument("--n-starts", type=int)
    parser.add_argument("--tolerance", type=float)
    parser.add_argument("--max-iterations", type=int)


def _register_simulate(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("simulate", help="Simulate event series with known parameters")
    parser.add_argument("--family", choices=[f.value for f in KernelFamily], required=True)
    parser.add_argument("--kappa", type=float, required=True)
    parser.add_argument("--theta", type=float, required=True)
    parser.add_argument("--c", type=float)
    parser.add_argument("--horizon", type=float, required=True, help="Observation end in hours")
    parser.add_argument("--method", choices=[m.value for m in SimulationMethod], default=SimulationMethod.THINNING.value)
    parser.add_argument("--n-series", type=int, default=1)
    parser.add_argument("--max-events", type=int, default=100_000)
    regime = parser.add_argument_group("regime change")
    regime.add_argument("--switch-time", type=float, help="Hour at which the kernel switches")
    regime.add_argument("--after-kappa", type=float)
    regime.add_argument("--after-theta", type=float)
    regime.add_argument("--after-c", type=float)
    cohort = parser.add_argument_group("cohort")
    cohort.add_argument("--users", type=int, help="Simulate a cohort of this many users")
    cohort.add_argument("--series-per-user", type=int, default=5)
    cohort.add_argument("--spread", type=float, default=0.2)
    cohort.add_argument("--min-events", type=int)
    cohort.add_argument("--max-series-events", type=int)
    cohort.add_argument("--traits-output", type=Path, help="Write synthetic Big5 traits CSV")
    parser.add_argument("--output", type=Path, required=True)
    parser.set_defaults(handler=commands.cmd_simulate)


def _register_fit(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("fit", help="Fit a kernel to every series")
    _add_input(parser)
    _add_fit(parser)
    parser.add_argument("--joint", action="store_true", help="Fit one parameter set to all series")
    parser.add_argument("--records", type=Path, help="Relationship records used to label descriptors")
    parser.add_argument("--descriptors", type=Path, help="Write relationship descriptors CSV")
    parser.add_argument("--series-output", type=Path, help="Write the built series")
    parser.add_argument("--output", type=Path, required=True)
    parser.set_defaults(handler=commands.cmd_fit)


def _register_compare_kernels(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("compare-kernels", help="Paired holdout comparison of EXP and PL")
    _add_input(parser)
    _add_fit(parser, family=False)
    parser.add_argument("--split-fraction", type=float)
    parser.add_argument("--split-mode", choices=[m.value for m in SplitMode], default=SplitMode.EVENTS.value)
    parser.add_argument("--rows-output", type=Path, help="Write per-series scores CSV")
    parser.add_argument("--output", type=Path, required=True)
    parser.set_defaults(handler=commands.cmd_compare_kernels)


def _register_label_relationships(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("label-relationships", help="Categorize dyads from survey waves")
    parser.add_argument("--surveys", type=Path, required=True)
    parser.add_argument("--drop-rare", action="store_true", help="Exclude categories below --min-class-size")
    parser.add_argument("--min-class-size", type=int)
    parser.add_argument("--output", type=Path, required=True)
    parser.set_defaults(handler=commands.cmd_label_relationships)


def _register_changepoint(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("changepoint", help="Holdout scores around relationship changes")
    _add_input(parser)
    _add_fit(parser)
    parser.add_argument("--records", type=Path, help="Relationship records with survey times")
    parser.add_argument("--s1", type=float, help="Hours; applied to every series")
    parser.add_argument("--s2", type=float)
    parser.add_argument("--s3", type=float)
    parser.add_argument("--artificial-tipping", action="store_true", help="Use the midpoint before S2 as S1")
    parser.add_argument("--summary-output", type=Path, help="Write per-category signed-rank tests")
    parser.add_argument("--output", type=Path, required=True)
    parser.set_defaults(handler=commands.cmd_changepoint)


def _register_embed(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("embed", help="Per-user embeddings from fitted models")
    parser.add_argument("--series", type=Path, required=True)
    parser.add_argument("--models", type=Path, required=True)
    parser.add_argument("--output", type=Path, required=True)
    parser.set_defaults(handler=commands.cmd_embed)


def _register_classify(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("classify", help="Nested-CV kNN on relationship descriptors")
    parser.add_argument("--features", type=Path, required=True)
    parser.add_argument("--classes", help="Comma-separated categories to keep")
    parser.add_argument("--folds", type=int)
    parser.add_argument("--n-candidates", type=int)
    parser.add_argument("--no-oversample", action="store_true")
    parser.add_argument("--confusion-output", type=Path)
    parser.add_argument("--output", type=Path, required=True)
    parser.set_defaults(handler=commands.cmd_classify)


def _register_regress(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("regress", help="Nested-CV kNN regression of traits on embeddings")
    parser.add_argument("--embeddings", type=Path, required=True)
    parser.add_argument("--targets", type=Path, required=True)
    parser.add_argument("--target", action="append", help="Target column; repeat for several")
    parser.add_argument("--folds", type=int)
    parser.add_argument("--n-candidates", type=int)
    parser.add_argument("--output", type=Path, required=True)
    parser.set_defaults(handler=commands.cmd_regress)


def _register_profile(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("profile", help="Dataset activity statistics and plot-ready tables")
    _add_input(parser)
    parser.add_argument("--min-interactions", type=int)
    parser.add_argument("--output", type=Path, required=True)
    parser.set_defaults(handler=commands.cmd_profile)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=APP_NAME, description=APP_DESCRIPTION)
    parser.add_argument("--config", type=Path, help="KEY=value settings file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--jobs", type=int)
    parser.add_argument("--log-level")
    subparsers = parser.add_subparsers(dest="command", required=True)
    _register_simulate(subparsers)
    _register_fit(subparsers)
    _register_compare_kernels(subparsers)
    _register_label_relationships(subparsers)
    _register_changepoint(subparsers)
    _register_embed(subparsers)
    _register_classify(subparsers)
    _register_regress(subparsers)
    _register_profile(subparsers)
    return parser


def _flags(args: argparse.Namespace) -> dict[str, Any]:
    return {k: v for k, v in sorted(vars(args).items()) if k != "handler"}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    overrides = {field: getattr(args, dest, None) for dest, field in SETTING_FLAGS.items()}
    try:
        resolved = load_settings(args.config).merged(overrides)
    except (FileNotFoundError, ValidationError) as e:
        print(f"{APP_NAME}: error: {str(e)}", file=sys.stderr)
        return 2
    Logger.logger_setup(resolved.LOG_LEVEL)

    try:
        outputs = args.handler(args, resolved)
        write_manifest(args.output, args.command, resolved.model_dump(), _flags(args), outputs)
    except ValidationError as e:
        logger.error(f"Invalid input: {e.errors()[0]['msg']}")
        return 2
    except HawkesCallsError as e:
        logger.error(f"{e.error}: {e.message}")
        return e.exit_code
    return 0
