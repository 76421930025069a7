import hashlib
import logging
import sys
from collections.abc import Callable, Iterable, Sequence
from pathlib import Path
from typing import Any, TypeVar

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ValidationError
from tqdm import tqdm

from config.settings import MANIFEST_SUFFIX, PROGRESS_MIN_ITEMS
from models.configs import RunManifest
from utils.custom_exception import FeatureExportError, HawkesCallsError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")
M = TypeVar("M", bound=BaseModel)

LAYOUT_PREFIX = "#layout="
FLOAT_FORMAT = "%.17g"


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator keyed by the master seed and a task-specific stream."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *stream])))


def parallel_map(
    fn: Callable[[T], R],
    items: Sequence[T],
    jobs: int = 1,
    desc: str | None = None,
) -> list[R]:
    """Apply fn to every item on a joblib pool; results keep input order."""
    show = len(items) >= PROGRESS_MIN_ITEMS and sys.stderr.isatty()
    progress = tqdm(items, desc=desc, file=sys.stderr, disable=not show)
    if jobs == 1:
        return [fn(item) for item in progress]
    return Parallel(n_jobs=jobs)(delayed(fn)(item) for item in progress)


def write_ndjson(path: str | Path, items: Iterable[BaseModel]) -> Path:
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="\n") as sink:
            for item in items:
                sink.write(item.model_dump_json() + "\n")
    except OSError as e:
        logger.error(f"Error writing {path}: {str(e)}")
        raise HawkesCallsError(f"Failed to write {path}: {str(e)}")
    return path


def read_ndjson(path: str | Path, model: type[M]) -> list[M]:
    path = Path(path)
    items: list[M] = []
    try:
        with path.open("r", encoding="utf-8") as source:
            for number, line in enumerate(source, start=1):
                if not line.strip():
                    continue
                try:
                    items.append(model.model_validate_json(line))
                except ValidationError as e:
                    raise HawkesCallsError(f"{path} line {number}: {e.errors()[0]['msg']}")
    except OSError as e:
        logger.error(f"Error reading {path}: {str(e)}")
        raise HawkesCallsError(f"Failed to read {path}: {str(e)}")
    return items


def write_csv(path: str | Path, frame: pd.DataFrame, layout: str | None = None) -> Path:
    """Write a CSV with exact float round-trip, optionally under a '#layout=' line."""
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as sink:
            if layout is not None:
                sink.write(f"{LAYOUT_PREFIX}{layout}\n")
            frame.to_csv(sink, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        logger.error(f"Error writing {path}: {str(e)}")
        raise FeatureExportError(f"Failed to write {path}: {str(e)}")
    return path


def read_layout_csv(path: str | Path) -> tuple[str | None, pd.DataFrame]:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as source:
            first = source.readline()
            layout = None
            if first.startswith(LAYOUT_PREFIX):
                layout = first[len(LAYOUT_PREFIX) :].strip()
            else:
                source.seek(0)
            frame = pd.read_csv(source, float_precision="round_trip")
    except (OSError, pd.errors.ParserError) as e:
        logger.error(f"Error reading {path}: {str(e)}")
        raise HawkesCallsError(f"Failed to read {path}: {str(e)}")
    except pd.errors.EmptyDataError:
        frame = pd.DataFrame()
    return layout, frame


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(
    output: str | Path,
    command: str,
    settings: dict[str, Any],
    flags: dict[str, Any],
    outputs: Sequence[str | Path],
) -> Path:
    """Write '<output>.manifest.json' echoing the resolved run and digests of its outputs."""
    manifest = RunManifest(
        command=command,
        settings=settings,
        flags={k: (str(v) if isinstance(v, Path) else v) for k, v in flags.items()},
        outputs={str(p): file_digest(p) for p in outputs},
    )
    path = Path(f"{output}{MANIFEST_SUFFIX}")
    path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path
