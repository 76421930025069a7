import json

import numpy as np
import pandas as pd
import pytest

from schema.schema import EventSeries
from service.utils import (
    file_digest,
    make_rng,
    parallel_map,
    read_layout_csv,
    read_ndjson,
    write_csv,
    write_manifest,
    write_ndjson,
)
from utils.custom_exception import HawkesCallsError


def _square(x: int) -> int:
    return x * x


def test_make_rng_streams():
    assert make_rng(7, 1).random() == make_rng(7, 1).random()
    assert make_rng(7, 1).random() != make_rng(7, 2).random()


def test_parallel_map_keeps_order():
    items = list(range(25))
    assert parallel_map(_square, items, jobs=1) == [x * x for x in items]
    assert parallel_map(_square, items, jobs=2) == [x * x for x in items]


def test_ndjson_round_trip(tmp_path, short_series):
    path = write_ndjson(tmp_path / "series.ndjson", [short_series, short_series])
    assert len(path.read_text().splitlines()) == 2
    assert read_ndjson(path, EventSeries) == [short_series, short_series]


def test_read_ndjson_errors(tmp_path):
    with pytest.raises(HawkesCallsError):
        read_ndjson(tmp_path / "absent.ndjson", EventSeries)

    bad = tmp_path / "bad.ndjson"
    bad.write_text('{"sender": "a"}\n')
    with pytest.raises(HawkesCallsError, match="line 1"):
        read_ndjson(bad, EventSeries)


def test_csv_with_layout(tmp_path):
    frame = pd.DataFrame({"name": ["a", "b"], "value": [0.1, 1 / 3]})
    path = write_csv(tmp_path / "table.csv", frame, layout="demo/v1")

    layout, back = read_layout_csv(path)
    assert layout == "demo/v1"
    assert back["value"].tolist() == [0.1, 1 / 3]

    plain = write_csv(tmp_path / "plain.csv", frame)
    layout, back = read_layout_csv(plain)
    assert layout is None
    assert list(back.columns) == ["name", "value"]


def test_write_manifest(tmp_path):
    output = tmp_path / "models.ndjson"
    output.write_text("payload\n")
    manifest = write_manifest(output, "fit", {"SEED": 1}, {"output": output, "joint": False}, [output])

    assert manifest.name == "models.ndjson.manifest.json"
    content = json.loads(manifest.read_text())
    assert content["command"] == "fit"
    assert content["settings"] == {"SEED": 1}
    assert content["flags"]["output"] == str(output)
    assert content["outputs"] == {str(output): file_digest(output)}
    assert np.all([len(v) == 64 for v in content["outputs"].values()])
