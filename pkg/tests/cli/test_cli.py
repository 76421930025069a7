import json

import numpy as np
import pytest

from cli import build_parser, main
from schema.models import KernelFamily, RelationshipCategory
from schema.reports import RelationshipDescriptor
from schema.schema import EventSeries, FittedModel
from service.features_service import FeaturesService
from service.utils import read_ndjson

SIMULATE = ["simulate", "--family", "exp", "--kappa", "0.8", "--theta", "2.0", "--horizon", "200"]


@pytest.fixture(autouse=True)
def clean_env(mock_env):
    yield


def _simulate(tmp_path, *extra: str, name: str = "series.ndjson") -> str:
    output = str(tmp_path / name)
    assert main(["--seed", "7", *SIMULATE, "--n-series", "30", "--output", output, *extra]) == 0
    return output


def test_parser_lists_every_command():
    parser = build_parser()
    commands = parser._subparsers._group_actions[0].choices
    assert set(commands) == {
        "simulate",
        "fit",
        "compare-kernels",
        "label-relationships",
        "changepoint",
        "embed",
        "classify",
        "regress",
        "profile",
    }


def test_missing_required_flag(tmp_path, capsys):
    assert main(["simulate", "--family", "exp", "--kappa", "0.5", "--output", str(tmp_path / "x")]) == 2
    assert "usage" in capsys.readouterr().err


def test_power_law_needs_shift(tmp_path):
    args = ["simulate", "--family", "pl", "--kappa", "0.5", "--theta", "1.2", "--horizon", "10"]
    assert main([*args, "--output", str(tmp_path / "x.ndjson")]) == 2


def test_invalid_flag_value(tmp_path):
    assert main(["--jobs", "0", *SIMULATE, "--output", str(tmp_path / "x.ndjson")]) == 2


def test_simulate_is_deterministic(tmp_path):
    first = _simulate(tmp_path, name="a.ndjson")
    second = _simulate(tmp_path, name="b.ndjson")
    with open(first, "rb") as a, open(second, "rb") as b:
        assert a.read() == b.read()

    series = read_ndjson(first, EventSeries)
    assert len(series) == 30
    assert series[0].sender == "sim0000"

    manifest = json.loads(open(f"{first}.manifest.json").read())
    assert manifest["command"] == "simulate"
    assert manifest["settings"]["SEED"] == 7
    assert list(manifest["outputs"]) == [first]


def test_simulate_zero_kappa(tmp_path):
    output = str(tmp_path / "s.ndjson")
    args = ["simulate", "--family", "exp", "--kappa", "0", "--theta", "1", "--horizon", "10", "--output", output]
    assert main(args) == 0
    assert read_ndjson(output, EventSeries)[0].times == [0.0]


def test_fit_and_embed(tmp_path):
    series_path = _simulate(tmp_path)
    models_path = str(tmp_path / "models.ndjson")
    args = ["fit", "--series", series_path, "--family", "exp", "--n-starts", "2"]
    assert main(["--seed", "1", *args, "--output", models_path]) == 0

    models = read_ndjson(models_path, FittedModel)
    series = read_ndjson(series_path, EventSeries)
    assert len(models) == sum(s.n_events >= 2 for s in series)
    assert all(m.family is KernelFamily.EXP for m in models)

    again = str(tmp_path / "models-again.ndjson")
    assert main(["--seed", "1", "--jobs", "2", *args, "--output", again]) == 0
    assert open(models_path, "rb").read() == open(again, "rb").read()

    embeddings = str(tmp_path / "embeddings.csv")
    assert main(["embed", "--series", series_path, "--models", models_path, "--output", embeddings]) == 0
    assert len(FeaturesService.read_embeddings(embeddings)) == len({m.sender for m in models if m.converged})


def test_fit_with_no_qualifying_series(tmp_path):
    log = tmp_path / "log.csv"
    log.write_text("timestamp,sender,receiver,channel,duration\n100,a,b,call,5\n")
    output = tmp_path / "models.ndjson"
    assert main(["fit", "--log", str(log), "--output", str(output)]) == 0
    assert output.read_text() == ""


def test_fit_reports_bad_log(tmp_path):
    log = tmp_path / "log.csv"
    log.write_text("timestamp,sender\n100,a\n")
    assert main(["fit", "--log", str(log), "--output", str(tmp_path / "m.ndjson")]) == 1


def test_compare_kernels_with_no_scorable_series(tmp_path, capsys):
    series = tmp_path / "short.ndjson"
    series.write_text(
        "".join(
            EventSeries(sender=f"s{i}", receiver="r", times=[0.0, 1.0], observation_end=1.0).model_dump_json() + "\n"
            for i in range(3)
        )
    )
    output = tmp_path / "comparison.json"
    assert main(["compare-kernels", "--series", str(series), "--output", str(output)]) == 0

    report = json.loads(output.read_text())
    assert report["rows"] == []
    assert len(report["failures"]) == 3
    assert report["pl_win_fraction"] is None
    assert json.loads(open(f"{output}.manifest.json").read())["command"] == "compare-kernels"
    assert "pl wins" not in capsys.readouterr().out


def test_label_relationships(tmp_path, capsys):
    surveys = tmp_path / "surveys.csv"
    surveys.write_text(
        "sender,receiver,wave,label,wave_time\n"
        "a,b,1,friend,100\n"
        "a,b,2,coworker,200\n"
        "a,c,1,parent,100\n"
    )
    output = tmp_path / "records.ndjson"
    assert main(["label-relationships", "--surveys", str(surveys), "--output", str(output)]) == 0
    assert "friendship-relaxing" in capsys.readouterr().out
    assert len(output.read_text().splitlines()) == 2


def test_changepoint_needs_tipping_points(tmp_path):
    series_path = _simulate(tmp_path)
    assert main(["changepoint", "--series", series_path, "--output", str(tmp_path / "c.ndjson")]) == 2


def test_classify_separable_descriptors(tmp_path, capsys):
    rng = np.random.default_rng(0)
    descriptors = []
    for i in range(40):
        stable = i % 2 == 0
        kappa = rng.normal(0.2 if stable else 0.8, 0.03)
        descriptors.append(
            RelationshipDescriptor(
                relationship_id=f"r{i}",
                family=KernelFamily.EXP,
                kappa=kappa,
                theta=rng.normal(1.0 if stable else 5.0, 0.1),
                n_star=kappa,
                label=RelationshipCategory.FAMILY_STABLE if stable else RelationshipCategory.FRIENDSHIP_STABLE,
            )
        )
    features = FeaturesService.export_features(descriptors, tmp_path / "descriptors.csv")
    output = tmp_path / "classify.json"
    args = ["classify", "--features", str(features), "--folds", "4", "--n-candidates", "3"]
    assert main([*args, "--output", str(output)]) == 0

    report = json.loads(output.read_text())
    assert report["pooled"]["macro_f1"] > 0.95
    assert "macro-F1" in capsys.readouterr().out


def test_profile_writes_tables(tmp_path):
    series_path = _simulate(tmp_path)
    output = tmp_path / "profile.json"
    assert main(["profile", "--series", series_path, "--min-interactions", "2", "--output", str(output)]) == 0
    for name in ("users", "hour_of_day", "inter_event_cdf"):
        assert (tmp_path / f"profile.{name}.csv").is_file()
