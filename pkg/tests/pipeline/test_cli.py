import json

import pytest

from kmanb_toolkit import ExperimentResult, __version__
from kmanb_toolkit.cli import (
    EXIT_DATA,
    EXIT_INTERNAL,
    EXIT_OK,
    EXIT_USAGE,
    main,
)
from kmanb_toolkit.pipeline import read_report_csv

QUICK = ["--synth", "train_test", "--fraction", "0.02"]


def test_run_writes_json(tmp_path):
    out = tmp_path / "nb.json"
    code = main(
        ["run", "--device", "fridge", "--algorithm", "nb", *QUICK]
        + ["--seed", "3", "--out", str(out)]
    )
    assert code == EXIT_OK
    result = ExperimentResult.parse_file(out)
    assert result.seed == 3
    assert result.config.algorithm == "nb"


def test_run_format_follows_suffix(tmp_path):
    out = tmp_path / "kmanb.csv"
    args = ["run", "--device", "fridge", *QUICK, "--rounds", "2"]
    assert main([*args, "--out", str(out)]) == EXIT_OK
    assert list(read_report_csv(out)) == ["KMANB"]


def test_run_without_holdout(tmp_path):
    out = tmp_path / "kmanb.json"
    args = ["run", "--device", "fridge", *QUICK, "--rounds", "2"]
    assert main([*args, "--no-holdout", "--out", str(out)]) == EXIT_OK
    result = ExperimentResult.parse_file(out)
    assert result.config.holdout is None
    assert result.ensemble.cluster_feature
    assert (result.ensemble.rounds, result.ensemble.held_out) == (2, 0)


def test_run_from_csv(fridge_csv, tmp_path):
    out = tmp_path / "report.txt"
    code = main(
        ["run", "--device", "fridge", "--algorithm", "knn"]
        + ["--train", str(fridge_csv), "--out", str(out), "--format", "md"]
    )
    assert code == EXIT_OK
    assert out.read_text().startswith("## IoT Fridge Experiment Results")


def test_rank_prints_csv(fridge_csv, capsys):
    code = main(["rank", "--device", "fridge", "--input", str(fridge_csv)])
    assert code == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "feature,score"
    assert len(lines) == 5


def test_synth_then_rank(tmp_path):
    data = tmp_path / "thermostat.csv"
    ranking = tmp_path / "ranking.json"
    assert (
        main(["synth", "--device", "thermostat", "--out", str(data)])
        == EXIT_OK
    )
    assert data.read_text().startswith("date,time,")
    code = main(
        ["rank", "--device", "thermostat", "--input", str(data)]
        + ["--out", str(ranking)]
    )
    assert code == EXIT_OK
    assert json.loads(ranking.read_text())["scores"]


def test_suite(shared_datadir, tmp_path):
    code = main(
        ["suite", "--config", str(shared_datadir / "suite.yaml")]
        + ["--out", str(tmp_path / "suite")]
    )
    assert code == EXIT_OK
    assert (tmp_path / "suite" / "train_test.md").exists()


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["run", "--device", "toaster", "--synth", "train_test"],
        ["run", "--device", "fridge", "--out", "x.json"],
        ["rank", "--device", "fridge"],
    ],
)
def test_usage_errors(argv, capsys):
    assert main(argv) == EXIT_USAGE
    assert "usage: kmanb" in capsys.readouterr().err


def test_invalid_configuration(tmp_path):
    code = main(
        ["run", "--device", "fridge", *QUICK, "--rounds", "0"]
        + ["--out", str(tmp_path / "r.json")]
    )
    assert code == EXIT_USAGE


def test_invalid_suite_file(tmp_path):
    suite = tmp_path / "suite.yaml"
    suite.write_text("experiments: [{device: fridge, knn_k: 0}]\n")
    code = main(["suite", "--config", str(suite), "--out", str(tmp_path)])
    assert code == EXIT_USAGE
    suite.write_text("experiments: [\n")
    code = main(["suite", "--config", str(suite), "--out", str(tmp_path)])
    assert code == EXIT_USAGE


def test_data_errors(tmp_path, shared_datadir):
    missing = tmp_path / "missing.csv"
    code = main(["rank", "--device", "fridge", "--input", str(missing)])
    assert code == EXIT_DATA
    code = main(["suite", "--config", str(missing), "--out", str(tmp_path)])
    assert code == EXIT_DATA


def test_unwritable_report(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code = main(
        ["run", "--device", "fridge", "--algorithm", "nb", *QUICK]
        + ["--out", str(blocker / "r.json")]
    )
    assert code == EXIT_DATA


def test_unexpected_failure(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("boom")

    monkeypatch.setattr("kmanb_toolkit.cli.run_experiment", boom)
    code = main(
        ["run", "--device", "fridge", *QUICK]
        + ["--out", str(tmp_path / "r.json")]
    )
    assert code == EXIT_INTERNAL


def test_version(capsys):
    assert main(["--version"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == f"kmanb {__version__}"


def test_errors_are_logged(tmp_path, log_dir):
    main(["rank", "--device", "fridge", "--input", str(tmp_path / "no")])
    assert "DataError" in (log_dir / "error.log").read_text()
