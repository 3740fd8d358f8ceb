from __future__ import annotations

import csv
import io

import pytest

from deepfmea.cli import main


def rows(text: str):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture(scope="module")
def cli_store(tmp_path_factory, surrogate_dir):
    store = tmp_path_factory.mktemp("cli") / "store"
    assert main(["--store", str(store), "model", "apply", "hydraulic"]) == 0
    assert main(["--store", str(store), "ingest", "--dataset-dir", str(surrogate_dir)]) == 0
    return store


def test_stepwise_commands(cli_store, tmp_path, capsys):
    s = ["--store", str(cli_store)]
    assert main(s + ["features", "compute", "--sensors", "dT_Cool_ME3,TS3_MEAN_INT1", "--out", str(tmp_path / "f.csv")]) == 0
    head = (tmp_path / "f.csv").read_text().splitlines()[0]
    assert head == "cycle,dT_Cool_ME3,TS3_MEAN_INT1"

    assert main(s + ["--seed", "3", "fit", "--k", "5", "--ratio", "0.7"]) == 0
    capsys.readouterr()
    assert main(s + ["score", "--split", "test"]) == 0
    scores = rows(capsys.readouterr().out)
    assert list(scores[0]) == ["cycle", "attention_index", "imputed_flag"]

    cycle = max(scores, key=lambda r: float(r["attention_index"]))["cycle"]
    assert main(s + ["attribute", "--cycle", cycle, "--top", "3"]) == 0
    ranked = rows(capsys.readouterr().out)
    assert len(ranked) == 3
    assert sum(float(r["share"]) for r in ranked) <= 1 + 1e-9

    out = tmp_path / "ev"
    assert main(s + ["evaluate", "--out", str(out)]) == 0
    assert {"pr_curve.csv", "delta_qcpn_curve.csv", "scenario_summary.csv", "pr_curve.svg"} <= {
        p.name for p in out.iterdir()
    }
    assert (out / "pr_curve.svg").read_text().startswith("<svg")
    assert main(s + ["project2d", "--out", str(tmp_path / "p.csv")]) == 0


def test_store_from_environment(cli_store, monkeypatch, tmp_path):
    monkeypatch.setenv("DEEPFMEA_STORE", str(cli_store))
    assert main(["features", "compute", "--sensors", "dT_Cool_ME3", "--out", str(tmp_path / "f.csv")]) == 0


def test_errors_are_stage_tagged(cli_store, tmp_path, capsys):
    s = ["--store", str(cli_store)]
    assert main(s + ["evaluate", "--costs", str(tmp_path / "none.yaml"), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert err.startswith("deepfmea: [evaluate]") and "none.yaml" in err

    assert main(s + ["attribute", "--cycle", "99999"]) == 1
    assert "[attribute]" in capsys.readouterr().err

    assert main(["--store", str(tmp_path / "empty"), "fit"]) == 1
    assert "[fit]" in capsys.readouterr().err


def test_run_and_report(surrogate_dir, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--dataset-dir", str(surrogate_dir), "--out", str(out), "--no-svg"]) == 0
    capsys.readouterr()
    assert main(["report", str(out), "--max", "2"]) == 0
    text = capsys.readouterr().out
    assert "average precision" in text
    assert main(["run", "--dataset-dir", str(surrogate_dir), "--out", str(out), "--costs", "missing.yaml"]) == 1
    assert "[evaluate]" in capsys.readouterr().err


def test_synth(tmp_path):
    assert main(["synth", "--out", str(tmp_path / "d"), "--cycles", "20"]) == 0
    assert (tmp_path / "d" / "profile.txt").read_text().count("\n") == 20
    assert len((tmp_path / "d" / "EPS1.txt").read_text().splitlines()[0].split("\t")) == 6000


def test_bad_spec_reports_violations(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: x\nelements:\n  - {id: A}\n  - {id: B}\n")
    assert main(["--store", str(tmp_path / "s"), "model", "apply", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "[model]" in err and "multiple-roots" in err
