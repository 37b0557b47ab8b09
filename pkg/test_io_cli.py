#!/usr/bin/env python3
"""
Tests for report/density files and the rvns command line
"""

import json

import numpy as np
import pandas as pd
import pytest

from rvns_cli import main
from rvns_core import DataRange, PerturbationConfig
from rvns_errors import DatasetIOError
from rvns_experiment import TABLE_COLUMNS
from rvns_io import read_reports, write_reports
from rvns_perturbation import perturb_batch

RANGE = DataRange(a=0, b=10)


def test_reports_file_keeps_users_and_order(tmp_path):
    config = PerturbationConfig(range=RANGE, d=2.0, k=3)
    batch = perturb_batch([7.0, 1.0, 4.0], config, np.random.default_rng(0), user_ids=["z", "a", "m"])
    path = tmp_path / "reports.csv"
    write_reports(batch, path, diagnostic=True)

    frame = pd.read_csv(path)
    assert list(frame.columns) == ["user_id", "sample_index", "value", "band_offset"]
    assert len(frame) == 9

    loaded = read_reports(path)
    assert loaded.user_ids == ["z", "a", "m"]
    assert np.array_equal(loaded.samples, batch.samples)
    assert np.array_equal(loaded.band_offsets, batch.band_offsets)


def test_reports_without_diagnostics(tmp_path):
    config = PerturbationConfig(range=RANGE, d=2.0, k=2)
    batch = perturb_batch([3.0, 6.0], config, np.random.default_rng(1))
    path = tmp_path / "reports.csv"
    write_reports(batch, path)
    assert "band_offset" not in pd.read_csv(path).columns
    assert np.all(np.isnan(read_reports(path).band_offsets))


def test_reports_with_uneven_sample_counts(tmp_path):
    path = tmp_path / "reports.csv"
    path.write_text("user_id,sample_index,value\n1,0,2.0\n1,1,3.0\n2,0,4.0\n", encoding="utf-8")
    with pytest.raises(DatasetIOError):
        read_reports(path)


def test_pipeline_through_cli(tmp_path, capsys):
    data = tmp_path / "data.csv"
    reports = tmp_path / "reports.csv"
    density = tmp_path / "density.json"
    attacked = tmp_path / "attack.csv"
    metrics = tmp_path / "metrics.json"
    bounds = ["--a", "0", "--b", "10"]

    assert main(["generate", "--df", "2", "--n", "500", "--seed", "1", "--out", str(data), *bounds]) == 0
    assert main(["perturb", "--in", str(data), "--d", "2", "--k", "3", "--seed", "2",
                 "--out", str(reports), *bounds]) == 0
    assert len(pd.read_csv(reports)) == 500 * 3

    assert main(["reconstruct", "--reports", str(reports), "--d", "2", "--m", "30",
                 "--out", str(density), *bounds]) == 0
    payload = json.loads(density.read_text(encoding="utf-8"))
    assert len(payload["grid"]) == 30 and len(payload["density"]) == 30
    assert isinstance(payload["converged"], bool)

    assert main(["attack", "--reports", str(reports), "--d", "2", "--grid-resolution", "200",
                 "--original", str(data), "--out", str(attacked), *bounds]) == 0
    assert list(pd.read_csv(attacked).columns) == ["user_id", "x_infer", "log_likelihood"]
    assert "Privacy distance" in capsys.readouterr().out

    assert main(["evaluate", "--original", str(data), "--density", str(density),
                 "--out", str(metrics)]) == 0
    evaluation = json.loads(metrics.read_text(encoding="utf-8"))
    assert evaluation["wasserstein"] >= 0
    assert set(evaluation["indicator_errors"]) == {
        "mean", "std_dev", "mode", "median", "skewness", "kurtosis"
    }


def test_budget_command(capsys):
    assert main(["budget", "--a", "0", "--b", "10", "--d", "1", "--delta", "0.01"]) == 0
    assert "5.99146" in capsys.readouterr().out
    assert main(["budget", "--a", "0", "--b", "10", "--d", "1", "--delta", "4"]) == 2


def test_reconstruct_writes_density_csv(tmp_path):
    config = PerturbationConfig(range=RANGE, d=2.0, k=3)
    batch = perturb_batch(np.linspace(1, 9, 200), config, np.random.default_rng(3))
    reports = tmp_path / "reports.csv"
    density = tmp_path / "density.json"
    table = tmp_path / "density.csv"
    write_reports(batch, reports)

    assert main(["reconstruct", "--reports", str(reports), "--a", "0", "--b", "10", "--d", "2",
                 "--m", "25", "--out", str(density), "--density-csv", str(table)]) == 0
    frame = pd.read_csv(table)
    payload = json.loads(density.read_text(encoding="utf-8"))
    assert list(frame.columns) == ["z", "density"]
    assert np.allclose(frame["z"], payload["grid"])
    assert np.allclose(frame["density"], payload["density"])


def test_attack_resolution_defaults_from_settings(tmp_path, monkeypatch):
    config = PerturbationConfig(range=RANGE, d=2.0, k=2)
    reports = tmp_path / "reports.csv"
    write_reports(perturb_batch([2.0, 5.0, 8.0], config, np.random.default_rng(4)), reports)
    args = ["attack", "--reports", str(reports), "--a", "0", "--b", "10", "--d", "2",
            "--out", str(tmp_path / "attack.csv")]

    monkeypatch.setenv("RVNS_GRID_RESOLUTION", "1")
    assert main(args) == 2
    assert main([*args, "--grid-resolution", "50"]) == 0
    monkeypatch.setenv("RVNS_GRID_RESOLUTION", "50")
    assert main(args) == 0


def test_exit_codes(tmp_path):
    missing = tmp_path / "missing.csv"
    assert main(["perturb", "--in", str(missing), "--a", "0", "--b", "10", "--d", "2",
                 "--out", str(tmp_path / "r.csv")]) == 1
    with pytest.raises(SystemExit) as excinfo:
        main(["perturb", "--unknown-flag"])
    assert excinfo.value.code == 2


def write_config(path, **extra):
    lines = {
        "DATASET": "chi2",
        "DF": "2",
        "N": "300",
        "A": "0",
        "B": "10",
        "M": "20",
        "K": "2",
        "D_SWEEP": "1,2",
        "BASELINES": "laplace",
        "BASELINE_SCALES": "0.5",
        "REPETITIONS": "2",
        "SEED": "7",
        "GRID_RESOLUTION": "100",
        "RECORD_RUNTIME": "false",
    }
    lines.update(extra)
    path.write_text("".join(f"{key}={value}\n" for key, value in lines.items()), encoding="utf-8")
    return path


def test_experiment_is_reproducible(tmp_path):
    config = write_config(tmp_path / "sweep.env")
    first, second = tmp_path / "first.csv", tmp_path / "second.csv"
    assert main(["experiment", str(config), "--out", str(first)]) == 0
    assert main(["experiment", str(config), "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()

    table = pd.read_csv(first)
    assert list(table.columns) == TABLE_COLUMNS
    assert list(table["mechanism"]) == ["rvns", "rvns", "laplace"]
    assert list(table["param"]) == [1.0, 2.0, 0.5]
    assert (table["runtime_s"] == 0).all()


def test_experiment_matched_baselines(tmp_path):
    config = write_config(tmp_path / "sweep.env", MATCH_BASELINES="true", BASELINE_SCALES="", INCLUDE_RAW="true")
    out = tmp_path / "table.csv"
    assert main(["experiment", str(config), "--out", str(out)]) == 0
    table = pd.read_csv(out)
    assert sorted(table["mechanism"].unique()) == ["laplace", "rvns", "rvns_raw"]
    assert (table["mechanism"] == "laplace").sum() == 2


def test_experiment_config_errors(tmp_path):
    bad = write_config(tmp_path / "bad.env", UNKNOWN_KEY="1")
    assert main(["experiment", str(bad), "--out", str(tmp_path / "t.csv")]) == 2
    csv_without_path = write_config(tmp_path / "csv.env", DATASET="csv")
    assert main(["experiment", str(csv_without_path), "--out", str(tmp_path / "t.csv")]) == 2
    assert main(["experiment", str(tmp_path / "absent.env"), "--out", str(tmp_path / "t.csv")]) == 1


def test_empty_sweep_writes_header_only(tmp_path):
    config = write_config(tmp_path / "empty.env", D_SWEEP="", BASELINES="", BASELINE_SCALES="")
    out = tmp_path / "table.csv"
    assert main(["experiment", str(config), "--out", str(out)]) == 0
    assert out.read_text(encoding="utf-8").strip() == ",".join(TABLE_COLUMNS)
