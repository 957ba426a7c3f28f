"""
End-to-end tests of the `uae` command line on tiny synthetic configs.
"""
from pathlib import Path

import pytest

from src.cli import run_command
from src.persistence.results import ATTACK_LEDGER, AUGMENT_LEDGER, read_csv_rows, read_key_value_report


def run(*argv) -> int:
    return run_command([*map(str, argv), "--no-progress"])


@pytest.fixture
def config(write_config):
    return write_config()


@pytest.fixture
def out_root(tmp_path) -> Path:
    return tmp_path / "out"


def test_train_writes_model_and_report(config, out_root):
    assert run("train", "--config", config, "--run-id", "t1") == 0
    run_dir = out_root / "t1"
    assert (run_dir / "resolved-config.toml").exists()
    assert (run_dir / "model").is_dir()
    report = read_key_value_report(run_dir / "report.txt")
    assert report["epochs"] == "1"
    assert float(report["test_recon_error"]) >= 0.0


def test_attack_single_sample_writes_a_full_trace(config, out_root):
    assert run("attack", "--config", config, "--run-id", "a1", "--sample", 0) == 0
    run_dir = out_root / "a1"
    trace = read_csv_rows(run_dir / "traces" / "minmax-sample-00000.csv")
    assert [int(row["t"]) for row in trace] == [1, 2, 3, 4, 5]
    summary = read_csv_rows(run_dir / "summary.csv")
    assert [row["sample_id"] for row in summary] == ["0"]
    assert summary[0]["wallclock_ms"] == "0"
    ledger = read_csv_rows(out_root / ATTACK_LEDGER)
    assert ledger[0]["run_id"] == "a1:minmax"


def test_attack_rerun_from_resolved_config_is_bit_identical(config, out_root):
    assert run("attack", "--config", config, "--run-id", "r1", "--samples", 2) == 0
    run_dir = out_root / "r1"
    first = {p: p.read_bytes() for p in [run_dir / "summary.csv", *sorted((run_dir / "traces").iterdir())]}

    assert run("attack", "--config", run_dir / "resolved-config.toml", "--samples", 2) == 0
    assert {p: p.read_bytes() for p in first} == first


def test_attack_compare_penalty_writes_each_cohort(config, out_root):
    assert run("attack", "--config", config, "--run-id", "c1", "--samples", 1, "--compare-penalty", "1,4", "2,2") == 0
    run_dir = out_root / "c1"
    assert (run_dir / "summary.csv").exists()
    assert (run_dir / "summary-penalty-1x4.csv").exists()
    trace = read_csv_rows(run_dir / "traces" / "penalty-2x2" / "penalty-sample-00000.csv")
    assert len(trace) == 4
    report = read_key_value_report(run_dir / "report.txt")
    assert "penalty-2x2.asr" in report


def test_augment_appends_a_ledger_row(config, out_root):
    assert run("augment", "--config", config, "--run-id", "g1", "--augmentation", "gaussian") == 0
    rows = read_csv_rows(out_root / AUGMENT_LEDGER)
    assert len(rows) == 1
    assert rows[0]["run_id"] == "g1" and rows[0]["method"] == "gaussian"
    assert rows[0]["augmented_samples"] == "16"
    assert rows[0]["asr"] == ""


def test_mine_uae_augmentation_reports_asr(config, out_root):
    assert run("augment", "--config", config, "--run-id", "u1") == 0
    row = read_csv_rows(out_root / AUGMENT_LEDGER)[0]
    assert 0.0 <= float(row["asr"]) <= 1.0
    assert row["retrain_epochs"] == "2"


def test_mine_calibrate_reports_estimates(config, out_root):
    assert run("mine-calibrate", "--config", config, "--run-id", "m1") == 0
    report = read_key_value_report(out_root / "m1" / "report.txt")
    assert "median_estimate" in report
    assert sum(key.startswith("estimate.seed_") for key in report) == 2


def test_mine_calibrate_k_ablation_writes_one_row_per_k(config, out_root):
    argv = ("mine-calibrate", "--config", config, "--run-id", "k1", "--k-ablation", "--ks", 4, 8, 12)
    assert run(*argv, "--ablation-steps", 2, "--ablation-repeats", 2) == 0
    rows = read_csv_rows(out_root / "k1" / "k-ablation.csv")
    assert [row["k"] for row in rows] == ["4", "8", "12"]
    assert all(float(row["std_mi"]) >= 0.0 and row["seconds"] == "0" for row in rows)


def test_mine_calibrate_stationarity_reports_the_horizons(config, out_root):
    assert run("mine-calibrate", "--config", config, "--run-id", "s1", "--stationarity", "--stationarity-seeds", 2, "--horizons", 3, 8) == 0
    rows = read_csv_rows(out_root / "s1" / "stationarity.csv")
    assert [row["seed"] for row in rows] == ["0", "1"]
    assert all(float(row["prefix_min_long"]) <= float(row["prefix_min_short"]) for row in rows)
    report = read_key_value_report(out_root / "s1" / "report.txt")
    assert report["stationarity.monotone"] == "1"
    assert report["stationarity.long_horizon"] == "8"
    assert "median_estimate" in report


def test_mine_calibrate_rejects_bad_diagnostic_arguments(config):
    assert run("mine-calibrate", "--config", config, "--stationarity", "--horizons", 8, 3) == 1
    assert run("mine-calibrate", "--config", config, "--k-ablation", "--ablation-sample", 99) == 1


def test_report_lists_every_run(config, out_root, capsys):
    assert run("attack", "--config", config, "--run-id", "first", "--samples", 1) == 0
    assert run("attack", "--config", config, "--run-id", "second", "--samples", 1) == 0
    capsys.readouterr()
    assert run("report", "--config", config) == 0
    printed = capsys.readouterr().out
    assert "first:minmax" in printed and "second:minmax" in printed
    assert (out_root / "report.txt").exists()


def test_report_without_ledgers_fails(config):
    assert run("report", "--config", config) == 1


def test_usage_and_library_errors_map_to_exit_codes(config, tmp_path):
    assert run("explode") == 2
    assert run("attack", "--config", tmp_path / "missing.toml") == 1
    assert run("attack", "--config", config, "--sample", 99) == 1
    assert run("augment", "--config", config, "--augmentation", "mixup") == 2
