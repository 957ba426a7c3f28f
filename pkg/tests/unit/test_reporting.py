"""
Unit tests for reporting.

This module contains tests for the ledger tables and the MI-trace figure.
"""
import math
from unittest.mock import patch

import numpy as np
import pytest

from src.attacks.types import AttackResult, TraceRow
from src.persistence.results import ATTACK_LEDGER, ATTACK_LEDGER_HEADER, AUGMENT_LEDGER, append_ledger_row
from src.reporting.tables import ATTACK_COLUMNS, build_report, render_table
from src.reporting.visualization import best_curves, cohort_statistics, plot_mi_traces


def traced(bests):
    """Create an attack result whose trace carries the given best-so-far values."""
    rows = [TraceRow(t, 0.0, 0.0, 0.0, 0.0, best) for t, best in enumerate(bests, start=1)]
    success = any(math.isfinite(b) for b in bests)
    return AttackResult(np.zeros(1) if success else None, max(bests), None, success, trace=rows, iterations=len(rows))


def test_render_table_formats_cells():
    """Test that rates become percentages and missing values a dash."""
    rows = [{"run_id": "r1", "method": "minmax", "similarity": "mine", "samples": "10", "asr": "0.25", "mean_best_mi": ""}]
    table = render_table(rows, ATTACK_COLUMNS, "Attacks").splitlines()
    assert table[0] == "Attacks"
    assert table[1].split() == ["run", "method", "similarity", "n", "ASR", "MI"]
    assert set(table[2].replace(" ", "")) == {"-"}
    assert table[3].split() == ["r1", "minmax", "mine", "10", "25.00%", "-"]


def test_build_report_without_ledgers_is_empty(tmp_path):
    """Test report generation over an empty output root."""
    assert build_report(tmp_path) == ""


def test_build_report_lists_every_run(tmp_path):
    """Test that each ledger row appears in the report."""
    for run_id in ("run-a", "run-b"):
        append_ledger_row(tmp_path / ATTACK_LEDGER, ATTACK_LEDGER_HEADER, {"run_id": run_id, "method": "minmax", "samples": 2, "asr": 0.5})
    report = build_report(tmp_path)
    assert "run-a" in report and "run-b" in report
    assert "50.00%" in report
    assert "reconstruction error" not in report
    assert not (tmp_path / AUGMENT_LEDGER).exists()


def test_best_curves_pad_and_mark_pre_success():
    """Test stacking of traces of different lengths."""
    curves = best_curves([traced([-math.inf, -0.5, -0.2]), traced([-0.4])])
    assert curves.shape == (2, 3)
    assert math.isnan(curves[0, 0])
    np.testing.assert_array_equal(curves[1], [-0.4, -0.4, -0.4])


def test_cohort_statistics_skip_unsuccessful_samples():
    mean, std = cohort_statistics([traced([-math.inf, -0.5]), traced([-0.3, -0.1])])
    assert mean[0] == pytest.approx(-0.3) and std[0] == 0.0
    assert mean[1] == pytest.approx(-0.3) and std[1] == pytest.approx(0.2)
    empty_mean, _ = cohort_statistics([])
    assert empty_mean.size == 0


def test_plot_mi_traces_writes_png(tmp_path):
    """Test that the figure is written for each cohort."""
    path = plot_mi_traces({"minmax": [traced([-0.5, -0.2])], "penalty": [traced([-math.inf, -0.6])]}, tmp_path / "fig" / "mi.png")
    assert path.exists()
    assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_plot_mi_traces_skips_empty_cohorts(tmp_path):
    """Test that empty cohorts draw nothing."""
    with patch("src.reporting.visualization.plt.plot") as plot:
        plot_mi_traces({"empty": [], "minmax": [traced([-0.5])]}, tmp_path / "mi.png")
    assert plot.call_count == 1
