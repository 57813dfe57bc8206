"""Tests for SVG emission from result CSVs."""

import pandas as pd
import pytest

from cdkit.errors import ConfigError
from cdkit.plotting import emit_plot


@pytest.fixture
def results_csv(tmp_path):
    path = tmp_path / "results.csv"
    pd.DataFrame({
        "epsilon": [0.3, 0.1, 0.03, 0.01],
        "gate_count": [120, 480, 2100, 0],
        "error": ["", "", "", "GaplessError: closed"],
    }).to_csv(path, index=False)
    return path


def test_writes_svg(results_csv, tmp_path):
    out = emit_plot(results_csv, "epsilon", "gate_count", tmp_path / "plots" / "cost.svg")
    assert out.exists()
    assert out.read_text().lstrip().startswith("<?xml")


def test_output_is_deterministic(results_csv, tmp_path):
    first = emit_plot(results_csv, "epsilon", "gate_count", tmp_path / "a.svg", title="cost")
    second = emit_plot(results_csv, "epsilon", "gate_count", tmp_path / "b.svg", title="cost")
    assert first.read_bytes() == second.read_bytes()


def test_linear_axes_keep_zero_rows(results_csv, tmp_path):
    out = emit_plot(results_csv, "epsilon", "gate_count", tmp_path / "lin.svg", logx=False, logy=False)
    assert out.exists()


def test_missing_column(results_csv, tmp_path):
    out = tmp_path / "never.svg"
    with pytest.raises(ConfigError, match="inverse_gap"):
        emit_plot(results_csv, "inverse_gap", "gate_count", out)
    assert not out.exists()


def test_empty_csv(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(ConfigError, match="empty"):
        emit_plot(path, "epsilon", "gate_count", tmp_path / "x.svg")


def test_missing_csv(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        emit_plot(tmp_path / "absent.csv", "epsilon", "gate_count", tmp_path / "x.svg")


def test_nothing_plottable(tmp_path):
    path = tmp_path / "results.csv"
    pd.DataFrame({"epsilon": [0.1, 0.2], "gate_count": [0, -1]}).to_csv(path, index=False)
    with pytest.raises(ConfigError, match="No plottable rows"):
        emit_plot(path, "epsilon", "gate_count", tmp_path / "x.svg")
