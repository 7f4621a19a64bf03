"""Tests for report rendering and the key-value results format."""

import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ratecast.diagnostics import TestResult
from ratecast.evaluation import EvaluationReport, ModelRow
from ratecast.reporting import (
    ResidualDiagnostics,
    format_kv,
    greek_params,
    parse_kv,
    render_report,
    write_text_atomic,
)
from ratecast.series import Forecast, TimeSeries


def test_greek_params_translation():
    assert greek_params("alpha=0.52, beta=0.52") == "α = 0.52, β = 0.52"
    assert greek_params("theta_1=-0.63, theta_2=-0.17") == (
        "θ1 = -0.63, θ2 = -0.17"
    )
    assert greek_params("c=41.97, phi_1=0.88") == "c = 41.97, φ1 = 0.88"
    assert greek_params("no parameters") == "no parameters"
    assert greek_params("mean of HDES and ARIMA forecasts") == (
        "mean of HDES and ARIMA forecasts"
    )


def _toy_report():
    rows = (
        ModelRow("arima", "ARIMA (0,2,2)", "theta_1=-0.63, theta_2=-0.17",
                 2.56, 2.16, 6.29),
        ModelRow("hdes", "HDES", "alpha=0.52, beta=0.52", 2.56, 2.16, 6.28),
    )
    return EvaluationReport(rows=rows, test_span=(2013, 2021))


def test_render_report_table_shape():
    observed = TimeSeries(1975, tuple(float(40 + i) for i in range(47)))
    train = TimeSeries(1975, observed.values[:38])
    test = TimeSeries(2013, observed.values[38:])
    md = render_report(
        source_label="rates.csv",
        observed=observed,
        train=train,
        test=test,
        evaluation=_toy_report(),
    )
    assert "| Model | Parameter Estimates | RMSE | MAE | MAPE |" in md
    assert "| HDES | α = 0.52, β = 0.52 | 2.56 | 2.16 | 6.28 |" in md
    assert "| ARIMA (0,2,2) | θ1 = -0.63, θ2 = -0.17 | 2.56 | 2.16 | 6.29 |" in md
    assert "Training span: 1975-2012 (38 points)" in md


def test_render_report_empty_rows_still_has_header():
    observed = TimeSeries(2000, (1.0, 2.0, 3.0, 4.0))
    md = render_report(
        source_label="x.csv",
        observed=observed,
        train=TimeSeries(2000, (1.0, 2.0, 3.0)),
        test=TimeSeries(2003, (4.0,)),
        evaluation=EvaluationReport(rows=(), test_span=(2003, 2003)),
    )
    assert "| Model | Parameter Estimates | RMSE | MAE | MAPE |" in md


def test_render_report_diagnostics_and_forecast_sections():
    observed = TimeSeries(2000, tuple(float(i + 1) for i in range(12)))
    diag = ResidualDiagnostics(
        model="arima",
        label="ARIMA (0,2,2)",
        ljung_box=TestResult("ljung_box", 4.2, 0.4693, lags_used=7, df=5),
        shapiro=TestResult("shapiro_wilk", 0.97, 0.1206, lags_used=0),
        kpss=TestResult("kpss", 0.11, 0.1, lags_used=3, p_bound="ge"),
    )
    fc = {"ensemble": Forecast(2012, (9.0, 8.0), "he")}
    md = render_report(
        source_label="x.csv",
        observed=observed,
        train=TimeSeries(2000, observed.values[:10]),
        test=TimeSeries(2010, observed.values[10:]),
        evaluation=EvaluationReport(rows=(), test_span=(2010, 2011)),
        diagnostics=(diag,),
        forecasts=fc,
        forecast_labels={"ensemble": "HDES-ARIMA"},
    )
    assert "| ARIMA (0,2,2) | 0.4693 | 0.1206 | >= 0.1 |" in md
    assert "## Forecast (2012-2013)" in md
    assert "| 2012 | 9.00 |" in md
    assert "HDES-ARIMA" in md


def test_render_report_lists_failures():
    observed = TimeSeries(2000, (1.0, 2.0, 3.0, 4.0))
    md = render_report(
        source_label="x.csv",
        observed=observed,
        train=TimeSeries(2000, (1.0, 2.0, 3.0)),
        test=TimeSeries(2003, (4.0,)),
        evaluation=EvaluationReport(
            rows=(), test_span=(2003, 2003),
            failures=(("hdes", "SeriesLengthError: holt fit needs at least 4"),),
        ),
    )
    assert "## Failures" in md
    assert "- hdes: SeriesLengthError" in md


def test_report_is_deterministic():
    observed = TimeSeries(2000, tuple(float(i + 1) for i in range(6)))
    kwargs = dict(
        source_label="x.csv",
        observed=observed,
        train=TimeSeries(2000, observed.values[:4]),
        test=TimeSeries(2004, observed.values[4:]),
        evaluation=_toy_report(),
    )
    assert render_report(**kwargs) == render_report(**kwargs)


# ------------------------------------------------------------- kv round trip


def test_kv_round_trip_hand_example():
    entries = {
        "arima.order": (0, 2, 2),
        "arima.theta_1": -0.6321987654321,
        "metrics.arima.rmse": 2.5605123456789012,
        "run.models": "arima, ses",
        "run.train_end": 2012,
        "search.converged": True,
    }
    text = format_kv(entries)
    back = parse_kv(text)
    assert back["arima.order"] == (0, 2, 2)
    assert back["arima.theta_1"] == entries["arima.theta_1"]  # exact
    assert back["metrics.arima.rmse"] == entries["metrics.arima.rmse"]
    assert back["run.train_end"] == 2012
    assert back["search.converged"] is True


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_kv_float_exact_round_trip(x):
    back = parse_kv(format_kv({"v": x}))
    assert back["v"] == x


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=8))
def test_kv_float_array_round_trip(xs):
    back = parse_kv(format_kv({"v": tuple(xs)}))
    assert back["v"] == tuple(xs)


def test_kv_strings_with_commas_stay_strings():
    text = format_kv({"label": "ARIMA (0,2,2)"})
    back = parse_kv(text)
    assert back["label"] == "ARIMA (0,2,2)"


def test_kv_singleton_array_round_trip():
    back = parse_kv(format_kv({"v": (2.5,)}))
    assert back["v"] == (2.5,)


def test_kv_rejects_bad_keys_and_newlines():
    with pytest.raises(ValueError, match="invalid results key"):
        format_kv({"bad key": 1})
    with pytest.raises(ValueError, match="newline"):
        format_kv({"k": "a\nb"})
    with pytest.raises(ValueError, match="empty sequence"):
        format_kv({"k": ()})


def test_kv_parse_skips_comments_and_blanks():
    back = parse_kv("# comment\n\nk = 3\n")
    assert back == {"k": 3}


def test_kv_parse_rejects_malformed_line():
    with pytest.raises(ValueError, match="line 1"):
        parse_kv("novalue\n")


# ------------------------------------------------------------- atomic write


def test_write_text_atomic_basic(tmp_path):
    p = tmp_path / "out.md"
    write_text_atomic(p, "hello\n")
    assert p.read_text() == "hello\n"
    write_text_atomic(p, "replaced\n")
    assert p.read_text() == "replaced\n"
    assert [f.name for f in tmp_path.iterdir()] == ["out.md"]  # no temp left


def test_write_text_atomic_unwritable_dir_leaves_nothing(tmp_path):
    target = tmp_path / "sub" / "out.md"
    with pytest.raises(OSError):
        write_text_atomic(target, "x")  # parent does not exist
    assert not target.exists()


def test_write_text_atomic_no_partial_on_failure(tmp_path):
    p = tmp_path / "out.kv"
    write_text_atomic(p, "original = 1\n")
    blocker = tmp_path / "ro"
    blocker.write_text("a file, not a directory")
    with pytest.raises(OSError):
        write_text_atomic(blocker / "out.kv", "x = 2\n")
    assert p.read_text() == "original = 1\n"
