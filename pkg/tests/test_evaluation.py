"""Tests for error metrics, forecast averaging, and the holdout harness."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ratecast.arima import ArimaOrder, arima_fit
from ratecast.errors import AlignmentError, DataError
from ratecast.evaluation import (
    MODEL_IDS,
    EvaluationReport,
    ModelRow,
    average_forecast,
    describe_arima_params,
    evaluate_models,
    fit_models,
    forecast_models,
    format_param,
    mae,
    mape_percent,
    rmse,
)
from ratecast.series import Forecast, TimeSeries, split_at

# ---------------------------------------------------------------------------
# metrics: hand-computable examples


def test_rmse_hand_examples():
    assert rmse([2.0, 4.0], [1.0, 3.0]) == pytest.approx(1.0)
    # errors (0,0,0,4): sqrt(16/4) = 2
    assert rmse([0.0, 0.0, 0.0, 4.0], [0.0, 0.0, 0.0, 0.0]) == pytest.approx(2.0)
    assert rmse([5.0], [5.0]) == 0.0


def test_mae_hand_examples():
    assert mae([2.0, 4.0], [1.0, 3.0]) == pytest.approx(1.0)
    assert mae([0.0, 0.0, 0.0, 4.0], [0.0, 0.0, 0.0, 0.0]) == pytest.approx(1.0)
    assert mae([1.0, -1.0], [-1.0, 1.0]) == pytest.approx(2.0)


def test_mape_hand_examples():
    # |1|/2 and |1|/4 average to 0.375
    assert mape_percent([2.0, 4.0], [1.0, 3.0]) == pytest.approx(37.5)
    assert mape_percent([10.0], [11.0]) == pytest.approx(10.0)


def test_mape_zero_actual_names_index():
    with pytest.raises(DataError, match="index 1"):
        mape_percent([3.0, 0.0, 2.0], [1.0, 1.0, 1.0])


def test_metric_alignment_errors():
    with pytest.raises(AlignmentError):
        rmse([1.0, 2.0], [1.0])
    with pytest.raises(AlignmentError):
        mae([], [])
    with pytest.raises(AlignmentError):
        mape_percent([[1.0]], [[1.0]])


@given(
    st.lists(st.floats(-100, 100), min_size=1, max_size=30),
    st.integers(min_value=0, max_value=2**32 - 1),
)
def test_rmse_at_least_mae(actual, seed):
    rng = np.random.default_rng(seed)
    predicted = np.asarray(actual) + rng.normal(size=len(actual))
    assert rmse(actual, predicted) >= mae(actual, predicted) - 1e-12


# ---------------------------------------------------------------------------
# forecast averaging


def test_average_forecast_hand_example():
    a = Forecast(first_year=2013, values=(10.0, 8.0), source="hdes")
    b = Forecast(first_year=2013, values=(12.0, 10.0), source="arima")
    avg = average_forecast(a, b)
    assert avg.values == (11.0, 9.0)
    assert avg.first_year == 2013
    assert "hdes" in avg.source and "arima" in avg.source


def test_average_forecast_idempotent():
    f = Forecast(first_year=2013, values=(3.0, 4.5, 6.0), source="x")
    avg = average_forecast(f, f)
    assert avg.values == f.values


def test_average_forecast_alignment_errors():
    a = Forecast(first_year=2013, values=(1.0, 2.0), source="a")
    with pytest.raises(AlignmentError):
        average_forecast(a, Forecast(first_year=2014, values=(1.0, 2.0), source="b"))
    with pytest.raises(AlignmentError):
        average_forecast(a, Forecast(first_year=2013, values=(1.0,), source="b"))


@given(
    st.lists(st.floats(-50, 50), min_size=1, max_size=20),
    st.integers(min_value=0, max_value=2**32 - 1),
)
@settings(max_examples=50)
def test_average_error_no_worse_than_mean_of_errors(actual, seed):
    """Averaging is convex, so its RMSE/MAE sit below the mean of the parents'."""
    rng = np.random.default_rng(seed)
    n = len(actual)
    fa = Forecast(1, tuple(np.asarray(actual) + rng.normal(size=n)), "a")
    fb = Forecast(1, tuple(np.asarray(actual) + rng.normal(size=n)), "b")
    avg = average_forecast(fa, fb)
    for metric in (rmse, mae):
        ma_, mb = metric(actual, fa.values), metric(actual, fb.values)
        assert metric(actual, avg.values) <= 0.5 * (ma_ + mb) + 1e-9


# ---------------------------------------------------------------------------
# table rows and parameter formatting


def test_model_row_validation():
    with pytest.raises(ValueError):
        ModelRow("ses", "SES", "alpha=0.50", rmse=1.0, mae=2.0, mape_percent=5.0)
    with pytest.raises(ValueError):
        ModelRow("ses", "SES", "alpha=0.50", rmse=-1.0, mae=0.5, mape_percent=5.0)
    with pytest.raises(ValueError):
        ModelRow("ses", "SES", "alpha=0.50", rmse=np.nan, mae=0.5, mape_percent=5.0)
    row = ModelRow("ses", "SES", "alpha=0.50", rmse=2.0, mae=1.5, mape_percent=5.0)
    assert row.rmse == 2.0


def test_format_param_two_decimals():
    assert format_param(0.5221) == "0.52"
    assert format_param(0.87) == "0.87"
    assert format_param(-0.53) == "-0.53"


def test_format_param_keeps_three_near_collapse():
    # values that would print as 0.00 or 1.00 keep a third decimal
    assert format_param(0.999) == "0.999"
    assert format_param(0.001) == "0.001"
    assert format_param(0.998) == "0.998"
    assert format_param(-0.004) == "-0.004"


def test_format_param_exact_zero_and_one():
    assert format_param(0.0) == "0.00"
    assert format_param(1.0) == "1.00"
    assert format_param(-1.0) == "-1.00"


def test_describe_arima_params():
    rng = np.random.default_rng(5)
    s = TimeSeries(2000, tuple(rng.normal(size=60)))
    flat = arima_fit(s, ArimaOrder(0, 0, 0))
    assert describe_arima_params(flat) == "no parameters"
    with_c = arima_fit(s, ArimaOrder(1, 0, 0), include_constant=True)
    desc = describe_arima_params(with_c)
    assert desc.startswith("c=")
    assert "phi_1=" in desc
    mixed = arima_fit(s, ArimaOrder(1, 0, 1))
    desc = describe_arima_params(mixed)
    assert "phi_1=" in desc and "theta_1=" in desc


# ---------------------------------------------------------------------------
# fitting harness


def _trend_series(n=40, seed=3, start=1975):
    rng = np.random.default_rng(seed)
    values = 50.0 - 0.8 * np.arange(n) + rng.normal(scale=1.2, size=n)
    return TimeSeries(start, tuple(values))


def test_fit_models_rejects_bad_ids():
    s = _trend_series()
    with pytest.raises(DataError, match="unknown model"):
        fit_models(s, models=("ses", "prophet"))
    with pytest.raises(DataError, match="no models"):
        fit_models(s, models=())


def test_fit_models_ensemble_pulls_in_parents():
    s = _trend_series()
    fitted = fit_models(s, models=("ensemble",), p_max=1, q_max=1)
    assert fitted.arima is not None
    assert fitted.hdes is not None
    assert fitted.ses is None
    forecasts = forecast_models(fitted, horizon=5)
    assert set(forecasts) == {"arima", "hdes", "ensemble"}


def test_fit_models_records_failures_for_short_series():
    # 3 points: SES fits, Holt and the ARIMA search cannot
    s = TimeSeries(2000, (10.0, 11.0, 12.0))
    fitted = fit_models(s)
    assert fitted.ses is not None
    assert fitted.hdes is None
    assert fitted.arima is None
    failed = {name for name, _ in fitted.failures}
    assert {"arima", "hdes", "ensemble"} <= failed
    for _, reason in fitted.failures:
        assert reason  # every failure carries a reason string


def test_fix_d_is_honored():
    s = _trend_series()
    fitted = fit_models(s, models=("arima",), fix_d=2, p_max=1, q_max=1)
    assert fitted.arima.order.d == 2
    assert fitted.d_decision is None  # no unit-root loop when pinned


def test_forecast_models_skips_missing_ensemble_parent():
    s = _trend_series()
    fitted = fit_models(s, models=("ses",))
    forecasts = forecast_models(fitted, horizon=4)
    assert set(forecasts) == {"ses"}


# ---------------------------------------------------------------------------
# end-to-end evaluation


def test_evaluate_models_row_order_fixed():
    train, test = split_at(_trend_series(n=46), 2012)
    report = evaluate_models(
        train, test, models=("hdes", "arima", "ses", "ensemble"), p_max=1, q_max=1
    )
    assert [r.model for r in report.rows] == list(MODEL_IDS)
    assert report.test_span == (2013, 2020)
    assert report.failures == ()


def test_evaluate_models_subset():
    train, test = split_at(_trend_series(n=46), 2012)
    report = evaluate_models(train, test, models=("ses",))
    assert [r.model for r in report.rows] == ["ses"]
    assert report.rows[0].label == "SES"
    assert report.rows[0].params.startswith("alpha=")


def test_evaluate_models_alignment_guard():
    train, _ = split_at(_trend_series(n=46), 2012)
    bad_test = TimeSeries(2015, (40.0, 39.0, 38.0, 37.0))
    with pytest.raises(AlignmentError):
        evaluate_models(train, bad_test)


def test_linear_series_gives_zero_error_for_trend_models():
    s = TimeSeries(1990, tuple(100.0 - 1.5 * np.arange(30)))
    train, test = split_at(s, 2012)
    report = evaluate_models(train, test)
    by_model = {r.model: r for r in report.rows}
    # Holt and a d=2 ARIMA both extend the line exactly
    assert by_model["hdes"].rmse == pytest.approx(0.0, abs=1e-8)
    assert by_model["arima"].rmse == pytest.approx(0.0, abs=1e-6)
    assert by_model["ensemble"].rmse == pytest.approx(0.0, abs=1e-6)
    # a flat SES forecast cannot track the slope
    assert by_model["ses"].rmse > 1.0


def test_constant_series_all_models_exact():
    s = TimeSeries(1990, (25.0,) * 28)
    train, test = split_at(s, 2012)
    report = evaluate_models(train, test)
    assert report.failures == ()
    for row in report.rows:
        assert row.rmse == pytest.approx(0.0, abs=1e-9)
        assert row.mape_percent == pytest.approx(0.0, abs=1e-9)


def test_evaluation_is_deterministic():
    train, test = split_at(_trend_series(n=46), 2012)
    r1 = evaluate_models(train, test, p_max=1, q_max=1)
    r2 = evaluate_models(train, test, p_max=1, q_max=1)
    assert r1 == r2  # frozen dataclasses compare by value


def test_fits_ignore_test_span():
    """Perturbing the holdout data must not change any fitted parameter."""
    base = _trend_series(n=46)
    train, test = split_at(base, 2012)
    rng = np.random.default_rng(11)
    bumped = TimeSeries(
        test.start_year, tuple(np.asarray(test.values) + rng.normal(size=len(test)))
    )
    f1 = fit_models(train, p_max=1, q_max=1)
    f2 = fit_models(train, p_max=1, q_max=1)
    assert f1.ses.alpha == f2.ses.alpha
    r1 = evaluate_models(train, test, p_max=1, q_max=1)
    r2 = evaluate_models(train, bumped, p_max=1, q_max=1)
    p1 = {row.model: row.params for row in r1.rows}
    p2 = {row.model: row.params for row in r2.rows}
    assert p1 == p2


def test_report_failures_do_not_abort_other_rows():
    # actual values include a zero, so MAPE is undefined for every model,
    # but fitting succeeded; rows drop with reasons rather than crashing
    values = tuple(np.linspace(10.0, 0.0, 30))  # hits zero at the end
    s = TimeSeries(1990, values)
    train, test = split_at(s, 2012)
    report = evaluate_models(train, test, models=("ses",))
    assert report.rows == ()
    assert len(report.failures) == 1
    name, reason = report.failures[0]
    assert name == "ses"
    assert "mape undefined" in reason


def test_evaluation_report_is_frozen():
    report = EvaluationReport(rows=(), test_span=(2013, 2021))
    with pytest.raises(AttributeError):
        report.rows = ()
