"""Tests for the SVG chart renderers."""

import xml.dom.minidom

import numpy as np
import pytest

from ratecast.errors import PlotError
from ratecast.plots import (
    LineSpec,
    render_fitted_vs_observed,
    render_forecast,
    render_observed,
    render_residual_panel,
    render_year_lines,
)
from ratecast.series import Forecast, TimeSeries


def _series(n=30, seed=0, start=1990):
    rng = np.random.default_rng(seed)
    return TimeSeries(start, tuple(50.0 + np.cumsum(rng.normal(size=n))))


def _assert_valid_svg(svg: str):
    assert svg.startswith("<svg")
    assert svg.rstrip().endswith("</svg>")
    xml.dom.minidom.parseString(svg)  # well-formed
    assert "nan" not in svg.lower().replace("tspan", "")
    assert "http" not in svg.replace("http://www.w3.org/2000/svg", "")


def test_observed_basic():
    svg = render_observed(_series())
    _assert_valid_svg(svg)
    assert svg.count("<polyline") == 1
    assert "1990" in svg  # year-labeled axis


def test_observed_two_points_minimal():
    svg = render_observed(TimeSeries(2000, (3.0, 4.0)))
    _assert_valid_svg(svg)
    assert "<polyline" in svg


def test_observed_single_point_rejected():
    with pytest.raises(PlotError, match="at least 2"):
        render_observed(TimeSeries(2000, (3.0,)))


def test_constant_series_renders():
    svg = render_observed(TimeSeries(2000, (5.0,) * 10))
    _assert_valid_svg(svg)


def test_rerender_byte_identical():
    s = _series(seed=7)
    assert render_observed(s) == render_observed(s)


def test_forecast_shades_future_region():
    s = _series(n=20, start=2002)  # ends 2021
    fc = {"ensemble": Forecast(2022, tuple(40.0 - np.arange(9.0)), "e")}
    svg = render_forecast(s, fc, labels={"ensemble": "HDES-ARIMA"})
    _assert_valid_svg(svg)
    assert "fill-opacity='0.25'" in svg  # shaded band
    assert "2030" in svg  # axis reaches the horizon end
    assert "HDES-ARIMA" in svg


def test_forecast_requires_some_forecast():
    with pytest.raises(PlotError, match="no forecasts"):
        render_forecast(_series(), {})


def test_forecast_color_stability():
    s = _series(n=20, start=2002)
    fc = {
        "arima": Forecast(2022, tuple(40.0 - np.arange(5.0)), "a"),
        "hdes": Forecast(2022, tuple(41.0 - np.arange(5.0)), "h"),
    }
    one = render_forecast(s, fc)
    two = render_forecast(s, dict(reversed(list(fc.items()))))
    assert one == two  # dict order does not leak into the output


def test_fitted_vs_observed_has_split_marker():
    s = _series(n=30, start=1990)
    fit = [LineSpec("HDES", 1992, tuple(np.asarray(s.values[2:]) + 0.5), "#d62728")]
    svg = render_fitted_vs_observed(s, fit, split_year=2012)
    _assert_valid_svg(svg)
    assert "stroke-dasharray" in svg  # split line and/or dashed fits
    assert svg.count("<polyline") == 2


def test_residual_panel_structure():
    rng = np.random.default_rng(3)
    res = rng.normal(size=36)
    svg = render_residual_panel(res, 1977, "HDES residual diagnostics")
    _assert_valid_svg(svg)
    assert svg.count("<g transform") == 3  # series, ACF, Q-Q
    assert svg.count("<circle") == 36  # one Q-Q dot per residual
    assert "Residual ACF" in svg and "Normal Q-Q" in svg


def test_residual_panel_minimal_length():
    with pytest.raises(PlotError):
        render_residual_panel([0.5], 2000, "x")
    svg = render_residual_panel([0.5, -0.5, 0.25, 0.1], 2000, "x")
    _assert_valid_svg(svg)


def test_year_lines_needs_specs():
    with pytest.raises(PlotError, match="nothing to plot"):
        render_year_lines([], "empty")


def test_year_axis_tick_labels_are_years():
    svg = render_observed(TimeSeries(1975, tuple(float(i) for i in range(1, 48))))
    # a decade-step axis over 1975-2021
    assert "1980" in svg and "2020" in svg
