"""Exponential smoothing fits, refinement, and forecast structure."""

import numpy as np
import pytest

from hypothesis import given, settings
import hypothesis.strategies as st

from ratecast.errors import SeriesLengthError
from ratecast.series import TimeSeries
from ratecast.smoothing import (
    HdesFit,
    SesFit,
    hdes_fit,
    hdes_fit_at,
    hdes_forecast,
    ses_fit,
    ses_fit_at,
    ses_forecast,
)


def series_of(values, start_year=2000):
    return TimeSeries(start_year=start_year, values=tuple(values))


# ------------------------------------------------------------------- SES


def test_ses_hand_trace_at_half():
    # level seeds at 1; observing 2 gives error 1.0 and level 1.5;
    # observing 3 gives error 1.5 and level 2.25.
    fit = ses_fit_at(series_of([1, 2, 3]), 0.5)
    np.testing.assert_allclose(fit.residuals, (0.0, 1.0, 1.5), atol=1e-12)
    assert abs(fit.sse - 3.25) < 1e-12
    assert abs(fit.final_level - 2.25) < 1e-12


def test_ses_constant_series_tie_break():
    fit = ses_fit(series_of([5, 5, 5, 5, 5]))
    assert fit.sse == 0.0
    assert fit.alpha == 0.001
    np.testing.assert_array_equal(ses_forecast(fit, 5).values, (5.0,) * 5)


def test_ses_residual_length_and_leading_zero():
    rng = np.random.default_rng(2)
    s = series_of(rng.uniform(10, 20, size=15))
    fit = ses_fit(s)
    assert len(fit.residuals) == len(s)
    assert fit.residuals[0] == 0.0
    assert fit.structural_zeros == 1


def test_ses_alpha_near_one_tracks_last_value():
    rng = np.random.default_rng(3)
    s = series_of(rng.uniform(-50, 50, size=30))
    fit = ses_fit_at(s, 0.999)
    bound = 0.001 * np.max(np.abs(s.to_array())) * len(s)
    assert abs(fit.final_level - s.values[-1]) <= bound


def test_ses_forecast_flat():
    fit = SesFit(alpha=0.3, final_level=31.7, residuals=(0.0,), sse=0.0, train_end_year=2012)
    fc = ses_forecast(fit, 3)
    np.testing.assert_array_equal(fc.values, (31.7, 31.7, 31.7))
    assert fc.first_year == 2013
    assert fc.years == (2013, 2014, 2015)
    assert ses_forecast(fit, 1).values[0] == ses_forecast(fit, 9).values[0]


def test_ses_near_random_walk_pushes_alpha_high():
    # A random walk's best one-step predictor is the last observation.
    rng = np.random.default_rng(8)
    s = series_of(50 + np.cumsum(rng.normal(size=60)))
    fit = ses_fit(s)
    assert fit.alpha > 0.9


def test_ses_too_short_rejected():
    with pytest.raises(SeriesLengthError):
        ses_fit(series_of([1, 2]))


def test_ses_refinement_beats_or_matches_grid():
    rng = np.random.default_rng(5)
    s = series_of(20 + rng.normal(size=40).cumsum() + 0.3 * rng.normal(size=40))
    fit = ses_fit(s)
    for a in np.round(np.linspace(0.001, 0.999, 25), 3):
        assert fit.sse <= ses_fit_at(s, float(a)).sse + 1e-12


def test_ses_deterministic_across_runs():
    rng = np.random.default_rng(6)
    s = series_of(rng.uniform(0, 10, size=25))
    f1, f2 = ses_fit(s), ses_fit(s)
    assert f1.alpha == f2.alpha and f1.sse == f2.sse


def test_ses_alpha_bounds_enforced():
    with pytest.raises(ValueError):
        SesFit(alpha=1.0, final_level=0.0, residuals=(0.0,), sse=0.0, train_end_year=2000)


# ------------------------------------------------------------------ HDES


def test_hdes_hand_trace_at_half():
    # seeds: level 1, trend 1. y_2 is predicted exactly; y_3 = 4 is
    # predicted as 3, so the only nonzero residual is 1.
    fit = hdes_fit_at(series_of([1, 2, 4]), 0.5, 0.5)
    np.testing.assert_allclose(fit.residuals, (0.0, 0.0, 1.0), atol=1e-12)
    assert abs(fit.final_level - 3.5) < 1e-12
    assert abs(fit.final_trend - 1.25) < 1e-12
    assert abs(fit.sse - 1.0) < 1e-12


def test_hdes_linear_series_is_fixed_point():
    t = np.arange(1, 21)
    s = series_of(3.0 + 2.0 * t)
    for a, b in ((0.01, 0.01), (0.2, 0.8), (0.5, 0.5), (0.99, 0.99)):
        fit = hdes_fit_at(s, a, b)
        np.testing.assert_allclose(fit.residuals[2:], 0.0, atol=1e-9)
        assert abs(fit.final_trend - 2.0) < 1e-9
    fit = hdes_fit(s)
    assert fit.sse < 1e-12
    fc = hdes_forecast(fit, 4)
    np.testing.assert_allclose(fc.values, 3.0 + 2.0 * np.arange(21, 25), atol=1e-6)


def test_hdes_forecast_affine():
    fit = HdesFit(
        alpha=0.5, beta=0.5, final_level=30.0, final_trend=-1.2,
        residuals=(0.0,), sse=0.0, train_end_year=2012,
    )
    fc = hdes_forecast(fit, 3)
    np.testing.assert_allclose(fc.values, (28.8, 27.6, 26.4), atol=1e-12)
    assert fc.first_year == 2013


def test_hdes_zero_trend_matches_flat_forecast():
    fit = HdesFit(
        alpha=0.4, beta=0.3, final_level=12.5, final_trend=0.0,
        residuals=(0.0,), sse=0.0, train_end_year=2000,
    )
    np.testing.assert_array_equal(hdes_forecast(fit, 4).values, (12.5,) * 4)


def test_hdes_residual_length_and_leading_zeros():
    rng = np.random.default_rng(9)
    s = series_of(rng.uniform(10, 20, size=12))
    fit = hdes_fit(s)
    assert len(fit.residuals) == len(s)
    assert fit.residuals[0] == 0.0 and abs(fit.residuals[1]) < 1e-12
    assert fit.structural_zeros == 2


def test_hdes_refinement_beats_or_matches_grid():
    rng = np.random.default_rng(10)
    s = series_of(40 - 0.8 * np.arange(30) + rng.normal(size=30))
    fit = hdes_fit(s)
    for a in (0.01, 0.25, 0.5, 0.75, 0.99):
        for b in (0.01, 0.25, 0.5, 0.75, 0.99):
            assert fit.sse <= hdes_fit_at(s, a, b).sse + 1e-12


def test_hdes_constant_series_tie_break():
    fit = hdes_fit(series_of([7.0] * 10))
    assert fit.sse == 0.0
    assert (fit.alpha, fit.beta) == (0.01, 0.01)


def test_hdes_too_short_rejected():
    with pytest.raises(SeriesLengthError):
        hdes_fit(series_of([1, 2, 3]))


def test_hdes_parameter_bounds_enforced():
    with pytest.raises(ValueError):
        HdesFit(
            alpha=0.5, beta=0.0, final_level=0.0, final_trend=0.0,
            residuals=(0.0,), sse=0.0, train_end_year=2000,
        )


def test_hdes_deterministic_across_runs():
    rng = np.random.default_rng(12)
    s = series_of(rng.uniform(0, 10, size=20))
    f1, f2 = hdes_fit(s), hdes_fit(s)
    assert (f1.alpha, f1.beta, f1.sse) == (f2.alpha, f2.beta, f2.sse)


# ------------------------------------------------------- shared properties


@given(
    seed=st.integers(min_value=0, max_value=5000),
    n=st.integers(min_value=4, max_value=30),
    horizon=st.integers(min_value=1, max_value=12),
)
@settings(max_examples=60, deadline=None)
def test_forecast_structure(seed, n, horizon):
    rng = np.random.default_rng(seed)
    s = series_of(rng.uniform(5, 50, size=n), start_year=1990)
    ses = ses_fit_at(s, 0.37)
    flat = ses_forecast(ses, horizon)
    assert all(v == ses.final_level for v in flat.values)
    assert flat.first_year == s.end_year + 1

    hd = hdes_fit_at(s, 0.41, 0.23)
    line = hdes_forecast(hd, horizon)
    steps = np.diff(line.values)
    if horizon > 1:
        np.testing.assert_allclose(steps, hd.final_trend, atol=1e-9)
    assert abs(line.values[0] - (hd.final_level + hd.final_trend)) < 1e-12


@given(
    seed=st.integers(min_value=0, max_value=5000),
    alpha=st.floats(min_value=0.001, max_value=0.999),
)
@settings(max_examples=40, deadline=None)
def test_ses_fixed_alpha_residual_identity(seed, alpha):
    # sse always equals the sum of squared residuals it reports
    rng = np.random.default_rng(seed)
    s = series_of(rng.uniform(-10, 10, size=14))
    fit = ses_fit_at(s, alpha)
    assert abs(fit.sse - sum(r * r for r in fit.residuals)) < 1e-9
