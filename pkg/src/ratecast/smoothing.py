"""Simple and double (Holt) exponential smoothing: fitting and forecasting.

Both models minimize one-step-ahead squared error over their smoothing
parameters: a dense grid scan first, then local refinement (golden-section
for the one-parameter model, Nelder-Mead for the two-parameter one). The
refined point is accepted only on strict improvement, so ties keep the
smallest grid parameters and results do not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import SeriesLengthError
from .series import Forecast, TimeSeries

SES_GRID_STEP = 0.001
HDES_GRID_STEP = 0.01
_REFINE_LO = 0.0001
_REFINE_HI = 0.9999
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SesFit:
    """Fitted simple exponential smoothing model.

    The level recursion is l_t = alpha*y_t + (1-alpha)*l_{t-1} with the
    level seeded at the first observation. residuals[t] is the one-step
    error y_t - l_{t-1}; the first entry is 0 by construction, and
    diagnostics should drop that deterministic leading zero.
    """

    alpha: float
    final_level: float
    residuals: tuple[float, ...]
    sse: float
    train_end_year: int

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha {self.alpha} outside (0, 1)")

    # Leading residuals that are zero by construction, not by fit quality.
    structural_zeros = 1


@dataclass(frozen=True)
class HdesFit:
    """Fitted Holt double exponential smoothing model.

    Level and trend are seeded as l = y_1, b = y_2 - y_1, so the first two
    residuals are 0 by construction (the second because the seed trend
    predicts y_2 exactly); diagnostics should drop both.
    """

    alpha: float
    beta: float
    final_level: float
    final_trend: float
    residuals: tuple[float, ...]
    sse: float
    train_end_year: int

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha {self.alpha} outside (0, 1)")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta {self.beta} outside (0, 1)")

    structural_zeros = 2


def _ses_path(y: np.ndarray, alpha: float) -> tuple[np.ndarray, float, float]:
    """One-step residuals, SSE, and final level at a fixed alpha."""
    n = y.size
    resid = np.zeros(n)
    level = y[0]
    sse = 0.0
    for t in range(1, n):
        r = y[t] - level
        resid[t] = r
        sse += r * r
        level = alpha * y[t] + (1.0 - alpha) * level
    return resid, sse, level


def _ses_grid_sse(y: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    """SSE at every grid alpha, one pass over the series."""
    level = np.full(alphas.size, y[0])
    sse = np.zeros(alphas.size)
    for t in range(1, y.size):
        r = y[t] - level
        sse += r * r
        level = alphas * y[t] + (1.0 - alphas) * level
    return sse


def _golden_min(f, lo: float, hi: float, iters: int = 70) -> float:
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def ses_fit(train: TimeSeries) -> SesFit:
    """Fit simple exponential smoothing by one-step-ahead SSE.

    Scans alpha over {0.001, ..., 0.999}, then golden-section refines
    inside the winning cell (one grid step each side, still within the
    grid bounds). Ties keep the smallest alpha.
    """
    if len(train) < 3:
        raise SeriesLengthError(f"ses fit needs at least 3 observations, got {len(train)}")
    y = train.to_array()
    alphas = np.round(np.arange(1, 1000) * SES_GRID_STEP, 3)
    sse = _ses_grid_sse(y, alphas)
    best_idx = int(np.flatnonzero(sse == sse.min())[0])
    best_alpha = float(alphas[best_idx])
    best_sse = float(sse[best_idx])

    lo = max(SES_GRID_STEP, best_alpha - SES_GRID_STEP)
    hi = min(1.0 - SES_GRID_STEP, best_alpha + SES_GRID_STEP)
    refined = _golden_min(lambda a: _ses_path(y, a)[1], lo, hi)
    if _ses_path(y, refined)[1] < best_sse:
        best_alpha = float(refined)

    resid, total, level = _ses_path(y, best_alpha)
    return SesFit(
        alpha=best_alpha,
        final_level=float(level),
        residuals=tuple(resid),
        sse=float(total),
        train_end_year=train.end_year,
    )


def ses_fit_at(train: TimeSeries, alpha: float) -> SesFit:
    """Evaluate simple exponential smoothing at a fixed alpha (no search)."""
    if len(train) < 3:
        raise SeriesLengthError(f"ses fit needs at least 3 observations, got {len(train)}")
    resid, total, level = _ses_path(train.to_array(), float(alpha))
    return SesFit(
        alpha=float(alpha),
        final_level=float(level),
        residuals=tuple(resid),
        sse=float(total),
        train_end_year=train.end_year,
    )


def ses_forecast(fit: SesFit, horizon: int) -> Forecast:
    """Flat forecast: every step ahead equals the final level."""
    horizon = int(horizon)
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    return Forecast(
        first_year=fit.train_end_year + 1,
        values=(fit.final_level,) * horizon,
        source=("ses",),
    )


def _hdes_path(
    y: np.ndarray, alpha: float, beta: float
) -> tuple[np.ndarray, float, float, float]:
    """One-step residuals, SSE, final level, and final trend."""
    n = y.size
    resid = np.zeros(n)
    level = y[0]
    trend = y[1] - y[0]
    sse = 0.0
    for t in range(1, n):
        pred = level + trend
        r = y[t] - pred
        resid[t] = r
        sse += r * r
        new_level = alpha * y[t] + (1.0 - alpha) * pred
        trend = beta * (new_level - level) + (1.0 - beta) * trend
        level = new_level
    return resid, sse, level, trend


def _hdes_grid_sse(y: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """SSE for every (alpha, beta) pair, one pass over the series."""
    level = np.full(a.size, y[0])
    trend = np.full(a.size, y[1] - y[0])
    sse = np.zeros(a.size)
    for t in range(1, y.size):
        pred = level + trend
        r = y[t] - pred
        sse += r * r
        new_level = a * y[t] + (1.0 - a) * pred
        trend = b * (new_level - level) + (1.0 - b) * trend
        level = new_level
    return sse


def hdes_fit(train: TimeSeries) -> HdesFit:
    """Fit Holt smoothing by one-step-ahead SSE.

    Scans (alpha, beta) over {0.01, ..., 0.99} squared, then refines with
    Nelder-Mead from the grid winner, parameters confined to
    (0.0001, 0.9999). Ties keep the smallest alpha, then beta.
    """
    if len(train) < 4:
        raise SeriesLengthError(f"holt fit needs at least 4 observations, got {len(train)}")
    y = train.to_array()
    steps = np.round(np.arange(1, 100) * HDES_GRID_STEP, 2)
    a_grid, b_grid = np.meshgrid(steps, steps, indexing="ij")
    a_flat, b_flat = a_grid.ravel(), b_grid.ravel()
    sse = _hdes_grid_sse(y, a_flat, b_flat)
    best_idx = int(np.flatnonzero(sse == sse.min())[0])
    best = (float(a_flat[best_idx]), float(b_flat[best_idx]))
    best_sse = float(sse[best_idx])

    def objective(params: np.ndarray) -> float:
        a, b = params
        if not (_REFINE_LO < a < _REFINE_HI and _REFINE_LO < b < _REFINE_HI):
            return math.inf
        return _hdes_path(y, a, b)[1]

    res = optimize.minimize(
        objective,
        np.array(best),
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400, "maxfev": 800},
    )
    if res.fun < best_sse:
        best = (float(res.x[0]), float(res.x[1]))

    resid, total, level, trend = _hdes_path(y, *best)
    return HdesFit(
        alpha=best[0],
        beta=best[1],
        final_level=float(level),
        final_trend=float(trend),
        residuals=tuple(resid),
        sse=float(total),
        train_end_year=train.end_year,
    )


def hdes_fit_at(train: TimeSeries, alpha: float, beta: float) -> HdesFit:
    """Evaluate Holt smoothing at fixed (alpha, beta) (no search)."""
    if len(train) < 2:
        raise SeriesLengthError(f"holt recursion needs at least 2 observations, got {len(train)}")
    resid, total, level, trend = _hdes_path(train.to_array(), float(alpha), float(beta))
    return HdesFit(
        alpha=float(alpha),
        beta=float(beta),
        final_level=float(level),
        final_trend=float(trend),
        residuals=tuple(resid),
        sse=float(total),
        train_end_year=train.end_year,
    )


def hdes_forecast(fit: HdesFit, horizon: int) -> Forecast:
    """Straight-line forecast: step h ahead is final_level + h*final_trend."""
    horizon = int(horizon)
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    values = tuple(
        fit.final_level + h * fit.final_trend for h in range(1, horizon + 1)
    )
    return Forecast(
        first_year=fit.train_end_year + 1,
        values=values,
        source=("hdes",),
    )
