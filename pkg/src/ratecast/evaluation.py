"""Error metrics, forecast combination, and the holdout evaluation harness.

Every model is fitted on the training span only; the test span exists
purely to score forecasts. The combined model is the plain unweighted mean
of the Holt and ARIMA forecasts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arima import (
    ArimaFit,
    DifferencingDecision,
    OrderSearchResult,
    arima_forecast,
    arima_order_search,
    select_differencing,
)
from .errors import AlignmentError, DataError
from .series import Forecast, TimeSeries
from .smoothing import HdesFit, SesFit, hdes_fit, hdes_forecast, ses_fit, ses_forecast

MODEL_IDS = ("arima", "ses", "hdes", "ensemble")

_LABELS = {
    "ses": "SES",
    "hdes": "HDES",
    "ensemble": "HDES-ARIMA",
}


def rmse(actual, predicted) -> float:
    a, p = _aligned(actual, predicted)
    return float(np.sqrt(np.mean((a - p) ** 2)))


def mae(actual, predicted) -> float:
    a, p = _aligned(actual, predicted)
    return float(np.mean(np.abs(a - p)))


def mape_percent(actual, predicted) -> float:
    """Mean absolute percentage error, in percent (x100)."""
    a, p = _aligned(actual, predicted)
    zeros = np.flatnonzero(a == 0.0)
    if zeros.size:
        raise DataError(
            f"mape undefined: actual value at index {int(zeros[0])} is zero"
        )
    return float(100.0 * np.mean(np.abs(a - p) / np.abs(a)))


def _aligned(actual, predicted) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.ndim != 1 or p.ndim != 1:
        raise AlignmentError("metric inputs must be one-dimensional")
    if a.size == 0:
        raise AlignmentError("metric inputs must be non-empty")
    if a.size != p.size:
        raise AlignmentError(f"length mismatch: {a.size} actual vs {p.size} predicted")
    return a, p


def average_forecast(a: Forecast, b: Forecast) -> Forecast:
    """Element-wise mean of two forecasts covering the same years."""
    if a.first_year != b.first_year or len(a) != len(b):
        raise AlignmentError(
            f"forecasts do not align: {a.first_year}+{len(a)} vs {b.first_year}+{len(b)}"
        )
    values = tuple(
        0.5 * (x + y) for x, y in zip(a.values, b.values)
    )
    return Forecast(first_year=a.first_year, values=values, source=a.source + b.source)


@dataclass(frozen=True)
class ModelRow:
    """One line of the evaluation table."""

    model: str
    label: str
    params: str
    rmse: float
    mae: float
    mape_percent: float

    def __post_init__(self):
        for name in ("rmse", "mae", "mape_percent"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0.0:
                raise ValueError(f"{name}={v} must be finite and non-negative")
        if self.rmse < self.mae - 1e-12:
            raise ValueError("rmse cannot be below mae")


@dataclass(frozen=True)
class EvaluationReport:
    """Cross-validation metrics per model over the test span.

    ``rows`` follow the fixed order ARIMA, SES, HDES, HDES-ARIMA (selected
    models only); ``failures`` lists models that could not be fitted along
    with the reason, never silently dropped.
    """

    rows: tuple[ModelRow, ...]
    test_span: tuple[int, int]
    failures: tuple[tuple[str, str], ...] = ()


def format_param(value: float) -> str:
    """Two decimals, three when rounding would collapse to 0.00 or 1.00."""
    two = f"{value:.2f}"
    if two in ("0.00", "-0.00", "1.00", "-1.00") and f"{value:.3f}" != f"{float(two):.3f}":
        return f"{value:.3f}"
    return two


def describe_arima_params(fit: ArimaFit) -> str:
    parts = []
    if fit.constant_included:
        parts.append(f"c={format_param(fit.constant)}")
    parts.extend(
        f"phi_{i + 1}={format_param(c)}" for i, c in enumerate(fit.ar_coeffs)
    )
    parts.extend(
        f"theta_{j + 1}={format_param(c)}" for j, c in enumerate(fit.ma_coeffs)
    )
    return ", ".join(parts) if parts else "no parameters"


@dataclass(frozen=True)
class FittedModels:
    """Per-model fits on the training span, with failures recorded."""

    train: TimeSeries
    arima: ArimaFit | None = None
    ses: SesFit | None = None
    hdes: HdesFit | None = None
    d_decision: DifferencingDecision | None = None
    search: OrderSearchResult | None = None
    failures: tuple[tuple[str, str], ...] = ()

    def get(self, model: str):
        return {"arima": self.arima, "ses": self.ses, "hdes": self.hdes}[model]


def fit_models(
    train: TimeSeries,
    models=MODEL_IDS,
    fix_d: int | None = None,
    p_max: int = 3,
    q_max: int = 3,
) -> FittedModels:
    """Fit every selected model on the training span only.

    The ensemble needs both the Holt and ARIMA fits, so selecting it
    implies fitting both parents. The ARIMA differencing degree comes from
    the unit-root loop unless ``fix_d`` pins it.
    """
    wanted = set(models)
    unknown = wanted - set(MODEL_IDS)
    if unknown:
        raise DataError(f"unknown model id(s): {', '.join(sorted(unknown))}")
    if not wanted:
        raise DataError("no models selected")
    need_arima = "arima" in wanted or "ensemble" in wanted
    need_hdes = "hdes" in wanted or "ensemble" in wanted

    failures: list[tuple[str, str]] = []
    arima = ses = hdes = None
    d_decision = None
    search = None

    if need_arima:
        try:
            if fix_d is None:
                d_decision = select_differencing(train)
                d = d_decision.d
            else:
                d = int(fix_d)
            search = arima_order_search(train, d=d, p_max=p_max, q_max=q_max)
            arima = search.best.fit
        except Exception as exc:  # noqa: BLE001 - reported per model
            failures.append(("arima", f"{type(exc).__name__}: {exc}"))
    if "ses" in wanted:
        try:
            ses = ses_fit(train)
        except Exception as exc:  # noqa: BLE001
            failures.append(("ses", f"{type(exc).__name__}: {exc}"))
    if need_hdes:
        try:
            hdes = hdes_fit(train)
        except Exception as exc:  # noqa: BLE001
            failures.append(("hdes", f"{type(exc).__name__}: {exc}"))
    if "ensemble" in wanted and (arima is None or hdes is None):
        missing = [m for m, f in (("arima", arima), ("hdes", hdes)) if f is None]
        failures.append(("ensemble", f"requires {' and '.join(missing)} to fit"))

    return FittedModels(
        train=train,
        arima=arima,
        ses=ses,
        hdes=hdes,
        d_decision=d_decision,
        search=search,
        failures=tuple(failures),
    )


def forecast_models(fitted: FittedModels, horizon: int) -> dict[str, Forecast]:
    """Forecasts for every fitted model, ensemble included when possible."""
    out: dict[str, Forecast] = {}
    if fitted.arima is not None:
        out["arima"] = arima_forecast(fitted.arima, fitted.train, horizon)
    if fitted.ses is not None:
        out["ses"] = ses_forecast(fitted.ses, horizon)
    if fitted.hdes is not None:
        out["hdes"] = hdes_forecast(fitted.hdes, horizon)
    if "arima" in out and "hdes" in out:
        out["ensemble"] = average_forecast(out["hdes"], out["arima"])
    return out


def _row_for(model: str, fitted: FittedModels, forecast: Forecast, test: TimeSeries) -> ModelRow:
    actual = test.values
    if model == "arima":
        fit = fitted.arima
        label = f"ARIMA {fit.order.label()}"
        params = describe_arima_params(fit)
    elif model == "ses":
        label = _LABELS[model]
        params = f"alpha={format_param(fitted.ses.alpha)}"
    elif model == "hdes":
        label = _LABELS[model]
        params = (
            f"alpha={format_param(fitted.hdes.alpha)}, "
            f"beta={format_param(fitted.hdes.beta)}"
        )
    else:
        label = _LABELS[model]
        params = "mean of HDES and ARIMA forecasts"
    return ModelRow(
        model=model,
        label=label,
        params=params,
        rmse=rmse(actual, forecast.values),
        mae=mae(actual, forecast.values),
        mape_percent=mape_percent(actual, forecast.values),
    )


def evaluate_fitted(
    fitted: FittedModels,
    test: TimeSeries,
    models=MODEL_IDS,
) -> EvaluationReport:
    """Score already-fitted models on the test span.

    Rows appear in the fixed order ARIMA, SES, HDES, HDES-ARIMA regardless
    of the order the caller lists models in. Per-model failures land in
    ``failures`` and do not abort the rest.
    """
    if test.start_year != fitted.train.end_year + 1:
        raise AlignmentError(
            f"test span must start the year after training ends "
            f"({fitted.train.end_year + 1}), got {test.start_year}"
        )
    forecasts = forecast_models(fitted, horizon=len(test))
    rows = []
    failures = list(fitted.failures)
    for model in MODEL_IDS:
        if model not in set(models):
            continue
        if model not in forecasts:
            continue
        try:
            rows.append(_row_for(model, fitted, forecasts[model], test))
        except DataError as exc:
            failures.append((model, f"{type(exc).__name__}: {exc}"))
    return EvaluationReport(
        rows=tuple(rows),
        test_span=(test.start_year, test.end_year),
        failures=tuple(failures),
    )


def evaluate_models(
    train: TimeSeries,
    test: TimeSeries,
    models=MODEL_IDS,
    fix_d: int | None = None,
    p_max: int = 3,
    q_max: int = 3,
) -> EvaluationReport:
    """Fit on train, forecast the test span, and score every model."""
    if test.start_year != train.end_year + 1:
        raise AlignmentError(
            f"test span must start the year after training ends "
            f"({train.end_year + 1}), got {test.start_year}"
        )
    fitted = fit_models(train, models=models, fix_d=fix_d, p_max=p_max, q_max=q_max)
    return evaluate_fitted(fitted, test, models=models)
