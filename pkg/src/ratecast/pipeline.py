"""End-to-end run orchestration: load, diagnose, fit, evaluate, emit.

The run is a fixed sequence of stages. A stage that fails is recorded with
its reason and the remaining independent stages still execute, so a single
bad model never silences the rest of the report. Input problems raise
immediately (nothing useful can run without data); artifact problems are
collected per stage.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .arima import DifferencingDecision, arima_order_search, select_differencing
from .diagnostics import adf_test, kpss_test, ljung_box, shapiro_wilk
from .errors import DataError, ModelError
from .evaluation import (
    MODEL_IDS,
    EvaluationReport,
    FittedModels,
    evaluate_fitted,
    forecast_models,
)
from .ingest import load_csv
from .plots import (
    MODEL_COLORS,
    LineSpec,
    render_fitted_vs_observed,
    render_forecast,
    render_observed,
    render_residual_panel,
)
from .reporting import (
    ResidualDiagnostics,
    format_kv,
    render_report,
    write_text_atomic,
)
from .series import Forecast, TimeSeries, difference, split_at
from .smoothing import hdes_fit, ses_fit

STAGE_NAMES = (
    "load",
    "differencing",
    "arima",
    "smoothing",
    "diagnostics",
    "evaluation",
    "forecast",
    "plots",
    "report",
)


@dataclass(frozen=True)
class RunConfig:
    """Everything a pipeline run depends on."""

    input_path: str
    train_end_year: int
    output_dir: str
    horizon: int = 9
    models: tuple[str, ...] = MODEL_IDS
    d_max: int = 2
    p_max: int = 3
    q_max: int = 3
    fix_d: int | None = None
    emit_plots: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.horizon < 1:
            raise DataError(f"horizon must be >= 1, got {self.horizon}")
        for name in ("p_max", "q_max"):
            v = getattr(self, name)
            if not 0 <= v <= 5:
                raise DataError(f"{name} must be in 0..5, got {v}")
        if self.d_max < 0:
            raise DataError(f"d_max must be >= 0, got {self.d_max}")
        if self.fix_d is not None and not 0 <= self.fix_d <= self.d_max:
            raise DataError(
                f"fix_d must be in 0..{self.d_max}, got {self.fix_d}"
            )
        unknown = set(self.models) - set(MODEL_IDS)
        if unknown:
            raise DataError(f"unknown model id(s): {', '.join(sorted(unknown))}")


@dataclass(frozen=True)
class StageOutcome:
    name: str
    status: str  # ok | skipped | failed
    detail: str = ""
    error_kind: str | None = None  # data | model | io | internal

    @property
    def ok(self) -> bool:
        return self.status != "failed"


@dataclass
class PipelineResult:
    """Everything a run produced, plus per-stage status."""

    config: RunConfig
    observed: TimeSeries
    train: TimeSeries
    test: TimeSeries
    fitted: FittedModels | None = None
    evaluation: EvaluationReport | None = None
    diagnostics: tuple[ResidualDiagnostics, ...] = ()
    holdout_forecasts: dict = field(default_factory=dict)
    future_forecasts: dict = field(default_factory=dict)
    stages: tuple[StageOutcome, ...] = ()
    rendered: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    report_markdown: str | None = None
    results_entries: dict | None = None

    @property
    def ok(self) -> bool:
        return all(s.ok for s in self.stages)

    def exit_code(self) -> int:
        """0 success; 3 every requested model failed; 4 artifact I/O failed."""
        if self.config.models and self.evaluation is not None:
            if not self.evaluation.rows:
                return 3
        elif self.config.models and self.evaluation is None:
            return 3
        if any(s.error_kind == "io" for s in self.stages):
            return 4
        return 0


def model_label(model: str, fitted: FittedModels | None) -> str:
    if model == "arima":
        if fitted is not None and fitted.arima is not None:
            return f"ARIMA {fitted.arima.order.label()}"
        return "ARIMA"
    return {"ses": "SES", "hdes": "HDES", "ensemble": "HDES-ARIMA"}[model]


def _error_kind(exc: BaseException) -> str:
    if isinstance(exc, DataError):
        return "data"
    if isinstance(exc, ModelError):
        return "model"
    if isinstance(exc, OSError):
        return "io"
    return "internal"


class _StageLog:
    def __init__(self):
        self.outcomes: list[StageOutcome] = []

    def ok(self, name: str, detail: str = ""):
        self.outcomes.append(StageOutcome(name, "ok", detail))

    def skipped(self, name: str, detail: str):
        self.outcomes.append(StageOutcome(name, "skipped", detail))

    def failed(self, name: str, exc: BaseException):
        self.outcomes.append(
            StageOutcome(name, "failed", f"{type(exc).__name__}: {exc}",
                         _error_kind(exc))
        )


def load_and_split(config: RunConfig) -> tuple[TimeSeries, TimeSeries, TimeSeries]:
    """Stage 1 core: read the CSV and split at the training boundary."""
    observed = load_csv(config.input_path)
    train, test = split_at(observed, config.train_end_year)
    return observed, train, test


def _residual_view(model: str, fitted: FittedModels) -> tuple[np.ndarray, int]:
    """Residuals with structural leading zeros dropped, plus their start year.

    The first SES residual and the first two Holt residuals are zero by
    construction (the recursion has no prediction there yet), so tests and
    plots on them would be biased toward whiteness and normality.
    """
    fit = fitted.get(model)
    start = fitted.train.start_year
    if model == "arima":
        return np.asarray(fit.residuals, dtype=float), start + fit.order.d
    skip = fit.structural_zeros
    return np.asarray(fit.residuals[skip:], dtype=float), start + skip


def _lb_fitted_params(model: str, fitted: FittedModels) -> int:
    if model == "arima":
        fit = fitted.arima
        return fit.order.p + fit.order.q + (1 if fit.constant_included else 0)
    return {"ses": 1, "hdes": 2}[model]


def _diagnose_residuals(model: str, fitted: FittedModels) -> ResidualDiagnostics:
    res, _ = _residual_view(model, fitted)
    notes: list[str] = []
    lb = sw = kp = None
    try:
        lb = ljung_box(res, fitted_params=_lb_fitted_params(model, fitted))
    except DataError as exc:
        notes.append(f"Ljung-Box not run: {exc}")
    try:
        sw = shapiro_wilk(res)
    except DataError as exc:
        notes.append(f"Shapiro-Wilk not run: {exc}")
    if model == "arima":
        try:
            kp = kpss_test(res)
        except DataError as exc:
            notes.append(f"KPSS not run: {exc}")
    return ResidualDiagnostics(
        model=model,
        label=model_label(model, fitted),
        ljung_box=lb,
        shapiro=sw,
        kpss=kp,
        notes=tuple(notes),
    )


def _fitted_line(model: str, fitted: FittedModels,
                 holdout: dict) -> LineSpec | None:
    """In-sample one-step predictions joined with the holdout forecast."""
    train = fitted.train
    y = np.asarray(train.values, dtype=float)
    if model == "ensemble":
        a = _fitted_line("arima", fitted, holdout)
        h = _fitted_line("hdes", fitted, holdout)
        if a is None or h is None or "ensemble" not in holdout:
            return None
        start = max(a.start_year, h.start_year)
        av = np.asarray(a.values[start - a.start_year:])
        hv = np.asarray(h.values[start - h.start_year:])
        vals = 0.5 * (av + hv)
        return LineSpec(model_label(model, fitted), start,
                        tuple(float(v) for v in vals),
                        MODEL_COLORS["ensemble"], dashed=True)
    if fitted.get(model) is None or model not in holdout:
        return None
    res, start = _residual_view(model, fitted)
    offset = start - train.start_year
    in_sample = y[offset:] - res
    values = tuple(float(v) for v in in_sample) + tuple(holdout[model].values)
    return LineSpec(model_label(model, fitted), start, values,
                    MODEL_COLORS[model], dashed=True)


def _slice_future(f: Forecast, skip: int) -> Forecast:
    return Forecast(
        first_year=f.first_year + skip,
        values=f.values[skip:],
        source=f.source,
    )


def run_pipeline(config: RunConfig) -> PipelineResult:
    """Execute every stage of a forecasting run and write its artifacts.

    Raises DataError when the input cannot be loaded or split (nothing else
    can run). All later failures are recorded in the result's stage log.
    """
    observed = load_csv(config.input_path)
    return run_from_series(observed, config, write=True)


def run_from_series(
    observed: TimeSeries, config: RunConfig, write: bool = True
) -> PipelineResult:
    """Run every stage on an already-loaded series.

    With ``write`` False the artifacts are only rendered into
    ``result.rendered`` (name to text), never touching the filesystem;
    the service path uses this.
    """
    log = _StageLog()
    train, test = split_at(observed, config.train_end_year)
    log.ok("load", f"{len(observed)} rows, train {len(train)}, test {len(test)}")
    result = PipelineResult(config=config, observed=observed, train=train, test=test)

    wanted = set(config.models)
    need_arima = bool(wanted & {"arima", "ensemble"})
    need_hdes = bool(wanted & {"hdes", "ensemble"})
    fit_failures: list[tuple[str, str]] = []

    # stage 2: differencing degree for the ARIMA family
    d_decision: DifferencingDecision | None = None
    d: int | None = None
    if not need_arima:
        log.skipped("differencing", "no ARIMA-family model requested")
    elif config.fix_d is not None:
        d = config.fix_d
        log.ok("differencing", f"d = {d} pinned by fix_d")
    else:
        try:
            d_decision = select_differencing(train, d_max=config.d_max)
            d = d_decision.d
            log.ok("differencing", f"d = {d} from the unit-root loop")
        except Exception as exc:  # noqa: BLE001 - reported, arima skipped
            log.failed("differencing", exc)
            fit_failures.append(("arima", f"{type(exc).__name__}: {exc}"))

    # stage 3: ARIMA order search
    arima = None
    search = None
    if not need_arima:
        log.skipped("arima", "not requested")
    elif d is None:
        log.skipped("arima", "no differencing degree available")
    else:
        try:
            search = arima_order_search(
                train, d=d, p_max=config.p_max, q_max=config.q_max
            )
            arima = search.best.fit
            log.ok("arima", f"selected {arima.order.label()} by AIC")
        except Exception as exc:  # noqa: BLE001
            log.failed("arima", exc)
            fit_failures.append(("arima", f"{type(exc).__name__}: {exc}"))

    # stage 4: smoothing fits
    ses = hdes = None
    if "ses" not in wanted and not need_hdes:
        log.skipped("smoothing", "not requested")
    else:
        parts = []
        if "ses" in wanted:
            try:
                ses = ses_fit(train)
                parts.append(f"ses alpha={ses.alpha:.4g}")
            except Exception as exc:  # noqa: BLE001
                fit_failures.append(("ses", f"{type(exc).__name__}: {exc}"))
        if need_hdes:
            try:
                hdes = hdes_fit(train)
                parts.append(
                    f"hdes alpha={hdes.alpha:.4g} beta={hdes.beta:.4g}"
                )
            except Exception as exc:  # noqa: BLE001
                fit_failures.append(("hdes", f"{type(exc).__name__}: {exc}"))
        smoothing_failed = [f for f in fit_failures if f[0] in ("ses", "hdes")]
        if smoothing_failed and not parts:
            log.outcomes.append(StageOutcome(
                "smoothing", "failed",
                "; ".join(r for _, r in smoothing_failed), "model"))
        else:
            log.ok("smoothing", ", ".join(parts) if parts else "nothing to fit")

    if "ensemble" in wanted and (arima is None or hdes is None):
        missing = [m for m, f in (("arima", arima), ("hdes", hdes)) if f is None]
        fit_failures.append(("ensemble", f"requires {' and '.join(missing)} to fit"))

    fitted = FittedModels(
        train=train, arima=arima, ses=ses, hdes=hdes,
        d_decision=d_decision, search=search, failures=tuple(fit_failures),
    )
    result.fitted = fitted

    # stage 5: residual diagnostics for every fitted model
    diagnostics: list[ResidualDiagnostics] = []
    if not wanted:
        log.skipped("diagnostics", "no models requested")
    else:
        try:
            for model in ("arima", "ses", "hdes"):
                if model in wanted or (model != "ses" and "ensemble" in wanted):
                    if fitted.get(model) is not None:
                        diagnostics.append(_diagnose_residuals(model, fitted))
            log.ok("diagnostics", f"{len(diagnostics)} model(s)")
        except Exception as exc:  # noqa: BLE001
            log.failed("diagnostics", exc)
    result.diagnostics = tuple(diagnostics)

    # stage 6: holdout evaluation
    evaluation = None
    if not wanted:
        evaluation = EvaluationReport(rows=(), test_span=(test.start_year, test.end_year))
        result.evaluation = evaluation
        log.skipped("evaluation", "no models requested")
    else:
        try:
            evaluation = evaluate_fitted(fitted, test, models=config.models)
            result.evaluation = evaluation
            log.ok("evaluation", f"{len(evaluation.rows)} row(s)")
        except Exception as exc:  # noqa: BLE001
            log.failed("evaluation", exc)

    # stage 7: holdout + future forecasts (always train-fitted models)
    holdout: dict = {}
    future: dict = {}
    if not wanted:
        log.skipped("forecast", "no models requested")
    else:
        try:
            total = len(test) + config.horizon
            holdout = {
                m: f for m, f in forecast_models(fitted, len(test)).items()
                if m in wanted
            }
            future = {
                m: _slice_future(f, len(test))
                for m, f in forecast_models(fitted, total).items()
                if m in wanted
            }
            log.ok("forecast", f"{len(future)} model(s), horizon {config.horizon}")
        except Exception as exc:  # noqa: BLE001
            log.failed("forecast", exc)
    result.holdout_forecasts = holdout
    result.future_forecasts = future

    _emit_artifacts(config, result, log, write=write)
    result.stages = tuple(log.outcomes)
    return result


def _d_summary(config: RunConfig, result: PipelineResult) -> str | None:
    fitted = result.fitted
    if config.fix_d is not None:
        return f"Differencing: d = {config.fix_d} pinned by configuration."
    if fitted is None or fitted.d_decision is None:
        return None
    dec = fitted.d_decision
    trail = "; ".join(
        f"d={deg}: p {r.describe_p()}" for deg, r in dec.adf_trail
    )
    how = "forced fallback" if dec.forced else "unit-root loop"
    text = f"Differencing: d = {dec.d} selected by the {how}"
    return f"{text} ({trail})." if trail else f"{text}."


def _search_summary(config: RunConfig, result: PipelineResult) -> str | None:
    fitted = result.fitted
    if fitted is None or fitted.search is None or fitted.arima is None:
        return None
    search = fitted.search
    return (
        f"ARIMA order search over p <= {config.p_max}, q <= {config.q_max} "
        f"selected {fitted.arima.order.label()} by AIC = "
        f"{fitted.arima.aic:.2f} ({len(search.ranked)} candidate(s) ranked, "
        f"{len(search.skipped)} skipped)."
    )


def _forecast_labels(result: PipelineResult) -> dict:
    return {
        m: model_label(m, result.fitted)
        for m in ("arima", "ses", "hdes", "ensemble")
    }


def _build_results_entries(config: RunConfig, result: PipelineResult) -> dict:
    """Flat key-value view of the whole run at full precision."""
    entries: dict = {}
    entries["run.input"] = os.path.basename(os.fspath(config.input_path))
    entries["run.train_end_year"] = config.train_end_year
    entries["run.horizon"] = config.horizon
    entries["run.models"] = ",".join(config.models) if config.models else "none"
    entries["run.d_max"] = config.d_max
    entries["run.p_max"] = config.p_max
    entries["run.q_max"] = config.q_max
    if config.fix_d is not None:
        entries["run.fix_d"] = config.fix_d
    entries["run.seed"] = config.seed

    entries["data.start_year"] = result.observed.start_year
    entries["data.end_year"] = result.observed.end_year
    entries["data.n"] = len(result.observed)
    entries["data.train_n"] = len(result.train)
    entries["data.test_n"] = len(result.test)

    fitted = result.fitted
    if fitted is not None and fitted.d_decision is not None:
        dec = fitted.d_decision
        entries["differencing.d"] = dec.d
        entries["differencing.forced"] = dec.forced
        for deg, r in dec.adf_trail:
            entries[f"adf.d{deg}.statistic"] = r.statistic
            entries[f"adf.d{deg}.p_value"] = r.p_value
            entries[f"adf.d{deg}.lags"] = r.lags_used
            if r.p_bound:
                entries[f"adf.d{deg}.p_bound"] = r.p_bound
    elif config.fix_d is not None:
        entries["differencing.d"] = config.fix_d
        entries["differencing.pinned"] = True

    if fitted is not None and fitted.arima is not None:
        fit = fitted.arima
        entries["arima.order"] = (fit.order.p, fit.order.d, fit.order.q)
        if fit.constant_included:
            entries["arima.constant"] = fit.constant
        for i, c in enumerate(fit.ar_coeffs, start=1):
            entries[f"arima.phi_{i}"] = c
        for j, c in enumerate(fit.ma_coeffs, start=1):
            entries[f"arima.theta_{j}"] = c
        entries["arima.sigma2"] = fit.sigma2
        entries["arima.log_likelihood"] = fit.log_likelihood
        entries["arima.aic"] = fit.aic
        entries["arima.ma_boundary"] = fit.ma_boundary
    if fitted is not None and fitted.search is not None:
        ranked = fitted.search.ranked
        entries["search.n_ranked"] = len(ranked)
        entries["search.n_skipped"] = len(fitted.search.skipped)
        for entry in ranked:
            o = entry.order
            entries[f"search.aic.{o.p}_{o.d}_{o.q}"] = entry.aic
    if fitted is not None and fitted.ses is not None:
        entries["ses.alpha"] = fitted.ses.alpha
        entries["ses.sse"] = fitted.ses.sse
        entries["ses.final_level"] = fitted.ses.final_level
    if fitted is not None and fitted.hdes is not None:
        entries["hdes.alpha"] = fitted.hdes.alpha
        entries["hdes.beta"] = fitted.hdes.beta
        entries["hdes.sse"] = fitted.hdes.sse
        entries["hdes.final_level"] = fitted.hdes.final_level
        entries["hdes.final_trend"] = fitted.hdes.final_trend

    for diag in result.diagnostics:
        prefix = f"diagnostics.{diag.model}"
        for test_name, r in (
            ("ljung_box", diag.ljung_box),
            ("shapiro_wilk", diag.shapiro),
            ("kpss", diag.kpss),
        ):
            if r is None:
                continue
            entries[f"{prefix}.{test_name}.statistic"] = r.statistic
            entries[f"{prefix}.{test_name}.p_value"] = r.p_value
            if r.p_bound:
                entries[f"{prefix}.{test_name}.p_bound"] = r.p_bound
            if r.df is not None:
                entries[f"{prefix}.{test_name}.df"] = r.df
        for i, note in enumerate(diag.notes, start=1):
            entries[f"{prefix}.note_{i}"] = note

    if result.evaluation is not None:
        entries["evaluation.test_start"] = result.evaluation.test_span[0]
        entries["evaluation.test_end"] = result.evaluation.test_span[1]
        for row in result.evaluation.rows:
            entries[f"metrics.{row.model}.rmse"] = row.rmse
            entries[f"metrics.{row.model}.mae"] = row.mae
            entries[f"metrics.{row.model}.mape_percent"] = row.mape_percent
            entries[f"metrics.{row.model}.label"] = row.label
        for i, (model, reason) in enumerate(result.evaluation.failures, start=1):
            entries[f"failures.{i}.model"] = model
            entries[f"failures.{i}.reason"] = reason

    if result.future_forecasts:
        first = next(iter(result.future_forecasts.values()))
        years = tuple(first.first_year + i for i in range(len(first)))
        entries["forecast.years"] = years
        for model in MODEL_IDS:
            if model in result.future_forecasts:
                entries[f"forecast.{model}"] = result.future_forecasts[model].values

    for outcome in result.stages or ():
        entries[f"stage.{outcome.name}"] = outcome.status
    return entries


def _render_plots(config: RunConfig, result: PipelineResult, log: _StageLog) -> bool:
    """Render SVG artifacts into result.rendered; True when all succeeded."""
    try:
        result.rendered["observed.svg"] = render_observed(
            result.observed, title="Observed series")
        for diag in result.diagnostics:
            res, start = _residual_view(diag.model, result.fitted)
            result.rendered[f"residuals_{diag.model}.svg"] = render_residual_panel(
                res, start, f"{diag.label} residuals")
        fit_lines = [
            spec for spec in (
                _fitted_line(m, result.fitted, result.holdout_forecasts)
                for m in MODEL_IDS
                if m in set(config.models) and result.fitted is not None
            ) if spec is not None
        ]
        if fit_lines:
            result.rendered["fitted_vs_observed.svg"] = render_fitted_vs_observed(
                result.observed, fit_lines, split_year=result.train.end_year)
        if result.future_forecasts:
            result.rendered["forecast.svg"] = render_forecast(
                result.observed, result.future_forecasts,
                labels=_forecast_labels(result),
                title=f"Forecast ({result.observed.end_year + 1}-"
                      f"{result.observed.end_year + config.horizon})")
    except Exception as exc:  # noqa: BLE001 - plot construction failure
        log.failed("plots", exc)
        return False
    return True


def _emit_artifacts(config: RunConfig, result: PipelineResult, log: _StageLog,
                    write: bool):
    """Render the artifact set, then (optionally) write it atomically."""
    plot_names: list[str] = []
    if not config.emit_plots:
        log.skipped("plots", "disabled")
        plots_ok = None
    else:
        plots_ok = _render_plots(config, result, log)
        plot_names = [n for n in result.rendered if n.endswith(".svg")]

    report_ok = True
    try:
        source_label = os.path.basename(os.fspath(config.input_path))
        report_md = render_report(
            source_label=source_label,
            observed=result.observed,
            train=result.train,
            test=result.test,
            evaluation=result.evaluation
            or EvaluationReport(rows=(), test_span=(result.test.start_year,
                                                    result.test.end_year)),
            diagnostics=result.diagnostics,
            forecasts=result.future_forecasts,
            forecast_labels=_forecast_labels(result),
            d_summary=_d_summary(config, result),
            search_summary=_search_summary(config, result),
        )
        result.report_markdown = report_md
        result.rendered["report.md"] = report_md
        # snapshot stage statuses so the results file can include them
        result.stages = tuple(log.outcomes)
        entries = _build_results_entries(config, result)
        result.results_entries = entries
        result.rendered["results.kv"] = format_kv(entries)
    except Exception as exc:  # noqa: BLE001
        log.failed("report", exc)
        report_ok = False

    if not write:
        if plots_ok:
            log.ok("plots", f"{len(plot_names)} file(s) rendered")
        if report_ok:
            log.ok("report", f"{len(result.rendered)} artifact(s) rendered")
        return

    out = os.fspath(config.output_dir)
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        if plots_ok:
            log.failed("plots", exc)
        if report_ok:
            log.failed("report", exc)
        return

    if plots_ok:
        try:
            for name in plot_names:
                path = os.path.join(out, name)
                write_text_atomic(path, result.rendered[name])
                result.artifacts[name] = path
            log.ok("plots", f"{len(plot_names)} file(s)")
        except OSError as exc:
            log.failed("plots", exc)

    if report_ok:
        try:
            for name in ("report.md", "results.kv"):
                path = os.path.join(out, name)
                write_text_atomic(path, result.rendered[name])
                result.artifacts[name] = path
            log.ok("report", f"{len(result.artifacts)} artifact(s) in {out}")
        except OSError as exc:
            log.failed("report", exc)


def diagnose_series(series: TimeSeries, d_max: int = 2) -> list[dict]:
    """Stationarity screen: ADF and KPSS at each differencing degree.

    Returns one entry per degree with whichever tests could run; a test
    that cannot run on that series is reported by its error message.
    """
    out = []
    for d in range(d_max + 1):
        values = difference(series, d).values if d else series.values
        entry: dict = {"d": d, "n": len(values)}
        for name, fn in (("adf", adf_test), ("kpss", kpss_test)):
            try:
                entry[name] = fn(values)
            except (DataError, ValueError) as exc:
                entry[f"{name}_error"] = str(exc)
        out.append(entry)
    return out
