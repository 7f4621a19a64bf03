"""Markdown report rendering and the flat key-value results file.

The report is the human-facing summary (evaluation table, residual
diagnostics, forecast table). The results file is the machine-facing twin:
flat `key = value` lines holding every estimate, statistic, metric, and
forecast value at full precision, parseable back without loss.
"""

from __future__ import annotations

import os
import re
import tempfile
from dataclasses import dataclass

from .diagnostics import TestResult
from .evaluation import EvaluationReport
from .series import Forecast, TimeSeries

_GREEK_SUBS = (
    (re.compile(r"\balpha="), "α = "),
    (re.compile(r"\bbeta="), "β = "),
    (re.compile(r"\bphi_(\d+)="), "φ\\1 = "),
    (re.compile(r"\btheta_(\d+)="), "θ\\1 = "),
    (re.compile(r"\bc="), "c = "),
)


def greek_params(text: str) -> str:
    """Translate machine parameter names to the report's display style."""
    for pattern, repl in _GREEK_SUBS:
        text = pattern.sub(repl, text)
    return text


@dataclass(frozen=True)
class ResidualDiagnostics:
    """Residual test battery for one fitted model.

    Any test can be None when it was skipped or could not run (degenerate
    residuals); ``notes`` carries the reasons.
    """

    model: str
    label: str
    ljung_box: TestResult | None = None
    shapiro: TestResult | None = None
    kpss: TestResult | None = None
    notes: tuple[str, ...] = ()


def _p_cell(result: TestResult | None) -> str:
    if result is None:
        return "n/a"
    return result.describe_p()


def render_report(
    source_label: str,
    observed: TimeSeries,
    train: TimeSeries,
    test: TimeSeries,
    evaluation: EvaluationReport,
    diagnostics: tuple[ResidualDiagnostics, ...] = (),
    forecasts: dict[str, Forecast] | None = None,
    forecast_labels: dict[str, str] | None = None,
    d_summary: str | None = None,
    search_summary: str | None = None,
) -> str:
    """Render the full markdown report deterministically."""
    forecasts = forecasts or {}
    forecast_labels = forecast_labels or {}
    lines: list[str] = []
    lines.append("# Forecast evaluation report")
    lines.append("")
    lines.append(f"Input: {source_label}")
    lines.append(
        f"Observed span: {observed.start_year}-{observed.end_year} "
        f"({len(observed)} points)."
    )
    lines.append(
        f"Training span: {train.start_year}-{train.end_year} ({len(train)} points); "
        f"test span: {test.start_year}-{test.end_year} ({len(test)} points)."
    )
    if d_summary:
        lines.append(d_summary)
    if search_summary:
        lines.append(search_summary)
    lines.append("")

    lines.append("## Cross-validation metrics")
    lines.append("")
    lines.append("| Model | Parameter Estimates | RMSE | MAE | MAPE |")
    lines.append("| --- | --- | --- | --- | --- |")
    for row in evaluation.rows:
        lines.append(
            f"| {row.label} | {greek_params(row.params)} | {row.rmse:.2f} "
            f"| {row.mae:.2f} | {row.mape_percent:.2f} |"
        )
    lines.append("")

    if diagnostics:
        lines.append("## Residual diagnostics (p-values)")
        lines.append("")
        lines.append("| Model | Ljung-Box | Shapiro-Wilk | KPSS |")
        lines.append("| --- | --- | --- | --- |")
        for diag in diagnostics:
            lines.append(
                f"| {diag.label} | {_p_cell(diag.ljung_box)} "
                f"| {_p_cell(diag.shapiro)} | {_p_cell(diag.kpss)} |"
            )
        notes = [(d.label, n) for d in diagnostics for n in d.notes]
        if notes:
            lines.append("")
            for label, note in notes:
                lines.append(f"- {label}: {note}")
        lines.append("")

    if forecasts:
        first = next(iter(forecasts.values()))
        years = [first.first_year + i for i in range(len(first))]
        ordered = [m for m in ("arima", "ses", "hdes", "ensemble") if m in forecasts]
        ordered += [m for m in sorted(forecasts) if m not in ordered]
        lines.append(f"## Forecast ({years[0]}-{years[-1]})")
        lines.append("")
        header = " | ".join(forecast_labels.get(m, m) for m in ordered)
        lines.append(f"| Year | {header} |")
        lines.append("| --- |" + " --- |" * len(ordered))
        for i, year in enumerate(years):
            cells = " | ".join(f"{forecasts[m].values[i]:.2f}" for m in ordered)
            lines.append(f"| {year} | {cells} |")
        lines.append("")

    if evaluation.failures:
        lines.append("## Failures")
        lines.append("")
        for model, reason in evaluation.failures:
            lines.append(f"- {model}: {reason}")
        lines.append("")

    return "\n".join(lines)


# ------------------------------------------------------------- results file


def _format_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_kv(entries: dict) -> str:
    """Serialize a flat mapping to `key = value` lines.

    Scalars are int/float/bool/str; sequences become comma-separated
    scalars. Floats use repr, so parsing recovers them bit-for-bit.
    """
    lines = []
    for key, value in entries.items():
        if not re.fullmatch(r"[A-Za-z0-9_.\-]+", key):
            raise ValueError(f"invalid results key {key!r}")
        if isinstance(value, (list, tuple)):
            if not value:
                raise ValueError(f"empty sequence for {key!r}")
            text = ", ".join(_format_scalar(v) for v in value)
            if len(value) == 1:
                # trailing comma keeps a singleton distinguishable from a scalar
                text += ","
        else:
            text = _format_scalar(value)
        if "\n" in text:
            raise ValueError(f"value for {key!r} contains a newline")
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def _parse_scalar(text: str):
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_kv(text: str) -> dict:
    """Parse `key = value` lines back into a mapping (inverse of format_kv)."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if " = " not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition(" = ")
        key = key.strip()
        if "," in value:
            items = value.split(",")
            if items and items[-1].strip() == "":
                items = items[:-1]  # trailing-comma singleton form
            parts = [_parse_scalar(p.strip()) for p in items]
            if parts and all(isinstance(p, (int, float, bool)) for p in parts):
                out[key] = tuple(parts)
                continue
        out[key] = _parse_scalar(value)
    return out


def write_text_atomic(path: str | os.PathLike, text: str):
    """Write text via a temp file and atomic rename; no partial files."""
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
