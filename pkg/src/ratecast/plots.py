"""Self-contained SVG charts for series, residuals, fits, and forecasts.

Every renderer returns a complete SVG document as a string with no external
references, so the files open anywhere and diff cleanly. All numeric output
goes through fixed-precision formatting, which makes renders byte-identical
across runs for the same inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .diagnostics import acf_values
from .errors import PlotError
from .series import Forecast, TimeSeries

_FONT = "font-family='Helvetica, Arial, sans-serif'"

# fixed per-model palette so rerenders never shuffle colors
MODEL_COLORS = {
    "observed": "#333333",
    "arima": "#1f77b4",
    "ses": "#2ca02c",
    "hdes": "#d62728",
    "ensemble": "#9467bd",
}
_FALLBACK_COLORS = ("#ff7f0e", "#8c564b", "#e377c2", "#17becf")


@dataclass(frozen=True)
class LineSpec:
    """One polyline on a year-axis chart."""

    label: str
    start_year: int
    values: tuple[float, ...]
    color: str
    dashed: bool = False

    @property
    def end_year(self) -> int:
        return self.start_year + len(self.values) - 1


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _nice_step(span: float, max_ticks: int) -> float:
    """Smallest 1/2/2.5/5 x 10^k step giving at most max_ticks intervals."""
    if span <= 0.0:
        return 1.0
    raw = span / max_ticks
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if mag * mult >= raw:
            return mag * mult
    return mag * 10.0


def _ticks(lo: float, hi: float, max_ticks: int = 7) -> list[float]:
    step = _nice_step(hi - lo, max_ticks)
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-9 * max(1.0, abs(hi)):
        out.append(round(t, 10))
        t += step
    return out


def _year_ticks(lo: int, hi: int, max_ticks: int = 9) -> list[int]:
    span = hi - lo
    for step in (1, 2, 5, 10, 20, 50):
        if span / step <= max_ticks:
            break
    first = math.ceil(lo / step) * step
    return list(range(first, hi + 1, step))


class _Canvas:
    """Accumulates SVG elements for one plot area with data-space mapping."""

    def __init__(self, width, height, x_range, y_range, margins=(46, 14, 30, 38)):
        self.width = width
        self.height = height
        self.ml, self.mr, self.mt, self.mb = margins
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            # flat data still gets a visible band around the line
            pad = 1.0 if self.y0 == 0.0 else abs(self.y0) * 0.1 + 1e-9
            self.y0, self.y1 = self.y0 - pad, self.y1 + pad
        self.parts: list[str] = []

    def px(self, x: float) -> float:
        inner = self.width - self.ml - self.mr
        return self.ml + (x - self.x0) / (self.x1 - self.x0) * inner

    def py(self, y: float) -> float:
        inner = self.height - self.mt - self.mb
        return self.height - self.mb - (y - self.y0) / (self.y1 - self.y0) * inner

    def add(self, element: str):
        self.parts.append(element)

    def line(self, x1, y1, x2, y2, stroke, width=1.0, dashed=False, opacity=None):
        dash = " stroke-dasharray='5,4'" if dashed else ""
        op = f" stroke-opacity='{opacity}'" if opacity is not None else ""
        self.add(
            f"<line x1='{_fmt(x1)}' y1='{_fmt(y1)}' x2='{_fmt(x2)}' y2='{_fmt(y2)}' "
            f"stroke='{stroke}' stroke-width='{width}'{dash}{op}/>"
        )

    def polyline(self, points, color, width=1.6, dashed=False):
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
        dash = " stroke-dasharray='6,4'" if dashed else ""
        self.add(
            f"<polyline fill='none' stroke='{color}' stroke-width='{width}'{dash} "
            f"points='{pts}'/>"
        )

    def text(self, x, y, s, size=11, anchor="middle", color="#444444", bold=False):
        weight = " font-weight='bold'" if bold else ""
        self.add(
            f"<text x='{_fmt(x)}' y='{_fmt(y)}' {_FONT} font-size='{size}' "
            f"text-anchor='{anchor}' fill='{color}'{weight}>{s}</text>"
        )

    def rect(self, x, y, w, h, fill, opacity=1.0):
        self.add(
            f"<rect x='{_fmt(x)}' y='{_fmt(y)}' width='{_fmt(w)}' height='{_fmt(h)}' "
            f"fill='{fill}' fill-opacity='{opacity}'/>"
        )

    def circle(self, x, y, r, fill):
        self.add(
            f"<circle cx='{_fmt(x)}' cy='{_fmt(y)}' r='{r}' fill='{fill}'/>"
        )

    def frame_and_axes(self, x_tick_vals, x_tick_labels, y_tick_vals, title=None):
        left, right = self.ml, self.width - self.mr
        top, bottom = self.mt, self.height - self.mb
        for yv in y_tick_vals:
            y = self.py(yv)
            self.line(left, y, right, y, "#dddddd", 0.7)
            label = f"{yv:g}"
            self.text(left - 6, y + 3.5, label, size=10, anchor="end")
        for xv, lab in zip(x_tick_vals, x_tick_labels):
            x = self.px(xv)
            self.line(x, bottom, x, bottom + 4, "#888888", 0.8)
            self.text(x, bottom + 16, lab, size=10)
        self.line(left, bottom, right, bottom, "#888888", 1.0)
        self.line(left, top, left, bottom, "#888888", 1.0)
        if title:
            self.text((left + right) / 2, top - 10, title, size=13, bold=True,
                      color="#222222")

    def svg(self) -> str:
        body = "\n".join(self.parts)
        return (
            f"<svg xmlns='http://www.w3.org/2000/svg' width='{self.width}' "
            f"height='{self.height}' viewBox='0 0 {self.width} {self.height}'>\n"
            f"<rect width='{self.width}' height='{self.height}' fill='#ffffff'/>\n"
            f"{body}\n</svg>\n"
        )


def _require_points(n: int, what: str):
    if n < 2:
        raise PlotError(f"{what} needs at least 2 points, got {n}")


def _legend(canvas: _Canvas, specs, x_right: float, y_top: float):
    for i, spec in enumerate(specs):
        y = y_top + 15 * i
        canvas.line(x_right - 130, y - 4, x_right - 106, y - 4, spec.color, 2.2,
                    dashed=spec.dashed)
        canvas.text(x_right - 100, y, spec.label, size=11, anchor="start",
                    color="#333333")


def render_year_lines(
    specs: list[LineSpec],
    title: str,
    width: int = 760,
    height: int = 430,
    shade_from_year: int | None = None,
    split_year: int | None = None,
) -> str:
    """Generic chart: one or more year-indexed lines on shared axes."""
    if not specs:
        raise PlotError("nothing to plot")
    for spec in specs:
        _require_points(len(spec.values), f"line {spec.label!r}")
    yr_lo = min(s.start_year for s in specs)
    yr_hi = max(s.end_year for s in specs)
    all_vals = np.concatenate([np.asarray(s.values, dtype=float) for s in specs])
    c = _Canvas(width, height, (yr_lo, yr_hi), (float(all_vals.min()), float(all_vals.max())),
                margins=(52, 16, 34, 40))
    if shade_from_year is not None and shade_from_year < yr_hi:
        x_from = c.px(max(shade_from_year, yr_lo))
        c.rect(x_from, c.mt, c.px(yr_hi) - x_from, height - c.mt - c.mb,
               "#bbbbbb", opacity=0.25)
    years = _year_ticks(yr_lo, yr_hi)
    c.frame_and_axes(years, [str(y) for y in years], _ticks(c.y0, c.y1), title)
    if split_year is not None and yr_lo <= split_year <= yr_hi:
        x = c.px(split_year)
        c.line(x, c.mt, x, height - c.mb, "#777777", 1.0, dashed=True)
    for spec in specs:
        pts = [(c.px(spec.start_year + i), c.py(v)) for i, v in enumerate(spec.values)]
        c.polyline(pts, spec.color, dashed=spec.dashed)
    if len(specs) > 1:
        _legend(c, specs, width - c.mr - 8, c.mt + 16)
    return c.svg()


def render_observed(series: TimeSeries, title: str = "Observed series") -> str:
    _require_points(len(series), "observed series")
    spec = LineSpec("observed", series.start_year, series.values,
                    MODEL_COLORS["observed"])
    return render_year_lines([spec], title)


def render_fitted_vs_observed(
    observed: TimeSeries,
    fitted: list[LineSpec],
    split_year: int | None = None,
    title: str = "Observed and fitted values",
) -> str:
    _require_points(len(observed), "observed series")
    specs = [LineSpec("observed", observed.start_year, observed.values,
                      MODEL_COLORS["observed"])] + list(fitted)
    return render_year_lines(specs, title, split_year=split_year)


def render_forecast(
    observed: TimeSeries,
    forecasts: dict[str, Forecast],
    labels: dict[str, str] | None = None,
    title: str = "Forecast",
) -> str:
    """Observed history plus forecast paths, forecast years shaded."""
    _require_points(len(observed), "observed series")
    if not forecasts:
        raise PlotError("no forecasts to plot")
    labels = labels or {}
    specs = [LineSpec("observed", observed.start_year, observed.values,
                      MODEL_COLORS["observed"])]
    fallback = iter(_FALLBACK_COLORS)
    for model in sorted(forecasts):
        f = forecasts[model]
        color = MODEL_COLORS.get(model) or next(fallback)
        if f.first_year == observed.end_year + 1:
            # anchor the forecast line to the last observation so the path
            # connects and a one-step forecast still draws a segment
            values = (observed.values[-1],) + tuple(f.values)
            start = observed.end_year
        else:
            values = tuple(f.values)
            start = f.first_year
        specs.append(LineSpec(labels.get(model, model), start, values,
                              color, dashed=True))
    return render_year_lines(specs, title, shade_from_year=observed.end_year)


def _acf_panel(c: _Canvas, residuals: np.ndarray):
    n = residuals.size
    max_lag = min(16, n - 2)
    band = 1.96 / math.sqrt(n)
    r = acf_values(residuals, max_lag) if max_lag >= 1 else np.empty(0)
    top, bottom = c.mt, c.height - c.mb
    c.rect(c.px(0.0), c.py(band), c.px(max_lag + 1) - c.px(0.0),
           c.py(-band) - c.py(band), "#9ecae1", opacity=0.45)
    zero_y = c.py(0.0)
    c.line(c.px(0.0), zero_y, c.px(max_lag + 1), zero_y, "#888888", 0.8)
    for k, rk in enumerate(r, start=1):
        x = c.px(float(k))
        c.line(x, zero_y, x, c.py(float(rk)), "#1f77b4", 2.4)


def _qq_points(residuals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = residuals.size
    order = np.sort(residuals)
    # Blom plotting positions
    probs = (np.arange(1, n + 1) - 0.375) / (n + 0.25)
    theo = stats.norm.ppf(probs)
    return theo, order


def render_residual_panel(
    residuals,
    start_year: int,
    model_label: str,
) -> str:
    """Three-panel residual display: series, ACF with band, normal Q-Q."""
    res = np.asarray(residuals, dtype=float)
    _require_points(res.size, "residual series")
    width, height = 960, 330
    panel_w = 300
    gap = 20
    n = res.size

    # residual series vs year
    c1 = _Canvas(panel_w, height, (start_year, start_year + n - 1),
                 (float(res.min()), float(res.max())), margins=(46, 8, 34, 38))
    years = _year_ticks(start_year, start_year + n - 1, max_ticks=5)
    c1.frame_and_axes(years, [str(y) for y in years], _ticks(c1.y0, c1.y1, 6),
                      "Residuals")
    zero = c1.py(0.0)
    if c1.y0 <= 0.0 <= c1.y1:
        c1.line(c1.ml, zero, panel_w - c1.mr, zero, "#aaaaaa", 0.8, dashed=True)
    c1.polyline([(c1.px(start_year + i), c1.py(v)) for i, v in enumerate(res)],
                "#333333", 1.4)

    # ACF bars
    max_lag = min(16, n - 2)
    band = 1.96 / math.sqrt(n)
    r = acf_values(res, max_lag) if max_lag >= 1 else np.empty(0)
    ylim = max(band * 1.3, float(np.max(np.abs(r))) * 1.15 if r.size else 0.5)
    c2 = _Canvas(panel_w, height, (0.0, max_lag + 1.0), (-ylim, ylim),
                 margins=(46, 8, 34, 38))
    lag_ticks = [k for k in range(0, max_lag + 1, max(1, (max_lag + 1) // 6 or 1))]
    c2.frame_and_axes(lag_ticks, [str(k) for k in lag_ticks],
                      _ticks(-ylim, ylim, 5), "Residual ACF")
    _acf_panel(c2, res)

    # normal Q-Q
    theo, order = _qq_points(res)
    pad_x = (theo[-1] - theo[0]) * 0.06 + 1e-9
    ylo, yhi = float(order[0]), float(order[-1])
    c3 = _Canvas(panel_w, height, (float(theo[0]) - pad_x, float(theo[-1]) + pad_x),
                 (ylo, yhi), margins=(46, 8, 34, 38))
    c3.frame_and_axes(_ticks(c3.x0, c3.x1, 5),
                      [f"{t:g}" for t in _ticks(c3.x0, c3.x1, 5)],
                      _ticks(c3.y0, c3.y1, 6), "Normal Q-Q")
    q25t, q75t = np.percentile(theo, 25), np.percentile(theo, 75)
    q25s, q75s = np.percentile(order, 25), np.percentile(order, 75)
    if q75t > q25t and q75s > q25s:
        slope = (q75s - q25s) / (q75t - q25t)
        inter = q25s - slope * q25t
        xa, xb = c3.x0, c3.x1
        c3.line(c3.px(xa), c3.py(inter + slope * xa),
                c3.px(xb), c3.py(inter + slope * xb), "#d62728", 1.2, dashed=True)
    for t, o in zip(theo, order):
        c3.circle(c3.px(float(t)), c3.py(float(o)), 2.0, "#1f77b4")

    panels = []
    for i, c in enumerate((c1, c2, c3)):
        x_off = i * (panel_w + gap)
        inner = "\n".join(c.parts)
        panels.append(f"<g transform='translate({x_off},0)'>\n{inner}\n</g>")
    body = "\n".join(panels)
    return (
        f"<svg xmlns='http://www.w3.org/2000/svg' width='{width}' height='{height}' "
        f"viewBox='0 0 {width} {height}'>\n"
        f"<rect width='{width}' height='{height}' fill='#ffffff'/>\n"
        f"<text x='{width // 2}' y='16' {_FONT} font-size='13' text-anchor='middle' "
        f"fill='#222222' font-weight='bold'>{model_label}</text>\n"
        f"{body}\n</svg>\n"
    )
