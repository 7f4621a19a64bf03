"""Annual time-series value types, differencing transforms, and splitting.

Calendar years are metadata only: every numeric operation indexes by
position, and years exist for splitting, reports, and plot labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ReconstructionError, SeriesLengthError, SplitRangeError


def _as_finite_tuple(values, what: str) -> tuple[float, ...]:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{what} must be one-dimensional")
    if arr.size == 0:
        raise ValueError(f"{what} must contain at least one value")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} must be finite (no NaN or infinity)")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class TimeSeries:
    """Consecutive annual observations of a real-valued quantity.

    ``values[i]`` is the observation for calendar year ``start_year + i``.
    Instances are immutable and safe to share across threads.
    """

    start_year: int
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "start_year", int(self.start_year))
        object.__setattr__(self, "values", _as_finite_tuple(self.values, "series values"))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end_year(self) -> int:
        return self.start_year + len(self.values) - 1

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(range(self.start_year, self.end_year + 1))

    def to_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class DifferencedSeries:
    """A series after ``order`` rounds of first differencing.

    ``initial_values`` holds the ``order`` leading observations consumed by
    the transform, which is exactly what :func:`integrate` needs to undo it.
    ``start_year`` refers to the original, undifferenced series.
    """

    start_year: int
    order: int
    values: tuple[float, ...]
    initial_values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "start_year", int(self.start_year))
        object.__setattr__(self, "order", int(self.order))
        object.__setattr__(self, "values", _as_finite_tuple(self.values, "differenced values"))
        if self.order < 0:
            raise ValueError("differencing order must be non-negative")
        init = tuple(float(v) for v in self.initial_values)
        object.__setattr__(self, "initial_values", init)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Forecast:
    """Point forecasts for consecutive future years.

    ``source`` names the model(s) that produced the values, so combined
    forecasts stay traceable to both parents.
    """

    first_year: int
    values: tuple[float, ...]
    source: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "first_year", int(self.first_year))
        object.__setattr__(self, "values", _as_finite_tuple(self.values, "forecast values"))
        src = (self.source,) if isinstance(self.source, str) else tuple(self.source)
        if not src:
            raise ValueError("forecast must name at least one source model")
        object.__setattr__(self, "source", src)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(range(self.first_year, self.first_year + len(self.values)))


def difference(series: TimeSeries, order: int) -> DifferencedSeries:
    """Difference ``series`` ``order`` times.

    Order 1 maps y_t to y_t - y_{t-1}; higher orders repeat the same step,
    so order 2 equals y_t - 2*y_{t-1} + y_{t-2}. Order 0 is the identity.
    """
    order = int(order)
    if order < 0:
        raise ValueError("differencing order must be non-negative")
    if len(series) <= order:
        raise SeriesLengthError(
            f"order-{order} differencing needs at least {order + 1} observations, "
            f"got {len(series)}"
        )
    vals = series.to_array()
    out = vals.copy()
    for _ in range(order):
        out = out[1:] - out[:-1]
    return DifferencedSeries(
        start_year=series.start_year,
        order=order,
        values=tuple(out),
        initial_values=tuple(vals[:order]),
    )


def integrate(diff: DifferencedSeries) -> TimeSeries:
    """Reverse :func:`difference`, reconstructing the original series.

    Requires ``diff.initial_values`` to hold the ``order`` observations the
    differencing consumed. ``difference(integrate(d), d.order)`` reproduces
    ``d`` and vice versa, up to floating-point associativity.
    """
    order = diff.order
    init = np.asarray(diff.initial_values, dtype=float)
    if init.size != order:
        raise ReconstructionError(
            f"order-{order} integration needs {order} initial values, got {init.size}"
        )
    cur = np.asarray(diff.values, dtype=float)
    for level in range(order - 1, -1, -1):
        # First element of the level-times differenced leading segment.
        head = init.copy()
        for _ in range(level):
            head = head[1:] - head[:-1]
        cur = np.concatenate(([head[0]], cur)).cumsum()
    return TimeSeries(start_year=diff.start_year, values=tuple(cur))


def split_at(series: TimeSeries, last_train_year: int) -> tuple[TimeSeries, TimeSeries]:
    """Split chronologically after ``last_train_year``.

    The training part covers ``start_year..last_train_year`` inclusive; the
    test part covers the remainder. Both sides must be non-empty.
    """
    last_train_year = int(last_train_year)
    if not series.start_year <= last_train_year < series.end_year:
        raise SplitRangeError(
            f"last_train_year {last_train_year} must lie in "
            f"[{series.start_year}, {series.end_year - 1}] so both sides are non-empty"
        )
    cut = last_train_year - series.start_year + 1
    train = TimeSeries(series.start_year, series.values[:cut])
    test = TimeSeries(last_train_year + 1, series.values[cut:])
    return train, test
