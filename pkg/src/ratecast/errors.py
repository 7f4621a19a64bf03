"""Exception hierarchy shared by the core, the HTTP service, and the CLI.

Two broad kinds matter at the boundaries: problems with the caller's data
(``DataError``, HTTP 400, CLI exit 2) and failures inside model estimation
(``ModelError``, HTTP 422, CLI exit 3). I/O problems surface as ``OSError``
and map to CLI exit 4.
"""

from __future__ import annotations


class RatecastError(Exception):
    """Base class for every error raised by this package."""


class DataError(RatecastError, ValueError):
    """Invalid input data or arguments."""


class SeriesLengthError(DataError):
    """A series is too short for the requested operation."""


class SplitRangeError(DataError):
    """A train/test boundary falls outside the usable year range."""


class ReconstructionError(DataError):
    """A differenced series cannot be integrated back (bad initial values)."""


class DegenerateSeriesError(DataError):
    """Zero-variance or all-identical input where variation is required."""


class PlotError(DataError):
    """A plot cannot be drawn from the given data (e.g. fewer than 2 points)."""


class AlignmentError(DataError):
    """Two vectors or forecasts do not share the required span."""


class InvalidDfError(DataError):
    """A test was configured with non-positive degrees of freedom."""


class CsvSchemaError(DataError):
    """A CSV input violates the `year,rate` schema.

    ``line`` is the 1-based physical line number of the offending row when
    one can be identified.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class ModelError(RatecastError, RuntimeError):
    """A model could not be estimated."""


class ConstraintError(ModelError):
    """Parameters violate stationarity/invertibility constraints, or a
    recursion lost positive definiteness."""


class ConditioningError(ModelError):
    """A filtering recursion produced a non-positive prediction variance."""


class ConvergenceError(ModelError):
    """The optimizer did not converge within its restart budget.

    Carries the best point seen so far for postmortems.
    """

    def __init__(self, message: str, best_params=None, best_objective=None):
        super().__init__(message)
        self.best_params = best_params
        self.best_objective = best_objective


class SearchExhaustedError(ModelError):
    """Every candidate in a model-order search failed to fit."""
