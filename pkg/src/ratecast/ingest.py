"""CSV ingestion for annual rate series.

The accepted format is a UTF-8 text file with the exact header ``year,rate``
followed by one row per year. Years must be consecutive ascending integers
and rates finite positive numbers; anything else is rejected with the
offending 1-based line number so the user can fix the file directly.
"""

from __future__ import annotations

import csv
import io
import math
import os

from .errors import CsvSchemaError
from .series import TimeSeries

EXPECTED_HEADER = ("year", "rate")


def load_csv(path: str | os.PathLike) -> TimeSeries:
    """Parse a `year,rate` CSV file into a TimeSeries.

    LF and CRLF line endings are both accepted. Blank lines at the end of
    the file are tolerated; blank or short rows elsewhere are errors.
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise CsvSchemaError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return parse_csv(text)


def parse_csv(text: str) -> TimeSeries:
    """Parse CSV text (see load_csv for the format contract)."""
    if not text.strip():
        raise CsvSchemaError("empty input: expected a year,rate header and data rows")

    reader = csv.reader(io.StringIO(text))
    rows = list(reader)

    header = tuple(cell.strip().lower() for cell in rows[0])
    if header != EXPECTED_HEADER:
        raise CsvSchemaError(
            f"expected header 'year,rate', got {','.join(rows[0])!r}", line=1
        )

    years: list[int] = []
    rates: list[float] = []
    for i, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            # trailing blank line from a final newline is fine
            if i == len(rows) and not any(cell.strip() for cell in row):
                continue
            raise CsvSchemaError("blank row in data section", line=i)
        if len(row) != 2:
            raise CsvSchemaError(
                f"expected 2 columns, got {len(row)}", line=i
            )
        year_text, rate_text = row[0].strip(), row[1].strip()
        try:
            year = int(year_text)
        except ValueError:
            raise CsvSchemaError(f"year {year_text!r} is not an integer", line=i) from None
        try:
            rate = float(rate_text)
        except ValueError:
            raise CsvSchemaError(f"rate {rate_text!r} is not a number", line=i) from None
        if not math.isfinite(rate):
            raise CsvSchemaError(f"rate {rate_text!r} is not finite", line=i)
        if rate <= 0.0:
            raise CsvSchemaError(f"rate must be positive, got {rate_text}", line=i)
        if years:
            expected = years[-1] + 1
            if year == years[-1]:
                raise CsvSchemaError(f"duplicate year {year}", line=i)
            if year != expected:
                if year > expected:
                    raise CsvSchemaError(
                        f"gap in years: missing {expected}", line=i
                    )
                raise CsvSchemaError(
                    f"years must ascend: {year} after {years[-1]}", line=i
                )
        years.append(year)
        rates.append(rate)

    if not years:
        raise CsvSchemaError("no data rows after the header")
    return TimeSeries(start_year=years[0], values=tuple(rates))
