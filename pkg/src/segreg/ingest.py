"""Loading daily time series from CSV files.

Rows are sorted by date and mapped onto the equispaced covariate
``x = rank / n`` in ``(0, 1]``.  Gaps in the calendar and repeated dates are
rejected rather than bridged.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Optional

import numpy as np

from .errors import DataError
from .model import EMPIRICAL, Dataset

LOG = "log"
IDENTITY = "identity"
TRANSFORMS = (LOG, IDENTITY)


@dataclass(frozen=True)
class SeriesSpec:
    """Where and how to read a series.

    Parameters
    ----------
    path : str
    date_column, value_column : str
    transform : str
        ``"log"`` or ``"identity"``.
    start, end : datetime.date, optional
        Inclusive date window, applied after sorting.
    max_rows : int, optional
        Keep only the first ``max_rows`` rows of the window.
    """

    path: str
    date_column: str = "date"
    value_column: str = "value"
    transform: str = LOG
    start: Optional[date] = None
    end: Optional[date] = None
    max_rows: Optional[int] = None

    def __post_init__(self) -> None:
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.max_rows is not None and self.max_rows < 1:
            raise ValueError("max_rows must be positive")

    def to_dict(self) -> dict:
        return {"path": str(self.path), "date_column": self.date_column,
                "value_column": self.value_column, "transform": self.transform,
                "start": self.start.isoformat() if self.start else None,
                "end": self.end.isoformat() if self.end else None,
                "max_rows": self.max_rows}


@dataclass(frozen=True)
class Series:
    """A loaded series: the dataset plus the dates behind each covariate value."""

    data: Dataset
    dates: tuple
    values: np.ndarray
    spec: SeriesSpec

    def date_at(self, x: float) -> date:
        """Date of the observation whose covariate value is nearest to ``x``."""
        i = int(np.clip(math.ceil(x * len(self.dates) - 1e-9) - 1, 0, len(self.dates) - 1))
        return self.dates[i]


def parse_date(text: str) -> date:
    """Parse an ISO-8601 (``2020-03-13``) or ``DD-MMM-YY`` (``13-Mar-20``) date."""
    s = text.strip()
    try:
        return date.fromisoformat(s)
    except ValueError:
        pass
    try:
        return datetime.strptime(s, "%d-%b-%y").date()
    except ValueError:
        raise DataError(f"unparseable date {text!r}") from None


def load_series_csv(spec: SeriesSpec) -> Series:
    """Read a dated series and map it onto ``(0, 1]``.

    Raises
    ------
    DataError
        Missing file or columns, unparseable fields, non-positive values under
        the log transform, duplicate or missing days, or fewer than two rows.
    """
    try:
        with open(spec.path, newline="", encoding="utf-8-sig") as fh:
            reader = csv.DictReader(fh)
            fields = reader.fieldnames or []
            for col in (spec.date_column, spec.value_column):
                if col not in fields:
                    raise DataError(f"column {col!r} not found in {spec.path}")
            rows = [(parse_date(r[spec.date_column]), r[spec.value_column]) for r in reader]
    except OSError as exc:
        raise DataError(f"cannot read {spec.path}: {exc}") from exc
    parsed = []
    for d, raw in rows:
        try:
            parsed.append((d, float(raw)))
        except (TypeError, ValueError):
            raise DataError(f"non-numeric value {raw!r} on {d.isoformat()}") from None
    parsed.sort(key=lambda r: r[0])
    if spec.start is not None:
        parsed = [r for r in parsed if r[0] >= spec.start]
    if spec.end is not None:
        parsed = [r for r in parsed if r[0] <= spec.end]
    if spec.max_rows is not None:
        parsed = parsed[: spec.max_rows]
    if len(parsed) < 2:
        raise DataError("insufficient data: need at least two rows")
    dates = tuple(r[0] for r in parsed)
    for prev, cur in zip(dates, dates[1:]):
        if cur == prev:
            raise DataError(f"duplicate date {cur.isoformat()}")
        if cur - prev != timedelta(days=1):
            raise DataError(f"missing days between {prev.isoformat()} and {cur.isoformat()}")
    values = np.array([r[1] for r in parsed], dtype=float)
    if not np.all(np.isfinite(values)):
        raise DataError("non-finite values in series")
    if spec.transform == LOG:
        if np.any(values <= 0):
            bad = dates[int(np.argmax(values <= 0))]
            raise DataError(f"non-positive value on {bad.isoformat()} under log transform")
        y = np.log(values)
    else:
        y = values.copy()
    n = len(dates)
    x = np.arange(1, n + 1) / n
    values.setflags(write=False)
    return Series(Dataset(x, y, (0.0, 1.0), EMPIRICAL), dates, values, spec)
