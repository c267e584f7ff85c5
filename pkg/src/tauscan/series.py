"""Input series containers.

Two views of the data are used throughout the package. ``IndexedSeries``
is the working representation: observations on a contiguous integer time
axis, which is what the window scan and the model fitters consume.
``PriceSeries`` wraps a dated log-price history loaded from CSV and maps
between calendar dates and integer indices.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, SeriesError


@dataclass(frozen=True)
class IndexedSeries:
    """Observations y(t) on the contiguous integer axis t = start .. start+n-1."""

    values: np.ndarray
    start: int = 0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise SeriesError("series values must be a non-empty 1-d array")
        if not np.all(np.isfinite(vals)):
            raise SeriesError("series values must be finite")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "start", int(self.start))

    def __len__(self) -> int:
        return self.values.size

    @property
    def end(self) -> int:
        """Last covered index (inclusive)."""
        return self.start + self.values.size - 1

    def window(self, t1: int, t2: int) -> tuple[np.ndarray, np.ndarray]:
        """Return (t, y) for the inclusive index range [t1, t2].

        Raises:
            InsufficientDataError: if the range is empty or not fully covered.
        """
        if t1 > t2:
            raise InsufficientDataError(f"empty window: t1={t1} > t2={t2}")
        if t1 < self.start or t2 > self.end:
            raise InsufficientDataError(
                f"window [{t1}, {t2}] not covered by series [{self.start}, {self.end}]"
            )
        lo = t1 - self.start
        hi = t2 - self.start + 1
        t = np.arange(t1, t2 + 1, dtype=float)
        return t, self.values[lo:hi].copy()


def _parse_date(token: str, line_no: int) -> np.datetime64:
    try:
        return np.datetime64(token.strip(), "D")
    except ValueError:
        raise SeriesError(f"line {line_no}: invalid ISO date {token!r}") from None


@dataclass(frozen=True)
class PriceSeries:
    """Dated log-price history with strictly increasing dates.

    Index 0 is the first row of the file; the integer axis is row order,
    not calendar arithmetic, so gaps (weekends, holidays) are allowed.
    """

    dates: np.ndarray
    log_price: np.ndarray
    _index_of: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        logp = np.asarray(self.log_price, dtype=float)
        if dates.ndim != 1 or dates.size == 0 or dates.shape != logp.shape:
            raise SeriesError("dates and log_price must be non-empty 1-d arrays of equal length")
        if not np.all(np.isfinite(logp)):
            raise SeriesError("log prices must be finite")
        diffs = np.diff(dates)
        if dates.size > 1 and not np.all(diffs > np.timedelta64(0, "D")):
            bad = int(np.argmin(diffs > np.timedelta64(0, "D"))) + 1
            raise SeriesError(f"dates must be strictly increasing (violation at row {bad})")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "log_price", logp)
        object.__setattr__(self, "_index_of", {d: i for i, d in enumerate(dates)})

    def __len__(self) -> int:
        return self.dates.size

    def index_of(self, date) -> int:
        """Integer index of an exact calendar date in the series."""
        key = np.datetime64(date, "D")
        try:
            return self._index_of[key]
        except KeyError:
            raise SeriesError(
                f"date {key} not present in series ({self.dates[0]} .. {self.dates[-1]})"
            ) from None

    def date_of(self, index: int) -> np.datetime64:
        if not 0 <= index < len(self):
            raise SeriesError(f"index {index} out of range 0 .. {len(self) - 1}")
        return self.dates[index]

    def as_indexed(self) -> IndexedSeries:
        """Log prices on the integer axis 0 .. n-1."""
        return IndexedSeries(self.log_price, start=0)

    @classmethod
    def from_csv(cls, path) -> "PriceSeries":
        return load_csv(path)


def load_csv(path) -> PriceSeries:
    """Load a ``date,price`` or ``date,log_price`` CSV into a PriceSeries.

    The header decides the value column. Raw prices must be strictly
    positive and are log-transformed on load; a log_price column is taken
    as is. Errors carry 1-based line numbers (the header is line 1).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SeriesError("empty CSV: missing header") from None
        cols = [c.strip().lower() for c in header]
        if cols == ["date", "price"]:
            take_log = True
        elif cols == ["date", "log_price"]:
            take_log = False
        else:
            raise SeriesError(
                f"line 1: expected header date,price or date,log_price, got {','.join(header)!r}"
            )
        dates = []
        values = []
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise SeriesError(f"line {line_no}: expected 2 fields, got {len(row)}")
            dates.append(_parse_date(row[0], line_no))
            try:
                val = float(row[1])
            except ValueError:
                raise SeriesError(f"line {line_no}: invalid number {row[1]!r}") from None
            if take_log:
                if val <= 0:
                    raise SeriesError(f"line {line_no}: price must be positive, got {val}")
                val = float(np.log(val))
            values.append(val)
    if not dates:
        raise SeriesError("CSV has a header but no data rows")
    return PriceSeries(np.array(dates, dtype="datetime64[D]"), np.array(values))


def write_series_csv(series: PriceSeries, path) -> None:
    """Emit a date,log_price CSV. Floats go through repr, so a load of
    the written file reproduces the values bit for bit."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "log_price"])
        for d, v in zip(series.dates, series.log_price):
            w.writerow([str(d), repr(float(v))])
