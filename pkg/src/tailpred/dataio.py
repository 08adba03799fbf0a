"""CSV ingestion, integer de-truncation jitter, and train/test splitting.

Input files carry a header `date,<name1>,...,<named>` with ISO-8601 dates
and `.` decimal separators; an empty cell marks a missing value and drops
the whole row.  Rows are never reordered and duplicate dates are rejected,
since the train/test split is defined on the original ordering.
"""

from __future__ import annotations

import csv
import datetime
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MultivariateSeries:
    """Time-indexed matrix of complete observations, one column per site."""

    timestamps: tuple
    values: np.ndarray
    column_names: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        n, d = values.shape
        if n < 1:
            raise ValueError("series must contain at least one row")
        if d < 2:
            raise ValueError("series must contain at least two data columns")
        if len(self.timestamps) != n or len(self.column_names) != d:
            raise ValueError("timestamps / column names do not match the value matrix")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite after ingestion filtering")
        ts = tuple(self.timestamps)
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_names", tuple(self.column_names))

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]

    def column(self, name):
        return self.values[:, self.column_names.index(name)]


@dataclass(frozen=True)
class SplitIndex:
    """Disjoint train/test row indices covering the full series."""

    train_rows: np.ndarray
    test_rows: np.ndarray

    def __post_init__(self):
        train = np.asarray(self.train_rows, dtype=int)
        test = np.asarray(self.test_rows, dtype=int)
        if np.intersect1d(train, test).size:
            raise ValueError("train and test rows overlap")
        object.__setattr__(self, "train_rows", train)
        object.__setattr__(self, "test_rows", test)


def load_csv(path):
    """Read a multivariate series, dropping rows with any missing cell.

    Raises ValueError on unreadable structure, non-numeric cells (named by
    row and column), fewer than two data columns, or zero complete rows.
    """
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if len(header) < 3:
            raise ValueError(f"{path}: need a date column and at least 2 data columns")
        names = tuple(h.strip() for h in header[1:])
        timestamps, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(c.strip() == "" for c in rec):
                continue
            if len(rec) != len(header):
                raise ValueError(f"{path}: row {lineno} has {len(rec)} cells, expected {len(header)}")
            cells = [c.strip() for c in rec[1:]]
            if any(c == "" for c in cells):
                continue  # missing value: drop the row
            try:
                ts = datetime.date.fromisoformat(rec[0].strip())
            except ValueError:
                raise ValueError(f"{path}: row {lineno}: bad date {rec[0]!r}") from None
            vals = []
            for name, c in zip(names, cells):
                try:
                    vals.append(float(c))
                except ValueError:
                    raise ValueError(
                        f"{path}: row {lineno}, column {name!r}: non-numeric value {c!r}"
                    ) from None
            timestamps.append(ts)
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no complete rows")
    return MultivariateSeries(
        timestamps=tuple(timestamps), values=np.array(rows), column_names=names
    )


def write_csv(series, path):
    """Write a series in the format load_csv reads back."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["date", *series.column_names])
        for ts, row in zip(series.timestamps, series.values):
            writer.writerow([ts.isoformat(), *(repr(float(v)) for v in row)])


def jitter(series, half_width=0.5, seed=0):
    """Add independent Uniform(-half_width, half_width) noise to every entry.

    Integer-recorded measurements behave more like the underlying
    continuous variable afterwards.  Deterministic given the seed.
    """
    if half_width < 0:
        raise ValueError("half_width must be nonnegative")
    if half_width == 0:
        return series
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-half_width, half_width, size=series.values.shape)
    return MultivariateSeries(
        timestamps=series.timestamps,
        values=series.values + noise,
        column_names=series.column_names,
    )


def split(series, every_kth=3):
    """Every k-th row (1-based) goes to the test set, the rest to training."""
    if every_kth < 2:
        raise ValueError("every_kth must be at least 2")
    if every_kth > series.n:
        raise ValueError(
            f"every_kth = {every_kth} leaves an empty test set for n = {series.n}"
        )
    idx = np.arange(series.n)
    test = idx[(idx + 1) % every_kth == 0]
    train = idx[(idx + 1) % every_kth != 0]
    return SplitIndex(train_rows=train, test_rows=test)


def take_rows(series, rows):
    """Sub-series at the given row indices (kept in original order)."""
    rows = np.sort(np.asarray(rows, dtype=int))
    return MultivariateSeries(
        timestamps=tuple(series.timestamps[i] for i in rows),
        values=series.values[rows],
        column_names=series.column_names,
    )


def synthetic_dates(n, start=datetime.date(2000, 1, 1)):
    """n consecutive daily dates, for simulated series."""
    return tuple(start + datetime.timedelta(days=i) for i in range(n))
