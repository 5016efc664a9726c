"""Weekly ILI series ingestion, gap repair, log transforms, and lag embedding.

The on-disk format is a UTF-8 CSV with header ``year,week,ili_rate``, one row
per week, where an empty ``ili_rate`` cell marks a missing observation.
All operations are pure: they return new objects and never mutate inputs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CalendarError,
    CsvFormatError,
    DomainError,
    InsufficientDataError,
)

CSV_HEADER = ("year", "week", "ili_rate")


@dataclass(frozen=True)
class IliSeries:
    """Calendar-indexed weekly rate series with a missing-value mask.

    ``rates`` holds NaN wherever ``missing`` is set. The calendar must be
    strictly increasing by (year, week) with week numbers in 1..53.
    """

    years: np.ndarray
    weeks: np.ndarray
    rates: np.ndarray
    missing: np.ndarray

    def __post_init__(self):
        years = np.asarray(self.years, dtype=np.int64)
        weeks = np.asarray(self.weeks, dtype=np.int64)
        rates = np.asarray(self.rates, dtype=np.float64)
        missing = np.asarray(self.missing, dtype=bool)
        if not (len(years) == len(weeks) == len(rates) == len(missing)):
            raise ValueError("series columns must have equal length")
        if np.any((weeks < 1) | (weeks > 53)):
            raise CalendarError("week numbers must lie in 1..53")
        key = years * 64 + weeks
        if np.any(np.diff(key) <= 0):
            bad = int(np.argmax(np.diff(key) <= 0)) + 1
            raise CalendarError(
                f"calendar must be strictly increasing; violation at row {bad} "
                f"({years[bad]}, week {weeks[bad]})"
            )
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "weeks", weeks)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "missing", missing)

    def __len__(self) -> int:
        return len(self.rates)

    def with_rates(self, rates: np.ndarray, missing=None) -> "IliSeries":
        """Copy of this series with replaced rate values (same calendar)."""
        if missing is None:
            missing = np.zeros(len(rates), dtype=bool)
        return IliSeries(self.years, self.weeks, rates, missing)


def load_series(path) -> IliSeries:
    """Read a ``year,week,ili_rate`` CSV into a validated series.

    Empty rate cells become missing points. Raises CsvFormatError with the
    offending line number for malformed rows, CalendarError for ordering
    violations.
    """
    path = Path(path)
    years, weeks, rates, missing = [], [], [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        if tuple(h.strip().lower() for h in header) != CSV_HEADER:
            raise CsvFormatError(
                f"{path}: line 1: expected header {','.join(CSV_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 3:
                raise CsvFormatError(f"{path}: line {lineno}: expected 3 columns")
            try:
                year = int(row[0])
                week = int(row[1])
            except ValueError:
                raise CsvFormatError(
                    f"{path}: line {lineno}: year and week must be integers"
                ) from None
            cell = row[2].strip()
            if cell == "":
                rate, miss = np.nan, True
            else:
                try:
                    rate = float(cell)
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: line {lineno}: rate {cell!r} is not a number"
                    ) from None
                if not np.isfinite(rate) or rate <= 0.0:
                    raise CsvFormatError(
                        f"{path}: line {lineno}: rate must be a positive number"
                    )
                miss = False
            years.append(year)
            weeks.append(week)
            rates.append(rate)
            missing.append(miss)
    if not years:
        raise CsvFormatError(f"{path}: no data rows")
    return IliSeries(np.array(years), np.array(weeks), np.array(rates), np.array(missing))


def write_series_csv(series: IliSeries, path) -> None:
    """Write a series in the ingestion schema (missing cells left empty)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for year, week, rate, miss in zip(
            series.years, series.weeks, series.rates, series.missing
        ):
            writer.writerow([int(year), int(week), "" if miss else repr(float(rate))])


def impute_missing(series: IliSeries) -> IliSeries:
    """Fill missing points deterministically.

    Interior single-week gaps get the mean of the neighbouring observations;
    longer interior gaps are linearly interpolated; gaps touching either end
    copy the nearest observed value. Idempotent.
    """
    if not np.any(series.missing):
        return series
    observed = ~series.missing
    if not np.any(observed):
        raise DomainError("cannot impute a series with no observed values")
    positions = np.arange(len(series), dtype=np.float64)
    # np.interp is exactly the neighbour-mean rule for single interior gaps,
    # linear interpolation for longer ones, and nearest-value copy at the ends.
    filled = series.rates.copy()
    filled[series.missing] = np.interp(
        positions[series.missing], positions[observed], series.rates[observed]
    )
    return series.with_rates(filled)


def log_transform(series: IliSeries) -> IliSeries:
    """Map every rate r to log10(r). Requires a gap-free, positive series."""
    if np.any(series.missing):
        raise DomainError("impute missing values before the log transform")
    if np.any(series.rates <= 0.0) or not np.all(np.isfinite(series.rates)):
        raise DomainError("log transform requires strictly positive rates")
    return series.with_rates(np.log10(series.rates))


def inverse_log_transform(series: IliSeries) -> IliSeries:
    """Map every value v back to 10**v (inverse of log_transform)."""
    return series.with_rates(
        np.power(10.0, series.rates), missing=series.missing.copy()
    )


@dataclass(frozen=True)
class SupervisedDataset:
    """Lag-embedded inputs paired with an H-step target matrix.

    Row i of ``inputs`` is ``[I_t, I_{t-1}, ..., I_{t-d+1}]`` (column j holds
    lag j) and row i of ``targets`` is ``[I_{t+1}, ..., I_{t+H}]`` where
    ``t = origin_index[i]`` indexes the source series.
    """

    inputs: np.ndarray
    targets: np.ndarray
    origin_index: np.ndarray
    n_lags: int
    horizon: int

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64)
        origin = np.asarray(self.origin_index, dtype=np.int64)
        n = len(origin)
        if inputs.shape != (n, self.n_lags):
            raise ValueError("inputs shape does not match n_lags")
        if targets.shape != (n, self.horizon):
            raise ValueError("targets shape does not match horizon")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "origin_index", origin)

    def __len__(self) -> int:
        return len(self.origin_index)

    def take(self, rows) -> "SupervisedDataset":
        """Row subset as a new dataset (used by fold schemes and splits)."""
        rows = np.asarray(rows)
        return SupervisedDataset(
            self.inputs[rows],
            self.targets[rows],
            self.origin_index[rows],
            self.n_lags,
            self.horizon,
        )


def make_supervised(series: IliSeries, n_lags: int, horizon: int) -> SupervisedDataset:
    """Embed a gap-free series into (lag-vector, H-step-target) pairs."""
    if n_lags < 1 or horizon < 1:
        raise ValueError("n_lags and horizon must be positive")
    if np.any(series.missing):
        raise DomainError("impute missing values before embedding")
    length = len(series)
    if length < n_lags + horizon:
        raise InsufficientDataError(
            f"series length {length} < n_lags + horizon = {n_lags + horizon}"
        )
    rates = series.rates
    n = length - n_lags - horizon + 1
    lag_windows = np.lib.stride_tricks.sliding_window_view(rates, n_lags)
    inputs = lag_windows[:n, ::-1].copy()
    target_windows = np.lib.stride_tricks.sliding_window_view(rates, horizon)
    targets = target_windows[n_lags : n_lags + n].copy()
    origin = np.arange(n_lags - 1, n_lags - 1 + n, dtype=np.int64)
    return SupervisedDataset(inputs, targets, origin, n_lags, horizon)


def chronological_split(
    dataset: SupervisedDataset, train_fraction: float
) -> tuple[SupervisedDataset, SupervisedDataset]:
    """First floor(n * fraction) rows for training, remainder for testing."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    n = len(dataset)
    if n == 0:
        raise InsufficientDataError("cannot split an empty dataset")
    n_train = int(np.floor(n * train_fraction))
    if n_train == 0:
        raise InsufficientDataError(
            f"train split of {n} rows at fraction {train_fraction} is empty"
        )
    return dataset.take(np.arange(n_train)), dataset.take(np.arange(n_train, n))
