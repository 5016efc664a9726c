"""Forecast accuracy metrics and nonparametric model comparison.

Statistical metrics (MAPE, RMSE) are complemented by two outbreak-focused
ones: peak week error inside each winter outbreak window (week 45 through
week 8 of the following year) and the mean absolute error restricted to those
windows. Model-strategy combinations are compared with the Friedman rank test
and the Nemenyi post-hoc critical difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import IliSeries
from .errors import DomainError
from .strategies import ForecastTable

OUTBREAK_START_WEEK = 45
OUTBREAK_END_WEEK = 8

# Studentized-range quantiles divided by sqrt(2) at alpha = 0.05 for
# 2..10 treatments (infinite degrees of freedom). Cross-checked against
# Demsar (2006), "Statistical Comparisons of Classifiers over Multiple
# Data Sets", JMLR 7, Table 5(a), and against Harter (1960) studentized
# range tables (q / sqrt(2)); see README for the comparison.
NEMENYI_Q_ALPHA_005 = {
    2: 1.959964233,
    3: 2.343700516,
    4: 2.569032073,
    5: 2.727774717,
    6: 2.849705382,
    7: 2.948319908,
    8: 3.030878867,
    9: 3.101730111,
    10: 3.163683742,
}


def mape(observed, predicted) -> float:
    """Mean absolute percentage error; observations must be positive."""
    observed = np.asarray(observed, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if observed.shape != predicted.shape or observed.ndim != 1 or len(observed) < 1:
        raise ValueError("observed and predicted must be equal-length vectors")
    if np.any(observed <= 0.0):
        raise DomainError("MAPE requires strictly positive observations")
    return float(np.mean(np.abs(observed - predicted) / observed))


def rmse(observed, predicted) -> float:
    """Root mean squared error."""
    observed = np.asarray(observed, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if observed.shape != predicted.shape or observed.ndim != 1 or len(observed) < 1:
        raise ValueError("observed and predicted must be equal-length vectors")
    diff = observed - predicted
    return float(np.sqrt(np.mean(diff * diff)))


@dataclass(frozen=True)
class OutbreakWindow:
    """One winter outbreak season restricted to the evaluated span."""

    start: tuple
    end: tuple
    member_indices: np.ndarray
    peak_index: int

    def __len__(self) -> int:
        return len(self.member_indices)


def _season_of(year: int, week: int):
    """Anchor year of the winter window a week belongs to, or None."""
    if week >= OUTBREAK_START_WEEK:
        return int(year)
    if week <= OUTBREAK_END_WEEK:
        return int(year) - 1
    return None


def detect_outbreak_windows(series: IliSeries, span) -> list:
    """Winter windows intersecting ``span`` (inclusive index pair).

    Windows that only partially overlap the span are truncated to it. The
    peak is the member with the highest observed rate, earliest on ties.
    """
    first, last = int(span[0]), int(span[1])
    first = max(first, 0)
    last = min(last, len(series) - 1)
    seasons: dict = {}
    for idx in range(first, last + 1):
        season = _season_of(int(series.years[idx]), int(series.weeks[idx]))
        if season is not None:
            seasons.setdefault(season, []).append(idx)
    windows = []
    for season in sorted(seasons):
        members = np.array(seasons[season], dtype=np.int64)
        rates = series.rates[members]
        peak = int(members[int(np.argmax(rates))])
        windows.append(
            OutbreakWindow(
                start=(season, OUTBREAK_START_WEEK),
                end=(season + 1, OUTBREAK_END_WEEK),
                member_indices=members,
                peak_index=peak,
            )
        )
    return windows


def _window_values(window: OutbreakWindow, values) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    picked = values[window.member_indices]
    if np.any(~np.isfinite(picked)):
        raise ValueError("window extends outside the covered span")
    return picked


def pwe(window: OutbreakWindow, observed, predicted) -> float:
    """Absolute week gap between the observed and predicted in-window peaks.

    Both arrays are indexed by series position and must cover every window
    member. Ties break to the earliest week.
    """
    obs = _window_values(window, observed)
    pred = _window_values(window, predicted)
    return float(abs(int(np.argmax(obs)) - int(np.argmax(pred))))


def outbreak_mae(windows, observed, predicted) -> float:
    """Per-window mean absolute error, averaged unweighted across windows."""
    windows = list(windows)
    if not windows:
        raise ValueError("need at least one outbreak window")
    per_window = []
    for window in windows:
        obs = _window_values(window, observed)
        pred = _window_values(window, predicted)
        per_window.append(float(np.mean(np.abs(obs - pred))))
    return float(np.mean(per_window))


@dataclass(frozen=True)
class MetricRow:
    """Cross-lead means plus the per-lead-time breakdown behind them."""

    mape: float
    rmse: float
    pwe: float
    outbreak_mae: float
    per_lead: dict

    def as_dict(self) -> dict:
        return {
            "MAPE": self.mape,
            "RMSE": self.rmse,
            "PWE": self.pwe,
            "OutbreakMAE": self.outbreak_mae,
        }


METRIC_NAMES = ("MAPE", "RMSE", "PWE", "OutbreakMAE")


def _truncate_window(window: OutbreakWindow, covered: np.ndarray, rates) -> OutbreakWindow | None:
    members = window.member_indices[np.isin(window.member_indices, covered)]
    if len(members) == 0:
        return None
    values = np.asarray(rates)[members]
    return OutbreakWindow(
        start=window.start,
        end=window.end,
        member_indices=members,
        peak_index=int(members[int(np.argmax(values))]),
    )


def aggregate_metrics(
    table: ForecastTable, series: IliSeries, windows, horizon: int
) -> MetricRow:
    """Per-lead metrics averaged over lead times 1..H.

    Each lead time h aligns the h-step-ahead prediction with its target week
    (origin + h); outbreak windows are truncated to the weeks that lead
    actually covers. Passing an empty window list leaves the outbreak metrics
    as NaN.
    """
    if table.horizon != horizon:
        raise ValueError(f"table horizon {table.horizon} != requested {horizon}")
    if len(table) == 0:
        raise ValueError("empty forecast table")
    if not np.all(np.isfinite(table.predicted)):
        raise ValueError("forecast table has non-finite predictions")
    windows = list(windows)
    n_series = len(series)
    per_lead = {name: np.full(horizon, np.nan) for name in METRIC_NAMES}
    for lead in range(1, horizon + 1):
        covered = table.origin_index + lead
        if np.any(covered >= n_series):
            raise ValueError("forecast table extends past the end of the series")
        predictions = table.predicted[:, lead - 1]
        observations = series.rates[covered]
        per_lead["MAPE"][lead - 1] = mape(observations, predictions)
        per_lead["RMSE"][lead - 1] = rmse(observations, predictions)
        if windows:
            predicted_full = np.full(n_series, np.nan)
            predicted_full[covered] = predictions
            truncated = [
                t
                for t in (
                    _truncate_window(w, covered, series.rates) for w in windows
                )
                if t is not None
            ]
            if not truncated:
                raise ValueError(f"no outbreak window overlaps lead {lead} coverage")
            per_lead["PWE"][lead - 1] = float(
                np.mean([pwe(t, series.rates, predicted_full) for t in truncated])
            )
            per_lead["OutbreakMAE"][lead - 1] = outbreak_mae(
                truncated, series.rates, predicted_full
            )
    return MetricRow(
        mape=float(np.mean(per_lead["MAPE"])),
        rmse=float(np.mean(per_lead["RMSE"])),
        pwe=float(np.mean(per_lead["PWE"])) if windows else float("nan"),
        outbreak_mae=float(np.mean(per_lead["OutbreakMAE"])) if windows else float("nan"),
        per_lead=per_lead,
    )


# ---------------------------------------------------------------------------
# nonparametric comparison


def _row_ranks(row: np.ndarray) -> np.ndarray:
    """Ascending ranks with ties sharing their average rank."""
    order = np.argsort(row, kind="stable")
    ranks = np.empty(len(row))
    i = 0
    while i < len(row):
        j = i
        while j + 1 < len(row) and row[order[j + 1]] == row[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def rank_matrix(scores) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    return np.vstack([_row_ranks(row) for row in scores])


def _gamma_p_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    k = a
    for _ in range(500):
        k += 1.0
        term *= x / k
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))

def _gamma_q_continued_fraction(a: float, x: float) -> float:
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a, x), relative accuracy ~1e-14."""
    if a <= 0.0 or x < 0.0:
        raise DomainError("require a > 0 and x >= 0")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_continued_fraction(a, x)


def chi_square_sf(x: float, dof: int) -> float:
    """Upper tail of the chi-square distribution with ``dof`` degrees of freedom."""
    if dof < 1:
        raise DomainError("degrees of freedom must be positive")
    if x < 0.0:
        return 1.0
    return regularized_gamma_q(dof / 2.0, x / 2.0)


def friedman_test(scores) -> tuple[float, float]:
    """Friedman rank statistic and chi-square p-value for an N x K score matrix.

    Rows are independent blocks (here: experiment repeats), columns the
    compared treatments. Ties within a row share their average rank.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2:
        raise ValueError("scores must be a 2-D matrix")
    n, k = scores.shape
    if n < 2 or k < 2:
        raise ValueError("need at least 2 rows and 2 columns")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    rank_sums = rank_matrix(scores).sum(axis=0)
    statistic = 12.0 / (n * k * (k + 1)) * float(rank_sums @ rank_sums) - 3.0 * n * (k + 1)
    statistic = max(statistic, 0.0)
    return float(statistic), chi_square_sf(statistic, k - 1)


def mean_ranks(scores) -> np.ndarray:
    """Column-wise average ranks (lower is better)."""
    return rank_matrix(scores).mean(axis=0)


def nemenyi_critical_difference(k: int, n: int, alpha: float = 0.05) -> float:
    """Minimal mean-rank gap that is significant for K treatments over N blocks."""
    if alpha != 0.05:
        raise ValueError("only alpha = 0.05 is tabulated")
    if k not in NEMENYI_Q_ALPHA_005:
        raise ValueError(f"K = {k} outside the tabulated range 2..10")
    if n < 2:
        raise ValueError("need at least 2 blocks")
    return NEMENYI_Q_ALPHA_005[k] * math.sqrt(k * (k + 1) / (6.0 * n))


def nemenyi_significance(scores, alpha: float = 0.05) -> tuple[float, np.ndarray]:
    """(critical difference, boolean K x K matrix of significant pairs)."""
    scores = np.asarray(scores, dtype=np.float64)
    n, k = scores.shape
    cd = nemenyi_critical_difference(k, n, alpha)
    ranks = mean_ranks(scores)
    gap = np.abs(ranks[:, None] - ranks[None, :])
    significant = gap >= cd
    np.fill_diagonal(significant, False)
    return cd, significant
