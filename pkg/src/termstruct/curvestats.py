"""Moment term structures and the contango index.

All moments use population (1/T) normalisation.  Kurtosis is the raw
standardised fourth moment, 3 for a Gaussian.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateDistributionError, InsufficientDataError, TermStructError
from .ingest import Dataset
from .returns import ReturnSeries, dataset_returns


@dataclass(frozen=True)
class MomentSummary:
    market: str
    maturity: int
    count: int
    mean: float
    mean_abs: float
    variance: float
    skewness: float
    kurtosis: float


@dataclass(frozen=True)
class ContangoIndex:
    market: str
    C: float
    far_maturity: int
    near_maturity: int
    records: int


def _values(series) -> np.ndarray:
    if isinstance(series, ReturnSeries):
        return series.values
    return np.asarray(series, dtype=float)


def _standardized(r: np.ndarray, min_count: int) -> np.ndarray:
    if len(r) < min_count:
        raise InsufficientDataError(f"need at least {min_count} returns, got {len(r)}")
    if np.all(r == r[0]):
        raise DegenerateDistributionError("zero variance")
    d = r - r.mean()
    return d / np.sqrt(np.mean(d * d))


def mean_abs(series) -> float:
    r = _values(series)
    if len(r) < 1:
        raise InsufficientDataError("mean absolute return of an empty series")
    return float(np.mean(np.abs(r)))


def variance(series) -> float:
    r = _values(series)
    if len(r) < 2:
        raise InsufficientDataError(f"need at least 2 returns, got {len(r)}")
    if np.all(r == r[0]):
        return 0.0
    d = r - r.mean()
    return float(np.mean(d * d))


def skewness(series) -> float:
    z = _standardized(_values(series), 3)
    return float(np.mean(z**3))


def kurtosis(series) -> float:
    z = _standardized(_values(series), 4)
    return float(np.mean(z**4))


def summarize(series: ReturnSeries) -> MomentSummary:
    try:
        return MomentSummary(
            series.market,
            series.maturity,
            len(series),
            float(np.mean(series.values)) if len(series) else float("nan"),
            mean_abs(series),
            variance(series),
            skewness(series),
            kurtosis(series),
        )
    except TermStructError as exc:
        raise type(exc)(f"{series.market} M={series.maturity}: {exc}") from exc


def moment_term_structure(data: Dataset | Sequence[ReturnSeries]) -> list[MomentSummary]:
    """One summary per (market, maturity), sorted.

    Accepts a dataset of prices or already computed return series.
    """
    returns = dataset_returns(data) if isinstance(data, Dataset) else data
    out = [summarize(r) for r in returns]
    return sorted(out, key=lambda s: (s.market, s.maturity))


def contango_index(dataset: Dataset, market: str, far: int = 9) -> ContangoIndex:
    """Fraction of dates on which the far leg trades strictly above the near leg.

    The near leg is the shortest maturity quoted on each date.  Dates where
    the far rank is missing are ignored.
    """
    series = dataset.series.get(market)
    if not series:
        raise InsufficientDataError(f"no series for market {market!r}")
    by_date: dict = {}
    for s in series:
        for d, p in zip(s.dates, s.prices):
            by_date.setdefault(d, {})[s.maturity] = p

    up = total = 0
    near_used = None
    for d in sorted(by_date):
        curve = by_date[d]
        near = min(curve)
        if far not in curve or near >= far:
            continue
        near_used = near if near_used is None else min(near_used, near)
        total += 1
        up += curve[far] > curve[near]
    if total == 0:
        raise InsufficientDataError(f"{market}: no dates quoting both a near leg and rank {far}")
    return ContangoIndex(market, up / total, far, near_used, total)
