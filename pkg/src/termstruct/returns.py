"""Per-day log-returns of constant-maturity series.

A return is emitted for each consecutive price pair at most ``MAX_GAP_DAYS``
calendar days apart and is averaged per day: ``(ln P(t) - ln P(t - dt)) / dt``.
Wider gaps are skipped and counted.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InsufficientDataError
from .ingest import ConstantMaturitySeries, Dataset

MAX_GAP_DAYS = 3


class ReturnObservation(NamedTuple):
    date: dt.date
    dt: int
    value: float


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    market: str
    maturity: int
    dates: tuple[dt.date, ...]
    gaps: np.ndarray
    values: np.ndarray
    skipped: int = 0

    def __len__(self):
        return len(self.values)

    @property
    def observations(self) -> list[ReturnObservation]:
        return [ReturnObservation(d, int(g), float(v)) for d, g, v in zip(self.dates, self.gaps, self.values)]

    @classmethod
    def from_values(cls, values, market="", maturity=1) -> "ReturnSeries":
        """Wrap bare return values with consecutive daily dates, mainly for tests."""
        values = np.asarray(values, dtype=float)
        base = dt.date(2000, 1, 1)
        dates = tuple(base + dt.timedelta(days=i) for i in range(len(values)))
        return cls(market, maturity, dates, np.ones(len(values), dtype=np.int64), values)


def compute_returns(series: ConstantMaturitySeries, max_gap: int = MAX_GAP_DAYS) -> ReturnSeries:
    if len(series) < 2:
        raise InsufficientDataError(
            f"{series.market} M={series.maturity}: need at least 2 prices, got {len(series)}"
        )
    days = np.array([d.toordinal() for d in series.dates], dtype=np.int64)
    logp = np.log(np.asarray(series.prices, dtype=float))
    gaps = np.diff(days)
    keep = gaps <= max_gap
    values = np.diff(logp)[keep] / gaps[keep]
    dates = tuple(d for d, k in zip(series.dates[1:], keep) if k)
    return ReturnSeries(
        series.market,
        series.maturity,
        dates,
        gaps[keep],
        values,
        int(np.count_nonzero(~keep)),
    )


def dataset_returns(dataset: Dataset) -> list[ReturnSeries]:
    """Returns for every series of a dataset, sorted by (market, maturity)."""
    out = [compute_returns(s) for s in dataset.all_series()]
    return sorted(out, key=lambda r: (r.market, r.maturity))
