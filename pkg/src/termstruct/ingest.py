"""Quote parsing, constant-maturity reconstruction and period alignment.

Input rows look like ``WTI,2005-03-01,2005-06,53.20`` under the header
``market,obs_date,delivery,settle``.  On every observation date the unexpired
contracts of a market are sorted by delivery month and the k-th one is given
maturity rank ``M = k``.
"""
from __future__ import annotations

import csv
import datetime as dt
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

from .errors import AlignmentError, DuplicateRecordError, ParseError

HEADER = ("market", "obs_date", "delivery", "settle")


@dataclass(frozen=True, order=True)
class FuturesQuote:
    market: str
    obs_date: dt.date
    delivery: dt.date  # first day of the delivery month
    settle: float


@dataclass(frozen=True)
class ConstantMaturitySeries:
    market: str
    maturity: int
    dates: tuple[dt.date, ...]
    prices: tuple[float, ...]

    def __post_init__(self):
        if len(self.dates) != len(self.prices):
            raise ValueError("dates and prices differ in length")
        if self.maturity < 1:
            raise ValueError("maturity rank must be >= 1")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")
        if any(not p > 0 for p in self.prices):
            raise ValueError("prices must be strictly positive")

    def __len__(self):
        return len(self.dates)

    @property
    def points(self):
        return list(zip(self.dates, self.prices))

    def truncate(self, start: dt.date, end: dt.date) -> "ConstantMaturitySeries":
        keep = [i for i, d in enumerate(self.dates) if start <= d <= end]
        return ConstantMaturitySeries(
            self.market,
            self.maturity,
            tuple(self.dates[i] for i in keep),
            tuple(self.prices[i] for i in keep),
        )


@dataclass(frozen=True)
class Dataset:
    """Constant-maturity series grouped by market.

    ``series`` maps a market identifier to its series ordered by maturity.
    ``period`` is an inclusive ``(first, last)`` date pair covering every
    point of every series.
    """

    series: Mapping[str, tuple[ConstantMaturitySeries, ...]]
    period: tuple[dt.date, dt.date]
    caps: Mapping[str, int] = field(default_factory=dict)

    @classmethod
    def from_series(cls, series: Iterable[ConstantMaturitySeries]) -> "Dataset":
        grouped: dict[str, list[ConstantMaturitySeries]] = defaultdict(list)
        for s in series:
            if len(s):
                grouped[s.market].append(s)
        if not grouped:
            raise AlignmentError("dataset has no observations")
        out = {m: tuple(sorted(v, key=lambda s: s.maturity)) for m, v in sorted(grouped.items())}
        first = min(s.dates[0] for v in out.values() for s in v)
        last = max(s.dates[-1] for v in out.values() for s in v)
        return cls(out, (first, last))

    @property
    def markets(self) -> list[str]:
        return list(self.series)

    def get(self, market: str, maturity: int) -> ConstantMaturitySeries | None:
        for s in self.series.get(market, ()):
            if s.maturity == maturity:
                return s
        return None

    def all_series(self) -> list[ConstantMaturitySeries]:
        return [s for v in self.series.values() for s in v]


def _parse_date(text: str) -> dt.date:
    return dt.date.fromisoformat(text)


def _parse_month(text: str) -> dt.date:
    parts = text.split("-")
    if len(parts) != 2 or len(parts[0]) != 4 or len(parts[1]) != 2:
        raise ValueError(f"expected YYYY-MM, got {text!r}")
    return dt.date(int(parts[0]), int(parts[1]), 1)


def month_start(d: dt.date) -> dt.date:
    return d.replace(day=1)


def parse_quotes(stream: TextIO) -> list[FuturesQuote]:
    """Parse the quote CSV schema from a text stream.

    Raises
    ------
    ParseError
        On a bad header, missing column, malformed date or month, or a
        settlement price that is not a finite positive number.  The message
        carries the 1-based line number.
    DuplicateRecordError
        When ``(market, obs_date, delivery)`` repeats.
    """
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(1, "empty input, header required") from None
    if tuple(h.strip() for h in header) != HEADER:
        raise ParseError(1, f"header must be {','.join(HEADER)}")

    quotes: list[FuturesQuote] = []
    seen: dict[tuple, int] = {}
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(HEADER):
            raise ParseError(line, f"expected {len(HEADER)} columns, got {len(row)}")
        market, obs, delivery, settle = (c.strip() for c in row)
        if not market:
            raise ParseError(line, "missing market")
        try:
            obs_date = _parse_date(obs)
        except ValueError:
            raise ParseError(line, f"malformed obs_date {obs!r}") from None
        try:
            month = _parse_month(delivery)
        except ValueError:
            raise ParseError(line, f"malformed delivery {delivery!r}") from None
        try:
            price = float(settle)
        except ValueError:
            raise ParseError(line, f"malformed settle {settle!r}") from None
        if not math.isfinite(price) or price <= 0:
            raise ParseError(line, f"non-positive price {settle}")
        if month < month_start(obs_date):
            raise ParseError(line, f"delivery {delivery} precedes observation month")
        key = (market, obs_date, month)
        if key in seen:
            raise DuplicateRecordError(line, f"duplicate record {market},{obs},{delivery} (first at line {seen[key]})")
        seen[key] = line
        quotes.append(FuturesQuote(market, obs_date, month, price))
    return quotes


def build_constant_maturity(quotes: Iterable[FuturesQuote], market: str) -> list[ConstantMaturitySeries]:
    """Rank unexpired deliveries per observation date and split by rank."""
    by_date: dict[dt.date, list[FuturesQuote]] = defaultdict(list)
    for q in quotes:
        if q.market != market:
            raise ValueError(f"quote for market {q.market!r} passed while building {market!r}")
        by_date[q.obs_date].append(q)

    points: dict[int, list[tuple[dt.date, float]]] = defaultdict(list)
    for obs_date in sorted(by_date):
        live = sorted(
            (q for q in by_date[obs_date] if q.delivery >= month_start(obs_date)),
            key=lambda q: q.delivery,
        )
        for rank, q in enumerate(live, start=1):
            points[rank].append((obs_date, q.settle))

    return [
        ConstantMaturitySeries(
            market,
            rank,
            tuple(d for d, _ in pts),
            tuple(p for _, p in pts),
        )
        for rank, pts in sorted(points.items())
    ]


def build_dataset(quotes: Sequence[FuturesQuote], caps: Mapping[str, int] | None = None) -> Dataset:
    by_market: dict[str, list[FuturesQuote]] = defaultdict(list)
    for q in quotes:
        by_market[q.market].append(q)
    series = [s for m in sorted(by_market) for s in build_constant_maturity(by_market[m], m)]
    ds = Dataset.from_series(series)
    if caps:
        ds = _apply_caps(ds, caps)
    return ds


def _apply_caps(ds: Dataset, caps: Mapping[str, int]) -> Dataset:
    series = {
        m: tuple(s for s in v if caps.get(m) is None or s.maturity <= caps[m])
        for m, v in ds.series.items()
    }
    return Dataset({m: v for m, v in series.items() if v}, ds.period, dict(caps))


def align_period(
    datasets: Sequence[Dataset],
    policy: str | tuple[dt.date, dt.date] = "intersection",
    caps: Mapping[str, int] | None = None,
) -> list[Dataset]:
    """Truncate every dataset to a common observation period.

    ``policy`` is ``"intersection"`` (latest start to earliest end over the
    datasets' periods) or an explicit inclusive ``(start, end)`` pair.
    Series emptied by truncation are dropped, as are maturities above the
    per-market ``caps``.  The aligned period is stored on each result, so a
    second application with the same policy changes nothing.
    """
    if not datasets:
        raise ValueError("align_period needs at least one dataset")
    if policy == "intersection":
        start = max(d.period[0] for d in datasets)
        end = min(d.period[1] for d in datasets)
        if start > end:
            late = max(datasets, key=lambda d: d.period[0])
            early = min(datasets, key=lambda d: d.period[1])
            raise AlignmentError(
                "empty common period: markets "
                f"{','.join(early.markets)} end {early.period[1]} before "
                f"{','.join(late.markets)} start {late.period[0]}"
            )
    elif isinstance(policy, tuple) and len(policy) == 2:
        start, end = policy
        if start > end:
            raise AlignmentError(f"explicit period start {start} is after end {end}")
    else:
        raise ValueError(f"unknown alignment policy {policy!r}")

    out = []
    for ds in datasets:
        merged_caps = {**ds.caps, **(caps or {})}
        series = {}
        for m, v in ds.series.items():
            kept = tuple(
                t for t in (s.truncate(start, end) for s in v)
                if len(t) and (merged_caps.get(m) is None or t.maturity <= merged_caps[m])
            )
            if kept:
                series[m] = kept
        out.append(Dataset(series, (start, end), merged_caps))
    return out
