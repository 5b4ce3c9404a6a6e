"""Synthetic data with known ground truth.

All draws come from numpy's ``PCG64`` bit generator seeded through
``SeedSequence``; per-series seeds are derived from the master seed and the
series identity, so adding a market or maturity never changes the others.
"""
from __future__ import annotations

import csv
import datetime as dt
import zlib
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from .aggregate import AggregateCurve, AggregatePoint, _KIND_ATTR
from .ingest import ConstantMaturitySeries, Dataset, HEADER
from .tails import TailSample

PRNG = {"algorithm": "numpy.random.PCG64", "seeding": "numpy.random.SeedSequence", "numpy": np.__version__}
DISTRIBUTIONS = ("gaussian", "student_t", "pareto_symmetric")
START_DATE = dt.date(2000, 1, 3)  # a Monday


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a synthetic constant-maturity dataset.

    ``tail_mu`` is the tail exponent for ``pareto_symmetric`` and the degrees
    of freedom for ``student_t``; a sequence gives one value per maturity.
    Returns at maturity ``M`` have scale ``base_scale * M**(-scale_alpha)``.
    """

    seed: int = 0
    T: int = 2500
    maturities: tuple[int, ...] = tuple(range(1, 16))
    tail_mu: float | tuple[float, ...] = 3.0
    scale_alpha: float = 0.175
    distribution: str = "gaussian"
    base_scale: float = 0.02
    markets: tuple[str, ...] = ("SYN",)
    start: dt.date = START_DATE

    def __post_init__(self):
        if self.T < 10:
            raise ValueError("T must be >= 10")
        if self.scale_alpha < 0:
            raise ValueError("scale_alpha must be >= 0")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"distribution must be one of {DISTRIBUTIONS}")
        if not self.maturities or min(self.maturities) < 1:
            raise ValueError("maturities must be positive ranks")
        mus = self.tail_mus()
        if len(mus) != len(self.maturities) or any(not m > 0 for m in mus):
            raise ValueError("tail_mu must be positive, one value or one per maturity")

    def tail_mus(self) -> tuple[float, ...]:
        if isinstance(self.tail_mu, (int, float)):
            return (float(self.tail_mu),) * len(self.maturities)
        return tuple(float(m) for m in self.tail_mu)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *key]))


def pareto_inverse_cdf(u, mu: float, xmin: float):
    """Map ``u`` in (0, 1] to a Pareto variate with CCDF ``(x / xmin)**(-mu)``."""
    return xmin * np.asarray(u, dtype=float) ** (-1.0 / mu)


def gen_pareto_sample(mu: float, xmin: float, n: int, seed: int, kind: str = "absolute") -> TailSample:
    if not (mu > 0 and xmin > 0 and n >= 1):
        raise ValueError("need mu > 0, xmin > 0, n >= 1")
    u = 1.0 - _rng(seed).random(n)
    return TailSample(kind, pareto_inverse_cdf(u, mu, xmin))


def business_days(start: dt.date, n: int) -> list[dt.date]:
    out = []
    d = start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def _draw(rng: np.random.Generator, dist: str, mu: float, n: int) -> np.ndarray:
    if dist == "gaussian":
        return rng.standard_normal(n)
    if dist == "student_t":
        return rng.standard_t(mu, n)
    sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    return sign * pareto_inverse_cdf(1.0 - rng.random(n), mu, 1.0)


def gen_samuelson_dataset(spec: SynthSpec) -> Dataset:
    """Price paths whose per-day returns are i.i.d. with scale shrinking in M.

    Over a weekend the log price moves by ``3 * r`` so that the per-day
    return recovered by :func:`termstruct.returns.compute_returns` is the
    drawn ``r`` itself.
    """
    dates = business_days(spec.start, spec.T)
    gaps = np.diff([d.toordinal() for d in dates]).astype(float)
    series = []
    for market in spec.markets:
        mkey = zlib.crc32(market.encode())
        for m, mu in zip(spec.maturities, spec.tail_mus()):
            rng = _rng(spec.seed, mkey, m)
            r = spec.base_scale * m ** (-spec.scale_alpha) * _draw(rng, spec.distribution, mu, spec.T - 1)
            logp = np.log(100.0) + np.concatenate([[0.0], np.cumsum(gaps * r)])
            series.append(ConstantMaturitySeries(market, m, tuple(dates), tuple(np.exp(logp).tolist())))
    return Dataset.from_series(series)


def gen_step_curve(
    levels: tuple[float, float],
    Mt: int,
    maturities: Sequence[int],
    noise_sd: float = 0.0,
    seed: int = 0,
    kind: str = "absolute",
) -> AggregateCurve:
    """Piecewise-constant curve, ``levels[0]`` for ``M <= Mt``, plus Gaussian noise."""
    ms = sorted(maturities)
    if not ms[0] <= Mt < ms[-1]:
        raise ValueError("Mt must lie inside the maturity range")
    noise = _rng(seed).normal(0.0, noise_sd, len(ms)) if noise_sd > 0 else np.zeros(len(ms))
    attr = _KIND_ATTR[kind]
    points = tuple(
        AggregatePoint(m, 1, **{attr: (levels[0] if m <= Mt else levels[1]) + float(e)})
        for m, e in zip(ms, noise)
    )
    return AggregateCurve(points)


def _add_months(d: dt.date, k: int) -> dt.date:
    y, m = divmod(d.month - 1 + k, 12)
    return dt.date(d.year + y, m + 1, 1)


def write_quotes_csv(dataset: Dataset, stream: TextIO) -> int:
    """Write a dataset in the quote CSV schema; returns the number of rows.

    Rank ``M`` on a date becomes the delivery month ``M - 1`` months after the
    observation month, so re-ingesting reproduces the ranks when the
    maturities are contiguous from 1.
    """
    rows = []
    for s in dataset.all_series():
        for d, p in zip(s.dates, s.prices):
            rows.append((s.market, d, _add_months(d, s.maturity - 1), p))
    rows.sort()
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(HEADER)
    for market, d, delivery, p in rows:
        w.writerow([market, d.isoformat(), f"{delivery.year:04d}-{delivery.month:02d}", repr(float(p))])
    return len(rows)
