"""Power-law scaling of return statistics with maturity.

Fits ``y ~ M**(-alpha)`` by ordinary least squares of ``ln y`` on ``ln M`` and
looks for a single crossover where the log-log slope changes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .curvestats import MomentSummary
from .errors import DomainError, InsufficientDataError

DEFAULT_R2_FLOOR = 0.95
DEFAULT_CROSSOVER_GAIN = 0.5

# SSE below this (relative to the squared norm of ln y) is round-off, not signal.
_ROUNDOFF = 1e-20


@dataclass(frozen=True)
class PowerLawScalingFit:
    statistic: str
    market: str
    alpha: float
    alpha_err: float
    intercept: float
    r_squared: float
    range: tuple[int, int]
    n_points: int
    power_law: bool  # r_squared >= the floor used for the fit


@dataclass(frozen=True)
class CrossoverReport:
    market: str
    statistic: str
    breakpoint: int | None
    alpha_before: float | None
    alpha_after: float | None
    sse_gain: float


@dataclass(frozen=True)
class MonotonicityReport:
    market: str
    statistic: str
    decreasing_fraction: float
    argmax_maturity: int
    n_maturities: int


def _ols(x: np.ndarray, y: np.ndarray):
    """Slope, intercept, slope standard error and residual sum of squares."""
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    sxx = np.dot(dx, dx)
    slope = np.dot(dx, y - ym) / sxx
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    sse = float(np.dot(resid, resid))
    n = len(x)
    se = float(np.sqrt(sse / (n - 2) / sxx)) if n > 2 else 0.0
    return float(slope), float(intercept), se, sse


def _log_points(points, range_=None):
    pts = sorted((float(m), float(y)) for m, y in points)
    if range_ is not None:
        lo, hi = range_
        pts = [(m, y) for m, y in pts if lo <= m <= hi]
    if any(y <= 0 or not np.isfinite(y) for _, y in pts):
        raise DomainError("power-law fit needs strictly positive values")
    ms = np.array([m for m, _ in pts])
    if len(np.unique(ms)) != len(ms):
        raise DomainError("maturities must be distinct")
    ys = np.array([y for _, y in pts])
    return ms, ys


def fit_power_law_scaling(
    points: Sequence[tuple[float, float]],
    range: tuple[float, float] | None = None,
    statistic: str = "mean_abs",
    market: str = "",
    r2_floor: float = DEFAULT_R2_FLOOR,
) -> PowerLawScalingFit:
    """OLS fit of ``ln y = c - alpha ln M`` over the points inside ``range``."""
    ms, ys = _log_points(points, range)
    if len(ms) < 3:
        raise InsufficientDataError(f"power-law fit needs >= 3 points, got {len(ms)}")
    lx, ly = np.log(ms), np.log(ys)
    slope, intercept, se, sse = _ols(lx, ly)
    sst = float(np.sum((ly - ly.mean()) ** 2))
    if sse <= _ROUNDOFF * max(1.0, float(np.dot(ly, ly))):
        sse, se = 0.0, 0.0
    r2 = 1.0 - sse / sst if sst > 0 else 1.0
    return PowerLawScalingFit(
        statistic,
        market,
        -slope,
        se,
        intercept,
        r2,
        (int(ms[0]), int(ms[-1])),
        len(ms),
        r2 >= r2_floor,
    )


def detect_crossover(
    points: Sequence[tuple[float, float]],
    threshold: float = DEFAULT_CROSSOVER_GAIN,
    min_side: int = 3,
    market: str = "",
    statistic: str = "mean_abs",
) -> CrossoverReport:
    """Best two-segment log-log fit over every admissible integer breakpoint.

    A breakpoint ``b`` puts ``M <= b`` in the first segment.  It is reported
    only when the relative SSE improvement over a single line exceeds
    ``threshold``.
    """
    ms, ys = _log_points(points)
    if len(ms) < max(8, 2 * min_side):
        raise InsufficientDataError(f"crossover search needs >= 8 points, got {len(ms)}")
    lx, ly = np.log(ms), np.log(ys)
    sse_one = _ols(lx, ly)[3]
    floor = _ROUNDOFF * max(1.0, float(np.dot(ly, ly)))

    best = None
    for i in range(min_side, len(ms) - min_side + 1):
        left = _ols(lx[:i], ly[:i])
        right = _ols(lx[i:], ly[i:])
        total = left[3] + right[3]
        if best is None or total < best[0]:
            best = (total, int(ms[i - 1]), -left[0], -right[0])

    sse_two, b, a1, a2 = best
    gain = 0.0 if sse_one <= floor else 1.0 - sse_two / sse_one
    if gain > threshold:
        return CrossoverReport(market, statistic, b, a1, a2, gain)
    return CrossoverReport(market, statistic, None, None, None, gain)


def samuelson_check(summaries: Sequence[MomentSummary]) -> list[MonotonicityReport]:
    """Share of decreasing consecutive steps and location of the peak.

    Reports one entry per statistic (``mean_abs`` then ``variance``) for the
    single market the summaries belong to.
    """
    curve = sorted(summaries, key=lambda s: s.maturity)
    if len(curve) < 2:
        raise InsufficientDataError("monotonicity check needs >= 2 maturities")
    markets = {s.market for s in curve}
    if len(markets) != 1:
        raise ValueError(f"summaries span several markets: {sorted(markets)}")
    out = []
    for stat in ("mean_abs", "variance"):
        y = np.array([getattr(s, stat) for s in curve])
        m = [s.maturity for s in curve]
        out.append(
            MonotonicityReport(
                curve[0].market,
                stat,
                float(np.mean(np.diff(y) < 0)),
                m[int(np.argmax(y))],
                len(curve),
            )
        )
    return out
