"""Cross-market averages of tail exponents and the two-plateau regime fit."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InsufficientDataError
from .tails import DEFAULT_MIN_TAIL, TailFit

DEFAULT_PLATEAU_GAIN = 0.3
FIELDS = {"pos": "mu_bar_pos", "neg": "mu_bar_neg", "abs": "mu_bar_abs", "asymmetry": "asymmetry"}


@dataclass(frozen=True)
class AggregatePoint:
    maturity: int
    n_markets: int
    mu_bar_pos: float | None = None
    mu_bar_neg: float | None = None
    mu_bar_abs: float | None = None

    @property
    def asymmetry(self) -> float | None:
        if self.mu_bar_pos is None or self.mu_bar_neg is None:
            return None
        return abs(self.mu_bar_pos - self.mu_bar_neg)


@dataclass(frozen=True)
class AggregateCurve:
    points: tuple[AggregatePoint, ...]

    def __len__(self):
        return len(self.points)

    @property
    def maturities(self) -> list[int]:
        return [p.maturity for p in self.points]

    def series(self, field: str) -> tuple[np.ndarray, np.ndarray]:
        """Maturities and values of one field, skipping maturities without it."""
        attr = FIELDS.get(field, field)
        pairs = [(p.maturity, getattr(p, attr)) for p in self.points]
        pairs = [(m, v) for m, v in pairs if v is not None]
        return np.array([m for m, _ in pairs], dtype=int), np.array([v for _, v in pairs], dtype=float)


@dataclass(frozen=True)
class RegimeFit:
    field: str
    Mt: int | None
    level_low_M: float
    level_high_M: float | None
    sse: float
    sse_gain: float


_KIND_ATTR = {"positive": "mu_bar_pos", "negative": "mu_bar_neg", "absolute": "mu_bar_abs"}


def aggregate_exponents(fits: Iterable[TailFit], min_tail: int = DEFAULT_MIN_TAIL) -> AggregateCurve:
    """Unweighted mean exponent per (maturity, kind) over markets.

    ``n_markets`` counts the markets contributing any accepted fit at that
    maturity; fits with fewer than ``min_tail`` tail points are ignored.
    """
    cells: dict[int, dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
    markets: dict[int, set] = defaultdict(set)
    for f in fits:
        if f.n_tail < min_tail:
            continue
        cells[f.maturity][f.kind].append(f.mu)
        markets[f.maturity].add(f.market)
    if not cells:
        raise InsufficientDataError("no accepted tail fits to aggregate")
    points = []
    for m in sorted(cells):
        means = {_KIND_ATTR[k]: float(np.mean(v)) for k, v in cells[m].items()}
        points.append(AggregatePoint(m, len(markets[m]), **means))
    return AggregateCurve(tuple(points))


def _level(v: np.ndarray) -> float:
    return float(v[0]) if np.all(v == v[0]) else float(v.mean())


def _sse(v: np.ndarray, level: float) -> float:
    d = v - level
    return float(np.dot(d, d))


def fit_step(
    maturities: Sequence[int],
    values: Sequence[float],
    threshold: float = DEFAULT_PLATEAU_GAIN,
    min_side: int = 2,
    field: str = "abs",
) -> RegimeFit:
    """Best two-level step over every admissible breakpoint.

    The breakpoint maturity belongs to the low-M side.  Ties in SSE go to the
    smallest breakpoint.
    """
    order = np.argsort(maturities, kind="stable")
    m = np.asarray(maturities)[order]
    v = np.asarray(values, dtype=float)[order]
    if len(v) < max(5, 2 * min_side):
        raise InsufficientDataError(f"plateau fit needs >= 5 maturities, got {len(v)}")
    flat = _level(v)
    sse_one = _sse(v, flat)

    best = None
    for i in range(min_side, len(v) - min_side + 1):
        lo, hi = _level(v[:i]), _level(v[i:])
        sse = _sse(v[:i], lo) + _sse(v[i:], hi)
        if best is None or sse < best[0]:
            best = (sse, int(m[i - 1]), lo, hi)

    sse, mt, lo, hi = best
    gain = 0.0 if sse_one == 0 else 1.0 - sse / sse_one
    if gain > threshold:
        return RegimeFit(field, mt, lo, hi, sse, gain)
    return RegimeFit(field, None, flat, None, sse_one, gain)


def fit_two_plateaus(
    curve: AggregateCurve,
    field: str = "abs",
    threshold: float = DEFAULT_PLATEAU_GAIN,
    min_side: int = 2,
) -> RegimeFit:
    """Two-plateau fit of one aggregate field (``abs``, ``pos``, ``neg`` or ``asymmetry``)."""
    if field not in FIELDS:
        raise ValueError(f"field must be one of {sorted(FIELDS)}")
    m, v = curve.series(field)
    return fit_step(m, v, threshold, min_side, field)
