"""Tail exponents of return distributions, maturity by maturity.

The exponent ``mu`` is the CCDF exponent, ``P(X > x) ~ x**(-mu)``; the
continuous power-law density then decays as ``x**(-(mu + 1))`` and the
inverse cubic law reads ``mu ~ 3``.  ``xmin`` is chosen by minimising the
Kolmogorov-Smirnov distance between the empirical tail and the fitted model
over a grid of candidate cutoffs; the exponent at each cutoff is the
closed-form maximum-likelihood estimate.
"""
from __future__ import annotations

import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np
from scipy import optimize, special, stats

from .errors import (
    BootstrapFailureError,
    DegenerateDistributionError,
    DegenerateSampleError,
    InsufficientDataError,
    InsufficientTailError,
)
from .returns import ReturnSeries

KINDS = ("positive", "negative", "absolute")
LEVY_BOUNDARY = 2.0

DEFAULT_MIN_SIZE = 100
DEFAULT_MIN_TAIL = 50
DEFAULT_MAX_CANDIDATES = 250

# stream tags keep bootstrap and goodness-of-fit draws independent
_SE_STREAM = 1
_GOF_STREAM = 2
_CHUNK_CELLS = 2_000_000
_CHUNK_ROWS = 16


def is_levy_stable(mu: float) -> bool:
    """Strict: ``mu == 2`` is on the finite-variance side."""
    return mu < LEVY_BOUNDARY


@dataclass(frozen=True, eq=False)
class TailSample:
    kind: str
    values: np.ndarray
    market: str = ""
    maturity: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if np.any(~(values > 0)):
            raise ValueError("tail sample values must be strictly positive")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    def with_values(self, values) -> "TailSample":
        return replace(self, values=values)


@dataclass(frozen=True)
class TailFit:
    kind: str
    mu: float
    xmin: float
    n_tail: int
    ks_stat: float
    n: int
    market: str = ""
    maturity: int = 0
    mu_err: float | None = None
    gof_p: float | None = None

    @property
    def alpha(self) -> float:
        """Density exponent ``mu + 1``."""
        return self.mu + 1.0

    @property
    def levy_stable(self) -> bool:
        return is_levy_stable(self.mu)


@dataclass(frozen=True)
class LikelihoodRatioReport:
    alternative: str
    lr: float
    p: float
    n_tail: int


@dataclass(frozen=True)
class TailConfig:
    min_size: int = DEFAULT_MIN_SIZE
    min_tail: int = DEFAULT_MIN_TAIL
    max_candidates: int = DEFAULT_MAX_CANDIDATES
    bootstrap: int = 1000
    gof: int = 250
    seed: int = 0

    def fit_kwargs(self) -> dict:
        return dict(min_size=self.min_size, min_tail=self.min_tail, max_candidates=self.max_candidates)


def split_tails(series) -> tuple[TailSample, TailSample, TailSample]:
    """Positive returns, magnitudes of negative returns, and all magnitudes.

    Zero returns are dropped from all three samples.
    """
    if isinstance(series, ReturnSeries):
        r, market, m = series.values, series.market, series.maturity
    else:
        r, market, m = np.asarray(series, dtype=float), "", 0
    return (
        TailSample("positive", r[r > 0], market, m),
        TailSample("negative", -r[r < 0], market, m),
        TailSample("absolute", np.abs(r[r != 0]), market, m),
    )


def _scan(x: np.ndarray, starts: np.ndarray, xmins: np.ndarray):
    """MLE density exponent and KS distance for each candidate cutoff.

    ``x`` is sorted ascending; candidate ``c`` uses the tail ``x[starts[c]:]``
    with cutoff ``xmins[c]``.  ``starts`` must be non-decreasing.
    """
    n_all = len(x)
    # logs relative to the maximum so that power-of-two rescaling is bit-exact
    ref = x[-1]
    lx = np.log(x / ref)
    lxm = np.log(xmins / ref)
    out_a = np.empty(len(starts))
    out_d = np.empty(len(starts))
    step = max(1, min(_CHUNK_ROWS, _CHUNK_CELLS // max(n_all, 1)))
    with np.errstate(divide="ignore", invalid="ignore"):
        for lo in range(0, len(starts), step):
            j = starts[lo:lo + step, None]
            j0 = int(j[0, 0])
            idx = np.arange(j0, n_all)[None, :]
            mask = idx >= j
            n = (n_all - j).astype(float)
            logs = np.where(mask, lx[None, j0:] - lxm[lo:lo + step, None], 0.0)
            a = 1.0 + n[:, 0] / logs.sum(axis=1)
            cdf = -np.expm1(-(a[:, None] - 1.0) * logs)
            rank = (idx - j + 1) / n
            gap = np.maximum(rank - cdf, cdf - (rank - 1.0 / n))
            out_a[lo:lo + step] = a
            out_d[lo:lo + step] = np.where(mask, gap, -np.inf).max(axis=1)
    return out_a, out_d


def fit_tail(
    sample: TailSample,
    xmin: float | None = None,
    min_size: int = DEFAULT_MIN_SIZE,
    min_tail: int = DEFAULT_MIN_TAIL,
    max_candidates: int = DEFAULT_MAX_CANDIDATES,
) -> TailFit:
    """Continuous power-law fit with KS-selected cutoff.

    Parameters
    ----------
    sample : TailSample
        Strictly positive values.
    xmin : float, optional
        Fix the cutoff instead of scanning for it.
    min_size : int
        Smallest sample accepted.
    min_tail : int
        Smallest number of points at or above a cutoff for it to be a
        candidate.
    max_candidates : int
        When the sample has more distinct eligible values than this, the
        candidates are thinned to this many, evenly spaced in rank.

    Returns
    -------
    TailFit
        With ``mu = a - 1`` where ``a`` is the density-exponent MLE
        ``1 + n / sum(ln(x / xmin))``.
    """
    x = np.sort(sample.values)
    size = len(x)
    if size == 0 or size < min_size:
        raise InsufficientTailError(f"sample of {size} values is below the minimum {max(min_size, 1)}")

    if xmin is not None:
        if not xmin > 0:
            raise ValueError("xmin must be positive")
        starts = np.array([np.searchsorted(x, xmin, side="left")])
        if size - starts[0] < max(min_tail, 1):
            raise InsufficientTailError(f"{size - starts[0]} values at or above xmin={xmin}")
        cands = np.array([float(xmin)])
    else:
        if x[0] == x[-1]:
            raise DegenerateSampleError("all sample values are equal")
        uniq, first = np.unique(x, return_index=True)
        keep = (size - first >= min_tail) & (uniq < x[-1])
        uniq, first = uniq[keep], first[keep]
        if len(uniq) == 0:
            raise InsufficientTailError(f"no cutoff leaves {min_tail} values in the tail")
        if len(uniq) > max_candidates:
            pick = np.unique(np.round(np.linspace(0, len(uniq) - 1, max_candidates)).astype(int))
            uniq, first = uniq[pick], first[pick]
        starts, cands = first, uniq

    a, d = _scan(x, starts, cands)
    if not np.all(np.isfinite(a)):
        if xmin is not None:
            raise DegenerateSampleError(f"all tail values equal xmin={xmin}")
        d = np.where(np.isfinite(a), d, np.inf)
    best = int(np.argmin(d))
    return TailFit(
        sample.kind,
        float(a[best] - 1.0),
        float(cands[best]),
        int(size - starts[best]),
        float(d[best]),
        size,
        sample.market,
        sample.maturity,
    )


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *key]))


def _with_retries(make_replicate, refit, seed, stream, b, max_retries):
    for attempt in range(max_retries + 1):
        rng = _rng(seed, stream, b, attempt)
        try:
            return refit(make_replicate(rng))
        except (InsufficientDataError, DegenerateDistributionError):
            continue
    raise BootstrapFailureError(f"replicate {b} failed {max_retries + 1} times")


def bootstrap_se(
    sample: TailSample,
    B: int = 1000,
    seed: int = 0,
    max_retries: int = 20,
    **fit_kw,
) -> float:
    """Standard deviation of ``mu`` over ``B`` nonparametric resamples.

    Replicate ``b`` draws from a generator seeded by ``(seed, b, attempt)``,
    so the result does not depend on evaluation order.
    """
    if B < 2:
        raise ValueError("bootstrap needs B >= 2")
    fit_tail(sample, **fit_kw)
    values = sample.values
    n = len(values)

    def resample(rng):
        return sample.with_values(values[rng.integers(0, n, size=n)])

    mus = [
        _with_retries(resample, lambda s: fit_tail(s, **fit_kw).mu, seed, _SE_STREAM, b, max_retries)
        for b in range(B)
    ]
    return float(np.std(mus, ddof=1))


def gof_pvalue(
    fit: TailFit,
    sample: TailSample,
    B: int = 250,
    seed: int = 0,
    max_retries: int = 20,
    **fit_kw,
) -> float | None:
    """Semi-parametric bootstrap p-value of the KS distance.

    Each replicate keeps the sample size: ``n_tail`` draws from the fitted
    power law above ``xmin`` and the rest resampled from the data below
    ``xmin``.  Returns ``None`` when ``B == 0``.
    """
    if B == 0:
        return None
    values = sample.values
    below = values[values < fit.xmin]
    n_tail = fit.n_tail
    n_below = len(values) - n_tail

    def synthetic(rng):
        u = 1.0 - rng.random(n_tail)
        upper = fit.xmin * u ** (-1.0 / fit.mu)
        lower = below[rng.integers(0, len(below), size=n_below)] if n_below else below[:0]
        return sample.with_values(np.concatenate([lower, upper]))

    ks = [
        _with_retries(synthetic, lambda s: fit_tail(s, **fit_kw).ks_stat, seed, _GOF_STREAM, b, max_retries)
        for b in range(B)
    ]
    return float(np.mean(np.asarray(ks) >= fit.ks_stat))


def _power_law_loglik(x, xmin, mu):
    a = mu + 1.0
    return np.log(a - 1.0) - np.log(xmin) - a * np.log(x / xmin)


def _exponential_loglik(x, xmin):
    excess = x - xmin
    if not excess.mean() > 0:
        raise DegenerateSampleError("tail has no spread above xmin")
    lam = 1.0 / excess.mean()
    return np.log(lam) - lam * excess


def _lognormal_loglik(x, xmin):
    lx = np.log(x)
    m0, s0 = lx.mean(), lx.std()
    if not s0 > 0:
        raise DegenerateSampleError("tail has no spread above xmin")
    lxmin = math.log(xmin)

    def pointwise(theta):
        m, s = theta[0], math.exp(theta[1])
        z = (lx - m) / s
        return -lx - math.log(s) - 0.5 * math.log(2 * math.pi) - 0.5 * z * z - stats.norm.logsf((lxmin - m) / s)

    res = optimize.minimize(
        lambda th: -pointwise(th).sum(),
        x0=[m0, math.log(s0)],
        method="L-BFGS-B",
        bounds=[(m0 - 100 * s0, m0 + 100 * s0), (math.log(s0) - 7, math.log(s0) + 7)],
    )
    return pointwise(res.x)


def likelihood_ratio(fit: TailFit, sample: TailSample, alternative: str) -> LikelihoodRatioReport:
    """Power law versus an alternative fitted on the same tail.

    ``lr > 0`` favours the power law.  ``p`` is the two-sided significance
    of ``lr`` under the normal approximation for a sum of pointwise
    log-likelihood differences.
    """
    x = sample.values[sample.values >= fit.xmin]
    if len(x) < 2:
        raise DegenerateSampleError("tail too small for a likelihood ratio")
    pl = _power_law_loglik(x, fit.xmin, fit.mu)
    if alternative == "exponential":
        alt = _exponential_loglik(x, fit.xmin)
    elif alternative == "lognormal":
        alt = _lognormal_loglik(x, fit.xmin)
    else:
        raise ValueError(f"unknown alternative {alternative!r}")
    diff = pl - alt
    lr = float(diff.sum())
    sd = float(diff.std())
    p = 1.0 if sd == 0 else float(special.erfc(abs(lr) / (math.sqrt(2 * len(x)) * sd)))
    return LikelihoodRatioReport(alternative, lr, p, len(x))


def hill_estimator(sample: TailSample, k: int) -> float:
    """Hill estimate of the CCDF exponent from the ``k`` largest values."""
    x = np.sort(np.asarray(sample.values if isinstance(sample, TailSample) else sample, dtype=float))[::-1]
    if not 2 <= k < len(x):
        raise ValueError(f"need 2 <= k < {len(x)}, got k={k}")
    den = float(np.sum(np.log(x[:k] / x[k])))
    if den == 0:
        raise DegenerateSampleError("the k+1 largest values are tied")
    return k / den


def cell_seed(seed: int, market: str, maturity: int, kind: str) -> int:
    """Seed for one (market, maturity, kind) cell, independent of run order."""
    key = zlib.crc32(f"{market}|{maturity}|{kind}".encode())
    return int(np.random.SeedSequence([int(seed), key]).generate_state(1, np.uint64)[0])


def fit_cell(sample: TailSample, config: TailConfig) -> TailFit:
    kw = config.fit_kwargs()
    fit = fit_tail(sample, **kw)
    seed = cell_seed(config.seed, sample.market, sample.maturity, sample.kind)
    if config.bootstrap > 0:
        fit = replace(fit, mu_err=bootstrap_se(sample, config.bootstrap, seed, **kw))
    if config.gof > 0:
        fit = replace(fit, gof_p=gof_pvalue(fit, sample, config.gof, seed, **kw))
    return fit


@dataclass
class TailTermStructure:
    fits: list[TailFit] = field(default_factory=list)
    failures: list[tuple[str, int, str, str]] = field(default_factory=list)


def _fit_cell_safe(args):
    sample, config = args
    try:
        return fit_cell(sample, config), None
    except (InsufficientDataError, DegenerateDistributionError, BootstrapFailureError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def tail_term_structure(
    returns: Iterable[ReturnSeries],
    config: TailConfig = TailConfig(),
    jobs: int = 1,
) -> TailTermStructure:
    """Fit all three tails of every series.

    Cells that cannot be fitted are listed in ``failures`` instead of
    aborting.  Output order is (market, maturity, kind) whatever ``jobs`` is.
    """
    cells = [
        (s, config)
        for r in sorted(returns, key=lambda r: (r.market, r.maturity))
        for s in split_tails(r)
    ]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_fit_cell_safe, cells, chunksize=max(1, len(cells) // (4 * jobs))))
    else:
        results = [_fit_cell_safe(c) for c in cells]

    out = TailTermStructure()
    for (sample, _), (fit, err) in zip(cells, results):
        if fit is not None:
            out.fits.append(fit)
        else:
            out.failures.append((sample.market, sample.maturity, sample.kind, err))
    return out
