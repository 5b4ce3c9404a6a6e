"""Acceptance criteria, one test each, with a PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the lines are printed in the
terminal summary and also on stdout with ``-s``.
"""
import datetime as dt
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from termstruct.cli import main
from termstruct.curvestats import contango_index, kurtosis, mean_abs, moment_term_structure, skewness, variance
from termstruct.ingest import ConstantMaturitySeries, Dataset
from termstruct.returns import compute_returns
from termstruct.scaling import fit_power_law_scaling
from termstruct.synth import SynthSpec, gen_pareto_sample, gen_samuelson_dataset, gen_step_curve
from termstruct.aggregate import fit_two_plateaus
from termstruct.tails import TailFit, TailSample, fit_tail, hill_estimator, is_levy_stable


def verdict(n, title, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}  ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_tail_exponent_recovery():
    t0 = time.perf_counter()
    mus = [fit_tail(gen_pareto_sample(3.0, 1.0, 5000, seed)).mu for seed in range(100)]
    elapsed = time.perf_counter() - t0
    hits = sum(2.85 <= m <= 3.15 for m in mus)
    verdict(1, "tail-exponent recovery", hits >= 95 and elapsed < 30,
            f"{hits}/100 in [2.85, 3.15], {elapsed:.1f}s")


def test_criterion_02_scaling_recovery():
    t0 = time.perf_counter()
    ok_mean = ok_var = 0
    for seed in range(20):
        s = moment_term_structure(gen_samuelson_dataset(SynthSpec(seed=seed, T=2500, maturities=tuple(range(1, 16)))))
        fm = fit_power_law_scaling([(x.maturity, x.mean_abs) for x in s])
        fv = fit_power_law_scaling([(x.maturity, x.variance) for x in s])
        ok_mean += abs(fm.alpha - 0.175) < 3 * fm.alpha_err
        ok_var += abs(fv.alpha - 0.35) < 3 * fv.alpha_err
    elapsed = time.perf_counter() - t0
    verdict(2, "scaling recovery", ok_mean == ok_var == 20 and elapsed < 10,
            f"alpha_mean {ok_mean}/20, alpha_var {ok_var}/20 within 3 se, {elapsed:.1f}s")


def test_criterion_03_exactness():
    worst, r2 = 0.0, []
    for alpha in (0.095, 0.175, 0.387):
        fit = fit_power_law_scaling([(m, 1.7 * m ** (-alpha)) for m in range(1, 37)])
        worst = max(worst, abs(fit.alpha - alpha) / alpha)
        r2.append(fit.r_squared)
    verdict(3, "power-law exactness", worst < 1e-10 and all(r == 1 for r in r2),
            f"max rel err {worst:.1e}, r_squared {r2}")


def test_criterion_04_regime_detection():
    exact = fit_two_plateaus(gen_step_curve((3.15, 2.53), 18, range(1, 37)))
    hits = sum(fit_two_plateaus(gen_step_curve((3.15, 2.53), 18, range(1, 37), 0.05, seed)).Mt == 18
               for seed in range(100))
    verdict(4, "regime detection", exact.Mt == 18 and exact.sse == 0 and hits >= 95,
            f"noiseless Mt={exact.Mt} sse={exact.sse}, noisy {hits}/100 at Mt=18")


def _close(a, b, rel=1e-6, abs_=1e-9):
    return abs(a - b) <= max(rel * abs(b), abs_)


def test_criterion_05_moment_identities():
    rng = np.random.default_rng(2024)
    bad = 0
    for _ in range(1000):
        r = rng.standard_t(5, rng.integers(4, 200)) * rng.uniform(1e-3, 1)
        shift, c = rng.uniform(-1, 1), rng.uniform(0.01, 100)
        m1, v, s, k = mean_abs(r), variance(r), skewness(r), kurtosis(r)
        checks = [
            _close(variance(r + shift), v), _close(skewness(r + shift), s, abs_=1e-6), _close(kurtosis(r + shift), k),
            _close(mean_abs(c * r), c * m1, rel=1e-12), _close(variance(c * r), c * c * v, rel=1e-12),
            _close(skewness(c * r), s, rel=1e-9, abs_=1e-12), _close(kurtosis(c * r), k, rel=1e-9),
            _close(skewness(-r), -s, rel=1e-12, abs_=1e-15), _close(kurtosis(-r), k, rel=1e-12),
            mean_abs(-r) == m1, k >= s * s + 1 - 1e-12,
        ]
        bad += not all(checks)
    g = np.random.default_rng(7).standard_normal(100_000)
    kg, sg = kurtosis(g), skewness(g)
    verdict(5, "moment identities", bad == 0 and 2.9 <= kg <= 3.1 and -0.05 <= sg <= 0.05,
            f"{1000 - bad}/1000 samples satisfy all identities, gaussian kurtosis {kg:.3f} skewness {sg:.4f}")


def test_criterion_06_gap_rule():
    d0 = dt.date(2005, 3, 1)
    dates = [d0, d0 + dt.timedelta(1), d0 + dt.timedelta(3), d0 + dt.timedelta(6), d0 + dt.timedelta(10)]
    prices = [100.0, 101.0, 103.0, 102.0, 110.0]
    r = compute_returns(ConstantMaturitySeries("X", 1, tuple(dates), tuple(prices)))
    gaps = [o.dt for o in r.observations]
    expected = [math.log(101 / 100), math.log(103 / 101) / 2, math.log(102 / 103) / 3]
    ok = (gaps == [1, 2, 3] and r.skipped == 1 and len(r) + r.skipped == len(prices) - 1
          and np.allclose(r.values, expected, rtol=1e-12))
    verdict(6, "gap rule", ok, f"gaps used {gaps}, skipped {r.skipped}")


def _contango(pairs):
    dates = tuple(dt.date(2001, 1, 1) + dt.timedelta(days=i) for i in range(len(pairs)))
    near = ConstantMaturitySeries("GC", 1, dates, tuple(float(a) for a, _ in pairs))
    far = ConstantMaturitySeries("GC", 9, dates, tuple(float(b) for _, b in pairs))
    return contango_index(Dataset.from_series([near, far]), "GC").C


def test_criterion_07_contango_index():
    up, down = _contango([(10, 11)] * 100), _contango([(11, 10)] * 100)
    gold = _contango([(10, 11)] * 99 + [(11, 10)])
    verdict(7, "contango index", up == 1 and down == 0 and gold == pytest.approx(0.99, abs=1e-15),
            f"up {up}, down {down}, 99-of-100 {gold}")


def test_criterion_08_brute_force_equivalence():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(500):
        n = int(rng.integers(2, 21))
        x = rng.pareto(2.0, n) + 1.0
        xmin = float(rng.choice(x[x < x.max()])) if np.any(x < x.max()) else 1.0
        tail = [v for v in x if v >= xmin]
        direct = 1.0 + len(tail) / math.fsum(math.log(v / xmin) for v in tail)
        got = fit_tail(TailSample("absolute", x), xmin=xmin, min_size=1, min_tail=1).mu + 1.0
        worst = max(worst, abs(got - direct) / direct)
    c = 0.3
    hill = hill_estimator(TailSample("absolute", np.array([math.e**2, math.e, 1.0, 0.5]) * c), 2)
    hill_direct = 2 / (math.log(math.e**2 / 1) + math.log(math.e / 1))
    verdict(8, "brute-force equivalence", worst < 1e-13 and abs(hill - hill_direct) < 1e-14,
            f"max rel err {worst:.1e} over 500 samples, hill {hill!r}")


def test_criterion_09_determinism(tmp_path):
    assert main(["synth", "--out", str(tmp_path), "--records", "400", "--maturities", "6",
                 "--markets", "AA,BB", "--distribution", "student_t", "--seed", "5"]) == 0
    reports = []
    for name, jobs in (("a", 1), ("b", 1), ("c", 2), ("d", 4)):
        assert main(["run", "--config", str(tmp_path / "config.yaml"), "--out", str(tmp_path / name),
                     "--jobs", str(jobs)]) == 0
        reports.append((tmp_path / name / "report.jsonl").read_bytes())
    same = all(r == reports[0] for r in reports)
    verdict(9, "determinism", same, f"4 runs with --jobs 1,1,2,4, {len(reports[0])} bytes, identical={same}")


def test_criterion_10_levy_classification():
    a, b = is_levy_stable(1.99), is_levy_stable(2.0)
    fa = TailFit("absolute", 1.99, 1.0, 60, 0.01, 100).levy_stable
    fb = TailFit("absolute", 2.0, 1.0, 60, 0.01, 100).levy_stable
    verdict(10, "Levy classification", a is True and b is False and fa is True and fb is False,
            f"mu=1.99 -> {a}, mu=2.0 -> {b}")
