"""Stage orchestration over an output directory.

Each stage reads the ``.jsonl`` files of the stages it depends on, computes
everything in memory, then writes its own ``.jsonl`` file and plot-data CSVs
and rebuilds ``report.jsonl``.  ``run_pipeline`` runs all stages in a scratch
directory and moves the results into place only when every stage succeeded.
"""
from __future__ import annotations

import datetime as dt
import logging
import shutil
import tempfile
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import report
from .aggregate import FIELDS, aggregate_exponents, fit_two_plateaus
from .config import PipelineConfig
from .curvestats import MomentSummary, contango_index, moment_term_structure
from .errors import ConfigError, DependencyError, DuplicateRecordError, InsufficientDataError, TermStructError
from .ingest import ConstantMaturitySeries, Dataset, align_period, build_dataset, parse_quotes
from .returns import ReturnSeries, compute_returns
from .scaling import detect_crossover, fit_power_law_scaling, samuelson_check
from .synth import PRNG
from .tails import LEVY_BOUNDARY, TailFit, tail_term_structure

log = logging.getLogger(__name__)

STAGES = ("ingest", "returns", "moments", "scaling", "tails", "aggregate")
REQUIRES = {
    "ingest": (),
    "returns": ("ingest",),
    "moments": ("ingest", "returns"),
    "scaling": ("moments",),
    "tails": ("returns",),
    "aggregate": ("tails",),
}
FIGURES = {
    "fig2_mean_abs": "mean_abs",
    "fig3_variance": "variance",
    "fig4_skewness": "skewness",
    "fig5_kurtosis": "kurtosis",
}
EXPONENT_CONVENTION = "mu is the CCDF tail exponent, P(X > x) ~ x^-mu; density exponent is mu + 1"


def _warning(stage, message, **where):
    return {"record": "warning", "stage": stage, "message": message, **where}


def _load(out: Path, stage: str) -> list[dict]:
    path = out / f"{stage}.jsonl"
    if not path.exists():
        raise DependencyError(f"missing output of stage '{stage}' ({path.name}); run it first")
    return report.read_jsonl(path)


# -- stages -----------------------------------------------------------------

def stage_ingest(cfg: PipelineConfig, out: Path, jobs: int):
    if not cfg.inputs:
        raise ConfigError("no input files configured")
    quotes = []
    seen = set()
    for path in cfg.input_paths():
        with open(path, encoding="utf-8") as fh:
            for q in parse_quotes(fh):
                key = (q.market, q.obs_date, q.delivery)
                if key in seen:
                    raise DuplicateRecordError(0, f"{path.name}: record {key} repeats one from another file")
                seen.add(key)
                quotes.append(q)
    if not quotes:
        raise InsufficientDataError("input files contain no quotes")

    by_market = defaultdict(list)
    for q in quotes:
        by_market[q.market].append(q)
    datasets = [build_dataset(by_market[m]) for m in sorted(by_market)]
    aligned = align_period(datasets, cfg.period, cfg.maturity_caps)

    records = [{"record": "period", "start": aligned[0].period[0].isoformat(),
                "end": aligned[0].period[1].isoformat(), "markets": sorted(by_market)}]
    for market, ds in zip(sorted(by_market), aligned):
        if not ds.series:
            records.append(_warning("ingest", "no observations left after alignment", market=market))
        for s in ds.all_series():
            records.append({"record": "series", "market": s.market, "maturity": s.maturity,
                            "dates": [d.isoformat() for d in s.dates], "prices": list(s.prices)})
    return {"ingest.jsonl": records}


def _dataset_from(records) -> Dataset:
    series = [
        ConstantMaturitySeries(r["market"], r["maturity"], tuple(dt.date.fromisoformat(d) for d in r["dates"]),
                               tuple(r["prices"]))
        for r in records if r["record"] == "series"
    ]
    return Dataset.from_series(series)


def stage_returns(cfg, out, jobs):
    dataset = _dataset_from(_load(out, "ingest"))
    records, skipped = [], defaultdict(int)
    for s in dataset.all_series():
        try:
            r = compute_returns(s)
        except InsufficientDataError as exc:
            records.append(_warning("returns", str(exc), market=s.market, maturity=s.maturity))
            continue
        skipped[s.market] += r.skipped
        records.append({"record": "returns", "market": r.market, "maturity": r.maturity,
                        "dates": [d.isoformat() for d in r.dates], "dt": r.gaps.tolist(),
                        "values": r.values.tolist(), "skipped": r.skipped})
    for m, k in sorted(skipped.items()):
        if k:
            records.append(_warning("returns", f"{k} price pairs more than 3 days apart skipped", market=m))
    return {"returns.jsonl": records}


def _returns_from(records) -> list[ReturnSeries]:
    return [
        ReturnSeries(r["market"], r["maturity"], tuple(dt.date.fromisoformat(d) for d in r["dates"]),
                     np.array(r["dt"], dtype=np.int64), np.array(r["values"], dtype=float), r["skipped"])
        for r in records if r["record"] == "returns"
    ]


def stage_moments(cfg, out, jobs):
    dataset = _dataset_from(_load(out, "ingest"))
    summaries = moment_term_structure(_returns_from(_load(out, "returns")))
    records = [{"record": "moments", **s.__dict__} for s in summaries]
    for market in dataset.markets:
        try:
            c = contango_index(dataset, market, cfg.contango_far)
        except InsufficientDataError as exc:
            records.append(_warning("moments", f"contango index: {exc}", market=market))
            continue
        records.append({"record": "contango", **c.__dict__})
    files = {"moments.jsonl": records}
    for name, stat in FIGURES.items():
        files[f"{name}.csv"] = report.render_csv(
            ("market", "maturity", stat), ((s.market, s.maturity, getattr(s, stat)) for s in summaries))
    return files


def stage_scaling(cfg, out, jobs):
    summaries = [MomentSummary(**{k: v for k, v in r.items() if k != "record"})
                 for r in _load(out, "moments") if r["record"] == "moments"]
    by_market = defaultdict(list)
    for s in summaries:
        by_market[s.market].append(s)

    records, table = [], []
    for market, curve in sorted(by_market.items()):
        row = {"market": market}
        for stat in ("mean_abs", "variance"):
            pts = [(s.maturity, getattr(s, stat)) for s in curve]
            try:
                fit = fit_power_law_scaling(pts, cfg.range_for(market), stat, market, cfg.r2_floor)
            except TermStructError as exc:
                records.append(_warning("scaling", f"{stat} power law: {exc}", market=market))
                continue
            rec = {"record": "scaling_fit", **fit.__dict__, "range": list(fit.range), "r2_floor": cfg.r2_floor}
            records.append(rec)
            if not fit.power_law:
                records.append(_warning("scaling", f"{stat} fit rejected: r_squared {fit.r_squared:.4f} "
                                        f"below floor {cfg.r2_floor}", market=market))
            row[stat] = fit
            if len(pts) >= 8:
                try:
                    cr = detect_crossover(pts, cfg.crossover_threshold, market=market, statistic=stat)
                    records.append({"record": "crossover", **cr.__dict__})
                except TermStructError as exc:
                    records.append(_warning("scaling", f"{stat} crossover: {exc}", market=market))
        if len(curve) >= 2:
            for m in samuelson_check(curve):
                records.append({"record": "samuelson", **m.__dict__})
        table.append(row)

    def cols(row, stat):
        f = row.get(stat)
        return (f.alpha, f.alpha_err, f.r_squared, f.power_law) if f else (None, None, None, None)

    csv = report.render_csv(
        ("market", "alpha_mean", "d_alpha_mean", "r2_mean", "power_law_mean",
         "alpha_var", "d_alpha_var", "r2_var", "power_law_var"),
        ((row["market"], *cols(row, "mean_abs"), *cols(row, "variance")) for row in table))
    return {"scaling.jsonl": records, "table2_scaling.csv": csv}


def stage_tails(cfg, out, jobs):
    returns = _returns_from(_load(out, "returns"))
    result = tail_term_structure(returns, cfg.tail_config(), jobs)
    records = [{"record": "tail_fit", **f.__dict__, "alpha": f.alpha, "levy_stable": f.levy_stable}
               for f in result.fits]
    for market, m, kind, err in result.failures:
        records.append(_warning("tails", err, market=market, maturity=m, kind=kind))
    csv = report.render_csv(
        ("market", "maturity", "kind", "mu", "mu_err", "xmin", "n_tail", "gof_p", "levy_limit"),
        ((f.market, f.maturity, f.kind, f.mu, f.mu_err, f.xmin, f.n_tail, f.gof_p, LEVY_BOUNDARY)
         for f in result.fits))
    return {"tails.jsonl": records, "fig6_7_tails.csv": csv}


_TAILFIT_KEYS = set(TailFit.__dataclass_fields__)


def stage_aggregate(cfg, out, jobs):
    fits = [TailFit(**{k: v for k, v in r.items() if k in _TAILFIT_KEYS})
            for r in _load(out, "tails") if r["record"] == "tail_fit"]
    curve = aggregate_exponents(fits, cfg.tails.min_tail)
    records = [{"record": "aggregate", **p.__dict__, "asymmetry": p.asymmetry} for p in curve.points]
    plateau = None
    for field in FIELDS:
        try:
            fit = fit_two_plateaus(curve, field, cfg.plateau_threshold)
        except TermStructError as exc:
            records.append(_warning("aggregate", f"{field} plateau fit: {exc}"))
            continue
        records.append({"record": "regime", **fit.__dict__})
        if field == "abs":
            plateau = fit

    def level(m):
        if plateau is None:
            return None
        if plateau.Mt is None or m <= plateau.Mt:
            return plateau.level_low_M
        return plateau.level_high_M

    csv = report.render_csv(
        ("maturity", "n_markets", "mu_bar_pos", "mu_bar_neg", "mu_bar_abs", "asymmetry", "abs_plateau"),
        ((p.maturity, p.n_markets, p.mu_bar_pos, p.mu_bar_neg, p.mu_bar_abs, p.asymmetry, level(p.maturity))
         for p in curve.points))
    return {"aggregate.jsonl": records, "fig8_aggregate.csv": csv}


_RUNNERS = {
    "ingest": stage_ingest,
    "returns": stage_returns,
    "moments": stage_moments,
    "scaling": stage_scaling,
    "tails": stage_tails,
    "aggregate": stage_aggregate,
}


# -- report -----------------------------------------------------------------

def _summarize(stage: str, rec: dict) -> dict:
    if rec["record"] == "series":
        return {"record": "series_summary", "market": rec["market"], "maturity": rec["maturity"],
                "points": len(rec["dates"]), "first": rec["dates"][0], "last": rec["dates"][-1]}
    if rec["record"] == "returns":
        return {"record": "returns_summary", "market": rec["market"], "maturity": rec["maturity"],
                "count": len(rec["values"]), "skipped": rec["skipped"]}
    return rec


def build_report(cfg: PipelineConfig, out: Path) -> str:
    records = [report.header("report", config=cfg.echo(), prng=PRNG, exponent_convention=EXPONENT_CONVENTION)]
    warnings = []
    for stage in STAGES:
        path = out / f"{stage}.jsonl"
        if not path.exists():
            continue
        for rec in report.read_jsonl(path):
            (warnings if rec["record"] == "warning" else records).append(_summarize(stage, rec))
    return report.render_jsonl(records + warnings)


def run_stage(stage: str, cfg: PipelineConfig, out: Path | str, jobs: int = 1) -> list[Path]:
    """Run one stage against ``out``; returns the files written."""
    if stage not in _RUNNERS:
        raise ValueError(f"unknown stage {stage!r}; valid stages: {', '.join(STAGES)}")
    out = Path(out)
    for dep in REQUIRES[stage]:
        if not (out / f"{dep}.jsonl").exists():
            raise DependencyError(f"stage '{stage}' needs the output of stage '{dep}'; run it first")
    log.info("running stage %s", stage)
    files = _RUNNERS[stage](cfg, out, jobs)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, content in files.items():
        if not isinstance(content, str):
            content = report.render_jsonl([report.header(stage)] + content)
        report.write_text(out / name, content)
        written.append(out / name)
    report.write_text(out / "report.jsonl", build_report(cfg, out))
    written.append(out / "report.jsonl")
    return written


def run_pipeline(cfg: PipelineConfig, out: Path | str, jobs: int = 1) -> Path:
    """All stages in order; on failure nothing is written to ``out``."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".termstruct-", dir=out.parent))
    try:
        for stage in STAGES:
            run_stage(stage, cfg, scratch, jobs)
        out.mkdir(exist_ok=True)
        for f in sorted(scratch.iterdir()):
            f.replace(out / f.name)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)
    return out / "report.jsonl"
