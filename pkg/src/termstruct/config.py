"""Pipeline configuration, read from a YAML file.

Example::

    version: 1
    inputs: [quotes.csv]           # relative to this file
    period: intersection           # or {start: 2001-01-01, end: 2001-12-31}
    maturity_caps: {WTI: 84}
    contango: {far: 9}
    scaling:
      fit_range: [1, 24]           # default range for every market
      fit_ranges: {NG: [1, 12]}    # per-market overrides
      crossover_threshold: 0.5
      r2_floor: 0.95
    tails: {min_size: 100, min_tail: 50, max_candidates: 250, bootstrap: 1000, gof: 250}
    aggregate: {plateau_threshold: 0.3}
    seed: 20100101

Every key is optional except ``seed`` when either bootstrap count is
positive.  Unknown keys are rejected.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .tails import TailConfig

SCHEMA_VERSION = 1

_TOP = {"version", "inputs", "period", "maturity_caps", "contango", "scaling", "tails", "aggregate", "seed", "out"}
_SECTIONS = {
    "contango": {"far"},
    "scaling": {"fit_range", "fit_ranges", "crossover_threshold", "r2_floor"},
    "tails": {"min_size", "min_tail", "max_candidates", "bootstrap", "gof"},
    "aggregate": {"plateau_threshold"},
}


@dataclass
class PipelineConfig:
    inputs: list[str] = field(default_factory=list)
    period: str | tuple[dt.date, dt.date] = "intersection"
    maturity_caps: dict[str, int] = field(default_factory=dict)
    contango_far: int = 9
    fit_range: tuple[int, int] | None = None
    fit_ranges: dict[str, tuple[int, int]] = field(default_factory=dict)
    crossover_threshold: float = 0.5
    r2_floor: float = 0.95
    tails: TailConfig = field(default_factory=lambda: TailConfig(seed=0))
    plateau_threshold: float = 0.3
    seed: int | None = None
    out: str | None = None
    base_dir: Path = field(default_factory=Path.cwd)

    def input_paths(self) -> list[Path]:
        return [(self.base_dir / p) for p in self.inputs]

    def range_for(self, market: str) -> tuple[int, int] | None:
        return self.fit_ranges.get(market, self.fit_range)

    def tail_config(self) -> TailConfig:
        return TailConfig(**{**self.tails.__dict__, "seed": self.seed or 0})

    def validate(self) -> "PipelineConfig":
        if self.contango_far < 2:
            raise ConfigError("contango.far must be >= 2")
        for name in ("crossover_threshold", "r2_floor", "plateau_threshold"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                raise ConfigError(f"{name} must lie in [0, 1), got {v}")
        t = self.tails
        if t.min_tail < 2 or t.min_size < t.min_tail:
            raise ConfigError("tails: need 2 <= min_tail <= min_size")
        if t.max_candidates < 1:
            raise ConfigError("tails.max_candidates must be >= 1")
        if t.bootstrap < 0 or t.gof < 0 or t.bootstrap == 1:
            raise ConfigError("tails: bootstrap must be 0 or >= 2, gof must be >= 0")
        if (t.bootstrap > 0 or t.gof > 0) and self.seed is None:
            raise ConfigError("a seed is required when bootstrap or gof replicates are requested")
        if self.seed is not None and self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        for m, cap in self.maturity_caps.items():
            if cap < 1:
                raise ConfigError(f"maturity cap for {m} must be >= 1")
        return self

    def echo(self) -> dict[str, Any]:
        """Everything that influences results; output location and worker count excluded."""
        period = self.period if isinstance(self.period, str) else {
            "start": self.period[0].isoformat(), "end": self.period[1].isoformat()}
        return {
            "version": SCHEMA_VERSION,
            "inputs": list(self.inputs),
            "period": period,
            "maturity_caps": dict(sorted(self.maturity_caps.items())),
            "contango": {"far": self.contango_far},
            "scaling": {
                "fit_range": list(self.fit_range) if self.fit_range else None,
                "fit_ranges": {k: list(v) for k, v in sorted(self.fit_ranges.items())},
                "crossover_threshold": self.crossover_threshold,
                "r2_floor": self.r2_floor,
            },
            "tails": {
                "min_size": self.tails.min_size,
                "min_tail": self.tails.min_tail,
                "max_candidates": self.tails.max_candidates,
                "bootstrap": self.tails.bootstrap,
                "gof": self.tails.gof,
            },
            "aggregate": {"plateau_threshold": self.plateau_threshold},
            "seed": self.seed,
        }


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{name} must be a mapping")
    unknown = set(sec) - _SECTIONS[name]
    if unknown:
        raise ConfigError(f"unknown keys in {name}: {sorted(unknown)}")
    return sec


def _range(v, where) -> tuple[int, int]:
    if not (isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(x, int) for x in v) and v[0] < v[1]):
        raise ConfigError(f"{where} must be [low, high] integer ranks with low < high")
    return int(v[0]), int(v[1])


def _date(v, where) -> dt.date:
    if isinstance(v, dt.date):
        return v
    try:
        return dt.date.fromisoformat(str(v))
    except ValueError:
        raise ConfigError(f"{where}: malformed date {v!r}") from None


def from_mapping(raw: dict | None, base_dir: Path | None = None) -> PipelineConfig:
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping at top level")
    unknown = set(raw) - _TOP
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if raw.get("version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError(f"unsupported config version {raw.get('version')!r}")
    cfg = PipelineConfig(base_dir=base_dir or Path.cwd())
    try:
        inputs = raw.get("inputs", [])
        if isinstance(inputs, str):
            inputs = [inputs]
        cfg.inputs = [str(p) for p in inputs]

        period = raw.get("period", "intersection")
        if isinstance(period, dict):
            if set(period) != {"start", "end"}:
                raise ConfigError("period must be 'intersection' or {start, end}")
            cfg.period = (_date(period["start"], "period.start"), _date(period["end"], "period.end"))
        elif period != "intersection":
            raise ConfigError("period must be 'intersection' or {start, end}")

        cfg.maturity_caps = {str(k): int(v) for k, v in (raw.get("maturity_caps") or {}).items()}
        cfg.contango_far = int(_section(raw, "contango").get("far", 9))

        sc = _section(raw, "scaling")
        if sc.get("fit_range") is not None:
            cfg.fit_range = _range(sc["fit_range"], "scaling.fit_range")
        cfg.fit_ranges = {str(k): _range(v, f"scaling.fit_ranges.{k}") for k, v in (sc.get("fit_ranges") or {}).items()}
        cfg.crossover_threshold = float(sc.get("crossover_threshold", 0.5))
        cfg.r2_floor = float(sc.get("r2_floor", 0.95))

        cfg.tails = TailConfig(**{k: int(v) for k, v in _section(raw, "tails").items()})
        cfg.plateau_threshold = float(_section(raw, "aggregate").get("plateau_threshold", 0.3))
        if raw.get("seed") is not None:
            cfg.seed = int(raw["seed"])
        if raw.get("out") is not None:
            cfg.out = str(raw["out"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except (yaml.YAMLError, ValueError) as exc:  # bad timestamps surface as ValueError
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return from_mapping(raw, path.parent)
