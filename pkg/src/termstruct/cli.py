"""Command-line entry point.

    termstruct synth --out data --seed 7
    termstruct run --config data/config.yaml --out results --jobs 2
    termstruct tails --config data/config.yaml --out results

Exit codes: 0 success, 2 configuration or usage error, 3 input error
(unreadable or malformed files, missing stage outputs), 4 insufficient or
degenerate data (including an empty common period).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from .config import PipelineConfig, from_mapping, load_config
from .errors import (
    AlignmentError,
    ConfigError,
    DegenerateDistributionError,
    DependencyError,
    DomainError,
    InsufficientDataError,
    ParseError,
    TermStructError,
)
from .pipeline import STAGES, run_pipeline, run_stage
from .synth import DISTRIBUTIONS, PRNG, SynthSpec, gen_samuelson_dataset, write_quotes_csv

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_DATA = 0, 2, 3, 4

log = logging.getLogger("termstruct")


def _global_flags(p: argparse.ArgumentParser, default):
    p.add_argument("--config", type=Path, default=default, help="YAML pipeline configuration")
    p.add_argument("--out", type=Path, default=default, help="output directory")
    p.add_argument("--seed", type=int, default=default, help="master seed for all resampling")
    p.add_argument("--jobs", type=int, default=default, help="worker processes for tail fits")
    p.add_argument("--input", type=Path, action="append", default=default,
                   help="quote CSV (repeatable); replaces the config's inputs")
    p.add_argument("-v", "--verbose", action="store_true", default=default)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="termstruct", description="Futures term-structure statistics.")
    _global_flags(parser, None)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, argparse.SUPPRESS)

    for stage in STAGES:
        sub.add_parser(stage, parents=[common], help=f"run the {stage} stage only")
    sub.add_parser("run", parents=[common], help="run every stage in order")

    s = sub.add_parser("synth", parents=[common], help="write a synthetic quote CSV and a matching config")
    s.add_argument("--records", type=int, default=2500, help="business days per series")
    s.add_argument("--maturities", type=int, default=15, help="ranks 1..N")
    s.add_argument("--beta", type=float, default=0.175, help="return scale ~ M^-beta")
    s.add_argument("--distribution", choices=DISTRIBUTIONS, default="gaussian")
    s.add_argument("--tail-mu", type=float, default=3.0, help="tail exponent (degrees of freedom for student_t)")
    s.add_argument("--base-scale", type=float, default=0.02)
    s.add_argument("--markets", default="SYN", help="comma-separated market names")
    return parser


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else from_mapping({})
    if args.input:
        cfg.inputs = [str(p.resolve()) for p in args.input]
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg.validate()


def _out_dir(args, cfg: PipelineConfig) -> Path:
    if args.out:
        return args.out
    if cfg.out:
        return cfg.base_dir / cfg.out
    raise ConfigError("no output directory: pass --out or set 'out' in the config")


def _synth(args) -> int:
    out = args.out or Path(".")
    seed = 0 if args.seed is None else args.seed
    spec = SynthSpec(
        seed=seed,
        T=args.records,
        maturities=tuple(range(1, args.maturities + 1)),
        tail_mu=args.tail_mu,
        scale_alpha=args.beta,
        distribution=args.distribution,
        base_scale=args.base_scale,
        markets=tuple(m.strip() for m in args.markets.split(",") if m.strip()),
    )
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "quotes.csv", "w", encoding="utf-8", newline="") as fh:
        rows = write_quotes_csv(gen_samuelson_dataset(spec), fh)
    truth = {
        "seed": seed, "records": spec.T, "maturities": list(spec.maturities), "beta": spec.scale_alpha,
        "alpha_mean": spec.scale_alpha, "alpha_var": 2 * spec.scale_alpha,
        "distribution": spec.distribution, "tail_mu": spec.tail_mu, "base_scale": spec.base_scale,
        "markets": list(spec.markets), "prng": PRNG,
    }
    (out / "truth.json").write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    config = {"version": 1, "inputs": ["quotes.csv"], "seed": seed, "out": "results",
              "tails": {"bootstrap": 100, "gof": 0}}
    (out / "config.yaml").write_text(yaml.safe_dump(config, sort_keys=False), encoding="utf-8")
    print(f"wrote {rows} quotes to {out / 'quotes.csv'}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    jobs = args.jobs or 1
    try:
        if jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        if args.command == "synth":
            return _synth(args)
        cfg = _config(args)
        out = _out_dir(args, cfg)
        if args.command == "run":
            path = run_pipeline(cfg, out, jobs)
        else:
            path = run_stage(args.command, cfg, out, jobs)[-1]
        print(f"report written to {path}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"termstruct: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, DependencyError, OSError, ValueError) as exc:
        print(f"termstruct: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InsufficientDataError, DegenerateDistributionError, AlignmentError, DomainError, TermStructError) as exc:
        print(f"termstruct: insufficient data: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
