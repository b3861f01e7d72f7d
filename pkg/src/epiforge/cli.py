"""Command-line entry point.

    epiforge fixtures --out data/ --seed 0
    epiforge run --config exp.toml
    epiforge evaluate --config exp.toml --scenario 1 --models pop
    epiforge explain --config exp.toml

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import config as config_mod
from . import fixtures, ingest, pipeline
from .errors import ConfigError, DataError, EpiforgeError, NumericError

EXIT_CODES = {ConfigError: 2, DataError: 3, NumericError: 4}
LOG_LEVELS = {"0": "WARNING", "1": "INFO", "2": "DEBUG"}


def _exit_code(exc):
    for cls, code in EXIT_CODES.items():
        if isinstance(exc, cls):
            return code
    return 1


def _setup_logging():
    raw = os.environ.get("EPIFORGE_LOG", "WARNING").strip().upper()
    level = LOG_LEVELS.get(raw, raw)
    if not isinstance(logging.getLevelName(level), int):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _common(p):
    p.add_argument("--config", type=Path, help="TOML experiment file")
    p.add_argument("--data", type=Path, help="directory holding cases/vaccination/mobility/weather CSVs")
    p.add_argument("--region", help="community code, or ES for the national aggregate")
    p.add_argument("--scenario", type=int, action="append", choices=[1, 2, 3, 4],
                   help="scenario to run (repeatable)")
    p.add_argument("--models", choices=config_mod.MODEL_SETS)
    p.add_argument("--aggregation", action="append", choices=config_mod.AGGREGATIONS,
                   help="ensemble method (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, help="report directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="epiforge", description="COVID-19 case forecasting ensembles")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("run", "evaluate and explain"), ("evaluate", "forecasts and metrics only"),
                       ("explain", "Shapley attributions only")):
        _common(sub.add_parser(name, help=text))
    fx = sub.add_parser("fixtures", help="write synthetic input feeds")
    fx.add_argument("--out", type=Path, required=True)
    fx.add_argument("--seed", type=int, default=0)
    fx.add_argument("--profile", choices=sorted(fixtures.WAVES), default="default")
    fx.add_argument("--region", action="append", dest="regions",
                    help="region code to generate (repeatable)")
    return parser


def resolve_config(args):
    cfg = config_mod.load_config(args.config) if args.config else config_mod.ExperimentConfig()
    changes = {
        "region": args.region,
        "scenarios": sorted(set(args.scenario)) if args.scenario else None,
        "models": args.models,
        "aggregations": list(dict.fromkeys(args.aggregation)) if args.aggregation else None,
        "seed": args.seed,
        "out": args.out,
    }
    if args.data:
        changes["data"] = {k: args.data / f"{k}.csv" for k in ingest.KINDS}
    if args.scenario and cfg.explain_scenario not in changes["scenarios"]:
        changes["explain_scenario"] = None
    if args.command == "explain":
        changes["explain"] = True
    return config_mod.override(cfg, **changes)


def _summary(result):
    lines = []
    for entry in result.metrics.get("results", []):
        lines.append(f"scenario {entry['scenario']} {entry['aggregation']:>6} {entry['subset']:>3}: "
                     f"MAPE {100 * entry['mape']:.2f}%  RMSE {entry['rmse']:.1f}")
    if result.attribution is not None:
        top = ", ".join(result.attribution.ranking()[:5])
        lines.append(f"top features: {top}")
    return "\n".join(lines)


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "fixtures":
            regions = tuple(args.regions) if args.regions else fixtures.DEFAULT_REGIONS
            paths = fixtures.make_fixtures(args.seed, args.out, regions=regions, profile=args.profile)
            for path in paths.values():
                print(path)
            return 0
        cfg = resolve_config(args)
        if args.command == "explain":
            if not cfg.use_ml:
                raise ConfigError("explain needs the ML models (--models ml or all)")
            result = pipeline.run_pipeline(cfg, evaluate=False, explain_models=True)
        elif args.command == "evaluate":
            result = pipeline.run_pipeline(cfg, explain_models=False)
        else:
            result = pipeline.run_pipeline(cfg)
        text = _summary(result)
        if text:
            print(text)
        print(f"reports written to {cfg.out}")
        return 0
    except EpiforgeError as exc:
        print(f"epiforge: {exc.category} error {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
