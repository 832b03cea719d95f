"""Command-line batch runner for the named experiments.

Configuration schema (JSON object)::

    {
      "experiment": "kelly",          # required, see ``list-experiments``
      "seed": 7,                      # required, integer in [0, 2**64)
      "rounds": 100000,               # optional, per-experiment default
      "output_dir": "out/kelly",      # required unless DEMON_LEDGER_OUT is set
      "parameters": {"q": 0.25}       # optional, keys must be known
    }

Exit codes: 0 success, 1 a bound check failed, 2 usage error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .experiments import EXPERIMENTS, BoundCheck, RunReport, emit_plot_data
from .ledger import dumps_json

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
OUTPUT_ENV = "DEMON_LEDGER_OUT"
TOP_LEVEL_KEYS = {"experiment", "seed", "rounds", "output_dir", "parameters"}

__all__ = ["ExperimentConfig", "UsageError", "RunReport", "BoundCheck", "emit_plot_data",
           "load_config", "parse_config", "run_experiment", "main"]


class UsageError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    rounds: int
    output_dir: Path
    parameters: dict = field(default_factory=dict)
    digest: str = ""


def _compatible(default, value) -> bool:
    if default is None:
        return True
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    return isinstance(value, type(default))


def parse_config(raw, digest: str = "") -> ExperimentConfig:
    """Validate a decoded JSON object and fill in defaults."""
    if not isinstance(raw, dict):
        raise UsageError("configuration must be a JSON object")
    unknown = sorted(set(raw) - TOP_LEVEL_KEYS)
    if unknown:
        raise UsageError(f"unknown configuration key: {unknown[0]!r}")
    if "experiment" not in raw:
        raise UsageError("missing required key: 'experiment'")
    name = raw["experiment"]
    if name not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {name!r} under key 'experiment'")
    if "seed" not in raw:
        raise UsageError("missing required key: 'seed'")
    seed = raw["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64:
        raise UsageError("key 'seed' must be an integer in [0, 2**64)")
    entry = EXPERIMENTS[name]
    rounds = raw.get("rounds", entry.rounds)
    if not isinstance(rounds, int) or isinstance(rounds, bool) or rounds < 0:
        raise UsageError("key 'rounds' must be a nonnegative integer")
    out = os.environ.get(OUTPUT_ENV) or raw.get("output_dir")
    if not out or not isinstance(out, str):
        raise UsageError(f"missing required key: 'output_dir' (or set {OUTPUT_ENV})")
    given = raw.get("parameters", {})
    if not isinstance(given, dict):
        raise UsageError("key 'parameters' must be an object")
    params = dict(entry.defaults)
    for key, value in given.items():
        if key not in entry.defaults:
            raise UsageError(f"unknown parameter {key!r} for experiment {name!r}")
        if not _compatible(entry.defaults[key], value):
            raise UsageError(f"parameter {key!r} has the wrong type")
        params[key] = value
    return ExperimentConfig(name, seed, rounds, Path(out), params, digest)


def load_config(path) -> ExperimentConfig:
    """Read and validate a configuration file; ``OSError`` propagates."""
    data = Path(path).read_bytes()
    try:
        raw = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise UsageError(f"configuration is not valid JSON: {exc}") from exc
    return parse_config(raw, hashlib.sha256(data).hexdigest())


def run_experiment(config: ExperimentConfig) -> RunReport:
    """Run one experiment, writing its artifacts and ``report.json`` to ``output_dir``."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    entry = EXPERIMENTS[config.experiment]
    try:
        report = entry.runner(config.parameters, config.seed, config.rounds, out)
    except (ValueError, ArithmeticError) as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"invalid parameters for {config.experiment!r}: {exc}") from exc
    report.artifact_paths.append("report.json")
    body = {
        **report.to_dict(),
        "config_sha256": config.digest,
        "seed": config.seed,
        "rounds": config.rounds,
        "parameters": config.parameters,
    }
    (out / "report.json").write_text(dumps_json(body) + "\n")
    return report


def _summary(report: RunReport) -> str:
    lines = [f"{report.experiment}: closed_form={report.closed_form!r} {report.units}, "
             f"empirical={report.empirical_mean!r}, se={report.std_error!r}"]
    for c in report.bound_checks:
        lines.append(f"  [{'ok' if c.holds else 'VIOLATED'}] {c.name}: {c.value!r} <= {c.bound!r}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infoengine", description="Information-engine and betting experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment described by a JSON config")
    run.add_argument("config")
    sub.add_parser("list-experiments", help="print the experiment names and their default parameters")
    val = sub.add_parser("validate", help="check a JSON config without running it")
    val.add_argument("config")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE

    if args.command == "list-experiments":
        for name, entry in EXPERIMENTS.items():
            print(f"{name}\trounds={entry.rounds}\t{json.dumps(entry.defaults, sort_keys=True)}")
        return EXIT_OK
    try:
        config = load_config(args.config)
        if args.command == "validate":
            print(f"ok: {config.experiment}")
            return EXIT_OK
        report = run_experiment(config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(_summary(report))
    return EXIT_OK if report.ok else EXIT_VIOLATION
