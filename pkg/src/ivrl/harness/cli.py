"""Command-line entry point: ``ivrl --preset NAME [options]``.

Precedence is built-in defaults, then the ``--config`` JSON file, then flags.
Errors are reported as one JSON object on stderr with a nonzero exit code.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import fields

from ..environments import AdEnvConfig, LqEnvConfig
from ..sa import LearningSchedule
from .experiments import PRESETS, ExperimentConfig, IterateDivergence, run_preset
from .io import emit_csv, format_value, load_config

_AD_PRESETS = ("ivsgd-table", "coverage-table", "infer")
_LQ_PRESETS = ("lq-run", "lq-oracle")


class _JsonErrorParser(argparse.ArgumentParser):
    def error(self, message):
        print(json.dumps({"error": "usage", "message": message}), file=sys.stderr)
        sys.exit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _JsonErrorParser(prog="ivrl", description="Run an experiment preset and write CSV.")
    p.add_argument("--preset", choices=PRESETS, help="experiment to run")
    p.add_argument("--config", help="JSON file with any ExperimentConfig fields")
    p.add_argument("--reps", type=int, help="number of replications")
    p.add_argument("--horizon", type=int, help="iterations per replication")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="CSV output path (stdout when omitted)")
    p.add_argument("--threads", type=int, help="worker threads; output does not depend on it")
    return p


def _tuple_fields(d: dict) -> dict:
    return {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from plain JSON data."""
    data = dict(data)
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if "preset" not in data:
        raise ValueError("no preset given")
    if isinstance(data.get("schedule"), dict):
        data["schedule"] = LearningSchedule(**data["schedule"])
    if isinstance(data.get("env"), dict):
        env_cls = LqEnvConfig if data["preset"] in _LQ_PRESETS else AdEnvConfig
        data["env"] = env_cls(**_tuple_fields(data["env"]))
    return ExperimentConfig(**data)


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    data = load_config(args.config) if args.config else {}
    flags = {
        "preset": args.preset,
        "replications": args.reps,
        "horizon": args.horizon,
        "master_seed": args.seed,
        "output": args.out,
        "threads": args.threads,
    }
    data.update({k: v for k, v in flags.items() if v is not None})
    return config_from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        start = time.perf_counter()
        rows, columns = run_preset(config)
        if config.output:
            emit_csv(rows, config.output, columns)
            print(json.dumps({
                "preset": config.preset, "rows": len(rows), "output": config.output,
                "seconds": round(time.perf_counter() - start, 3),
            }))
        else:
            writer = csv.writer(sys.stdout, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([format_value(row[c]) for c in columns])
    except IterateDivergence as exc:
        print(json.dumps({"error": "divergence", "message": str(exc), **exc.diagnostic}), file=sys.stderr)
        return 3
    except (ValueError, TypeError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
