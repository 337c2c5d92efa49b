"""Seeded, replication-parallel experiment driver."""

from .experiments import PRESETS, ExperimentConfig, TableRow
from .io import emit_csv, emit_json
from .rng import seed_stream

__all__ = ["PRESETS", "ExperimentConfig", "TableRow", "emit_csv", "emit_json", "seed_stream"]
