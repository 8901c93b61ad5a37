"""Experiment harness: configs, runners, CSV records and SVG charts."""
from .config import ExperimentConfig, UsageError, build_config
from .experiments import (
    measure_variance,
    run_lax_demo,
    run_lemma_checks,
    run_rl,
    run_toy,
)
from .records import RunRecord, read_csv
from .svg import emit_svg

__all__ = [
    "ExperimentConfig", "UsageError", "build_config", "measure_variance", "run_lax_demo",
    "run_lemma_checks", "run_rl", "run_toy", "RunRecord", "read_csv", "emit_svg",
]
