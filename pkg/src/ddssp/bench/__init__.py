"""Benchmark harness, metrics and the canned synthetic datasets."""

from .harness import ExperimentConfig, ResultRow, aggregate, emit, load_results, run_experiment, run_trials
from .metrics import auc, mse
from .synth import make_synthetic, write_synthetic

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "aggregate",
    "auc",
    "emit",
    "load_results",
    "make_synthetic",
    "mse",
    "run_experiment",
    "run_trials",
    "write_synthetic",
]
