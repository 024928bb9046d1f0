"""Experiment orchestration: configs, runs, baselines and plot data."""

from .baseline import baseline_adaptive
from .config import ExperimentConfig, config_hash, load_config, validate
from .plotdata import emit_plot_data, fit_loglog, read_ledger
from .runner import run_experiment, run_single

__all__ = [
    "ExperimentConfig",
    "baseline_adaptive",
    "config_hash",
    "emit_plot_data",
    "fit_loglog",
    "load_config",
    "read_ledger",
    "run_experiment",
    "run_single",
    "validate",
]
