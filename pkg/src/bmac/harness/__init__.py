"""Configuration-driven experiments and reference oracles."""

from .config import ExperimentConfig, load_config, parse_config
from .experiments import render_csv, run_experiment, write_csv

__all__ = ["ExperimentConfig", "load_config", "parse_config", "render_csv", "run_experiment",
           "write_csv"]
