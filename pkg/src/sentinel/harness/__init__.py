"""Seeded experiment runner writing metrics.csv, summary.json and manifest.json."""
from .config import EXPERIMENTS, ExperimentConfig, load_config
from .experiments import run_experiment

__all__ = ["EXPERIMENTS", "ExperimentConfig", "load_config", "run_experiment"]
