"""Config-driven experiment runner (the ``mfmls`` command)."""

from .config import ExperimentConfig, load_config, parse_config
from .main import main

__all__ = ["ExperimentConfig", "load_config", "parse_config", "main"]
