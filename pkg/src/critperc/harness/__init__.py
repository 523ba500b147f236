"""Experiments, configuration, output and the command line interface."""
from __future__ import annotations

from .config import ConfigError, ExperimentConfig, ResultRecord, default_config, load_config, thresholds
from .render import render_svg

__all__ = ["ConfigError", "ExperimentConfig", "ResultRecord", "default_config", "load_config", "thresholds",
           "render_svg"]
