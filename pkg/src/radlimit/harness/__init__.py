"""Configuration, presets, eps sweeps, reports and the CLI."""

from .config import RunConfig, load_config, parse_config
from .presets import PRESETS, build_preset
from .sweep import ConvergenceReport, LayerReport, epsilon_sweep, fit_order, layer_sweep

__all__ = [
    "RunConfig",
    "load_config",
    "parse_config",
    "PRESETS",
    "build_preset",
    "ConvergenceReport",
    "LayerReport",
    "epsilon_sweep",
    "fit_order",
    "layer_sweep",
]
