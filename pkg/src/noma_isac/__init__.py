"""Beamforming design for NOMA-assisted integrated sensing and communication."""

from .optimizer import Mode, Scene, SolveReport, SolverConfig, Status, solve
from .scene import ArrayGeometry, ScenarioConfig, generate_channels, load_config, default_scenario

__all__ = [
    "ArrayGeometry", "Mode", "ScenarioConfig", "Scene", "SolveReport", "SolverConfig", "Status",
    "generate_channels", "load_config", "default_scenario", "solve",
]
__version__ = "0.1.0"
