"""Simulator and learning testbed for freshness-aware task offloading in an
air-ground edge computing system with a VCG channel auction."""

from .config import RunConfig, WorldConfig, LearnConfig, desk_config, full_config, load_config
from .harness import Simulation, simulate, run_experiment

__all__ = ["RunConfig", "WorldConfig", "LearnConfig", "desk_config", "full_config",
           "load_config", "Simulation", "simulate", "run_experiment"]
__version__ = "0.1.0"
