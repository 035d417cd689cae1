"""Pressure-correction finite-element/finite-volume solver for the
isothermal drift-flux two-phase model."""

__version__ = "0.1.0"

from .config import SimulationConfig, load_config, make_config
from .driver import run_simulation, simulate, convergence_study
from .eos import EosParams
from .mesh import build_uniform_mesh, build_diamond_geometry

__all__ = [
    "SimulationConfig", "load_config", "make_config",
    "run_simulation", "simulate", "convergence_study",
    "EosParams", "build_uniform_mesh", "build_diamond_geometry",
]
