"""Gaussian-packet Bohmian dynamics for quadratic ghost Hamiltonians."""

__version__ = "0.1.0"

from .model import QuadraticModel, build_biham_pair, build_ghost_model, flow_spectrum  # noqa: E402
from .evolve import PacketState, evolve_packet, make_grid  # noqa: E402
from .scenario import PRESETS, Scenario, load_scenario  # noqa: E402
from .runner import run_scenario, simulate  # noqa: E402

__all__ = [
    "QuadraticModel", "build_ghost_model", "build_biham_pair", "flow_spectrum",
    "PacketState", "evolve_packet", "make_grid",
    "Scenario", "PRESETS", "load_scenario", "run_scenario", "simulate",
]
