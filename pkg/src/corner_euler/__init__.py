"""Lagrangian 2D Euler solver for circular sectors with a corner."""
from .biot_savart import CellSet, QuadratureConfig, VortexCell, velocity_at, velocity_batch
from .conformal import DomainError, SectorDomain, from_halfdisk, map_derivative, to_halfdisk
from .diagnostics import (GrowthClassification, GrowthSeries, arrival_time, classify_growth,
                          continuity_modulus, corner_jump, lipschitz_quotient,
                          velocity_exponent_probe)
from .greens import green_domain, green_halfdisk, grad_green_domain, green_selftest
from .scenarios import ConfigurationError, ScenarioSpec, build_cells, make_initial_vorticity, odd_extend
from .transport import (BoundaryMarker, IntegrationError, SimulationState, rk4_step,
                        run_simulation, vorticity_at)

__all__ = [
    "BoundaryMarker", "CellSet", "ConfigurationError", "DomainError", "GrowthClassification",
    "GrowthSeries", "IntegrationError", "QuadratureConfig", "ScenarioSpec", "SectorDomain",
    "SimulationState", "VortexCell", "arrival_time", "build_cells", "classify_growth",
    "continuity_modulus", "corner_jump", "from_halfdisk", "grad_green_domain", "green_domain",
    "green_halfdisk", "green_selftest", "lipschitz_quotient", "make_initial_vorticity",
    "map_derivative", "odd_extend", "rk4_step", "run_simulation", "to_halfdisk",
    "velocity_at", "velocity_batch", "velocity_exponent_probe", "vorticity_at",
]
