"""High-fidelity 2D data model: permeability, Darcy flow, transport, upscaling."""

from .darcy import DarcyConstants, DarcyVelocity, enforce_continuity, solve_darcy
from .grid import Concentration2D, Grid2D, depth_average
from .permeability import (
    PermeabilityRealization,
    PermeabilityStats,
    sample_permeability,
)
from .transport import LIMITERS, advance_ade2d, advance_to, cfl_number, stable_time_step
from .upscale import (
    EnsembleSpec,
    TransportSettings,
    UpscaledSeries,
    evolve_realization,
    run_upscaled,
)

__all__ = [
    "Concentration2D",
    "DarcyConstants",
    "DarcyVelocity",
    "EnsembleSpec",
    "Grid2D",
    "LIMITERS",
    "PermeabilityRealization",
    "PermeabilityStats",
    "TransportSettings",
    "UpscaledSeries",
    "advance_ade2d",
    "advance_to",
    "cfl_number",
    "depth_average",
    "enforce_continuity",
    "evolve_realization",
    "run_upscaled",
    "sample_permeability",
    "solve_darcy",
    "stable_time_step",
]
