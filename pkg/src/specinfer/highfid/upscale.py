"""Full 2D pipeline (permeability, Darcy, transport) reduced to depth averages."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from ..spectral import InitialCondition
from .darcy import DarcyConstants, DarcyVelocity, solve_darcy
from .grid import Concentration2D, Grid2D, depth_average
from .permeability import PermeabilityRealization, PermeabilityStats, sample_permeability
from .transport import advance_to, stable_time_step

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransportSettings:
    molecular_diffusivity: float = 1e-3
    darcy: DarcyConstants = DarcyConstants()
    limiter: str = "mc"
    cfl: float = 0.4


@dataclass(frozen=True)
class EnsembleSpec:
    """Realizations ``base_seed + i`` for ``i < size``."""

    stats: PermeabilityStats
    size: int = 1
    base_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.size < 1:
            raise DomainError("ensemble size must be at least 1")

    @property
    def seeds(self) -> list[int]:
        return [self.base_seed + i for i in range(self.size)]


@dataclass
class UpscaledSeries:
    """Depth-averaged snapshots ``cbar(x, t)``; ``stderr`` is zero for a single run."""

    x: np.ndarray
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    seeds: list = field(default_factory=list)
    fields: list | None = None

    @property
    def n_members(self) -> int:
        return max(len(self.seeds), 1)

    def snapshot(self, t) -> np.ndarray:
        hit = np.nonzero(np.isclose(self.times, t, rtol=0, atol=1e-12))[0]
        if len(hit) == 0:
            raise DomainError(f"no snapshot at t={t}")
        return self.mean[hit[0]]


def _profile(ic, grid: Grid2D) -> np.ndarray:
    if isinstance(ic, InitialCondition):
        return ic.sample(grid.xc, grid.lx)
    p = np.asarray(ic, dtype=float)
    if p.shape == (grid.nx,):
        return p
    raise DomainError("initial condition must be an InitialCondition or a length-n_x profile")


def evolve_realization(ic, velocity: DarcyVelocity, settings: TransportSettings, times,
                       keep_fields: bool = False):
    """Depth averages of one 2D run at each of ``times`` (first may be 0)."""
    grid = velocity.grid
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0) or times[0] < 0:
        raise DomainError("output times must be non-negative and strictly increasing")
    c = Concentration2D.from_profile(grid, _profile(ic, grid))
    dt_max = stable_time_step(velocity, settings.molecular_diffusivity, settings.cfl)
    out = np.empty((len(times), grid.nx))
    kept = []
    for n, t in enumerate(times):
        c = advance_to(c, velocity, settings.molecular_diffusivity, t, dt_max, settings.limiter)
        out[n] = depth_average(c)
        if keep_fields:
            kept.append(c)
    return out, kept


def _member(args):
    grid, stats, seed, ic, settings, times = args
    perm = sample_permeability(grid, stats, seed)
    vel = solve_darcy(perm, settings.darcy)
    return evolve_realization(ic, vel, settings, times)[0]


def run_upscaled(ic, source, grid: Grid2D, settings: TransportSettings | None = None,
                 times=(0.0, 1.0), keep_fields: bool = False) -> UpscaledSeries:
    """Run the pipeline for one realization or an ensemble.

    Parameters
    ----------
    ic
        :class:`InitialCondition` or x-profile; the 2D field is uniform in y.
    source
        A :class:`PermeabilityRealization` (single run) or an
        :class:`EnsembleSpec`. Ensemble members use seeds ``base_seed + i``
        and are reduced in member order, so the result does not depend on
        the number of workers.
    """
    settings = settings or TransportSettings()
    times = np.asarray(times, dtype=float)
    if isinstance(source, PermeabilityRealization):
        if source.grid != grid:
            raise DomainError("permeability grid does not match")
        vel = solve_darcy(source, settings.darcy)
        snaps, kept = evolve_realization(ic, vel, settings, times, keep_fields)
        seeds = [] if source.seed is None else [source.seed]
        return UpscaledSeries(grid.xc, times, snaps, np.zeros_like(snaps), seeds,
                              kept if keep_fields else None)
    if not isinstance(source, EnsembleSpec):
        raise DomainError("source must be a PermeabilityRealization or an EnsembleSpec")
    tasks = [(grid, source.stats, s, ic, settings, times) for s in source.seeds]
    if source.workers > 1 and source.size > 1:
        with ProcessPoolExecutor(max_workers=source.workers) as pool:
            members = list(pool.map(_member, tasks))
    else:
        members = [_member(t) for t in tasks]
    stack = np.stack(members)
    mean = stack.mean(axis=0)
    if source.size > 1:
        stderr = stack.std(axis=0, ddof=1) / np.sqrt(source.size)
    else:
        stderr = np.zeros_like(mean)
    logger.info("ensemble of %d members reduced", source.size)
    return UpscaledSeries(grid.xc, times, mean, stderr, source.seeds)
