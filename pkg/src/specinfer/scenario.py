"""Build model objects and run the standard workflows from an :class:`ExperimentConfig`."""

from __future__ import annotations

import logging

import numpy as np

from .calibration import (
    BoxPosterior,
    CalibrationResult,
    Misfit,
    NewtonOptions,
    ObservationSet,
    SpectralForwardModel,
    admissible_bounds,
    calibrate_map,
    calibrate_multistart,
    canonical_alias,
    default_starts,
    mcmc_sample,
    spectrum_to_vector,
    unit_bounds,
)
from .errors import ConfigError
from .highfid import (
    DarcyConstants,
    EnsembleSpec,
    Grid2D,
    PermeabilityStats,
    TransportSettings,
)
from .io.config import ExperimentConfig
from .spectral import (
    InitialCondition,
    OperatorSpectrum,
    TransportConstants,
    WaveGrid,
    fickian_spectrum,
    frade_spectrum,
    second_derivative_spectrum,
)

logger = logging.getLogger(__name__)

# keeps r_k strictly positive, where the polar parametrization is smooth
RADIUS_MARGIN = 1e-9


def wave_grid(cfg: ExperimentConfig) -> WaveGrid:
    g = cfg["grid"]
    return WaveGrid(g["domain_length"], g["n_modes"], g["n_points"])


def transport_constants(cfg: ExperimentConfig) -> TransportConstants:
    c = cfg["constants"]
    return TransportConstants(c["mean_velocity"], c["diffusivity"], c["fractional_order"])


def initial_condition(cfg: ExperimentConfig) -> InitialCondition:
    ic = cfg["ic"]
    return InitialCondition(ic["kind"], ic["center"], ic["width"], ic["mode"])


def truth_spectrum(cfg: ExperimentConfig) -> OperatorSpectrum:
    return frade_spectrum(transport_constants(cfg), wave_grid(cfg))


def observation_points(cfg: ExperimentConfig):
    o = cfg["observations"]
    length = cfg["grid"]["domain_length"]
    if o["layout"] == "spatial":
        n = o["n_points"]
        return np.arange(n) * (length / n), np.full(n, o["time"])
    n = o["n_times"]
    return np.full(n, o["location"]), o["t_end"] * np.arange(1, n + 1) / n


def synthetic_observations(cfg: ExperimentConfig, spectrum: OperatorSpectrum | None = None) -> ObservationSet:
    """Observations of the configured truth; noise is ``noise * peak`` unless ``sigma`` is set."""
    grid = wave_grid(cfg)
    consts = transport_constants(cfg)
    spectrum = truth_spectrum(cfg) if spectrum is None else spectrum
    x, t = observation_points(cfg)
    model = SpectralForwardModel(initial_condition(cfg).on_grid(grid), consts, x, t)
    clean = model.observe(spectrum_to_vector(spectrum))
    o = cfg["observations"]
    sigma = o["sigma"] if o["sigma"] is not None else o["noise"] * float(np.abs(clean).max())
    if sigma == 0:
        return ObservationSet(x, t, clean, None)
    rng = np.random.default_rng(o["seed"])
    return ObservationSet(x, t, clean + rng.normal(0.0, sigma, len(clean)), sigma)


def prior_bounds(cfg: ExperimentConfig, grid: WaveGrid):
    """Box for the rescaled parameters.

    ``admissible``: ``r_k >= 0`` and angles in range, radii otherwise free.
    ``unit``: the unit cube. ``widened``: ``r_k >= 0`` and ``r* <= 1``.
    """
    prior = cfg["calibration"]["prior"]
    if prior == "unit":
        return unit_bounds(grid)
    lo, hi = admissible_bounds(grid)
    n = grid.n_modes
    lo = lo.copy()
    lo[:n] += RADIUS_MARGIN
    if prior == "widened":
        hi = np.ones(2 * n)
    return lo, hi


def starting_points(cfg: ExperimentConfig, grid: WaveGrid, lower, upper) -> list:
    start = cfg["calibration"]["start"]
    consts = transport_constants(cfg)
    if start == "multistart":
        return default_starts(grid, consts, lower, upper)
    if start == "fickian":
        spec = fickian_spectrum(consts, grid)
    else:
        spec = second_derivative_spectrum(grid)
    return [np.clip(spectrum_to_vector(spec), lower, upper)]


def build_misfit(cfg: ExperimentConfig, obs: ObservationSet) -> Misfit:
    grid = wave_grid(cfg)
    model = SpectralForwardModel(initial_condition(cfg).on_grid(grid), transport_constants(cfg), obs.x, obs.t)
    return Misfit(model, obs)


def calibrate(cfg: ExperimentConfig, obs: ObservationSet) -> tuple[CalibrationResult, Misfit]:
    """MAP calibration as configured; the result carries the canonical alias when enabled."""
    misfit = build_misfit(cfg, obs)
    grid = wave_grid(cfg)
    c = cfg["calibration"]
    lo, hi = prior_bounds(cfg, grid)
    starts = starting_points(cfg, grid, lo, hi)
    opts = NewtonOptions(max_iter=c["max_iter"], gtol=c["gtol"])
    kw = dict(gamma_tol=c["gamma_tol"], refine=c["refine"], min_modes=c["min_modes"], options=opts)
    if len(starts) > 1:
        res = calibrate_multistart(misfit, starts, lo, hi, **kw)
    else:
        res = calibrate_map(misfit, starts[0], lo, hi, **kw)
    if c["canonical_alias"]:
        res.theta = canonical_alias(misfit.model, res.theta, res.active, lo, hi)
    logger.info("MAP: cutoff %d, J=%.6e, %s", res.cutoff, res.newton.value, res.newton.reason)
    return res, misfit


def sample_posterior(cfg: ExperimentConfig, misfit: Misfit, result: CalibrationResult):
    """Chain over the active parameters started at the MAP point."""
    if misfit.obs.sigma is None:
        raise ConfigError("MCMC needs a noise level: set observations.noise or observations.sigma")
    m = cfg["mcmc"]
    lo, hi = prior_bounds(cfg, misfit.model.grid)
    post = BoxPosterior(misfit, result.theta, result.active, lo, hi)
    chain = mcmc_sample(post, post.reduce(result.theta), m["n_samples"], step_size=m["step_size"],
                        burn_in=m["burn_in"], thin=m["thin"], seed=m["seed"],
                        position_dependent=m["position_dependent"], jump_prob=m["jump_prob"])
    return chain, post


def highfid_grid(cfg: ExperimentConfig) -> Grid2D:
    h = cfg["highfid"]
    return Grid2D(h["lx"], h["ly"], h["nx"], h["ny"])


def permeability_stats(cfg: ExperimentConfig) -> PermeabilityStats:
    h = cfg["highfid"]
    return PermeabilityStats(h["log_mean"], h["log_variance"], h["corr_x"], h["corr_y"])


def transport_settings(cfg: ExperimentConfig, limiter: str | None = None) -> TransportSettings:
    h = cfg["highfid"]
    return TransportSettings(h["molecular_diffusivity"], DarcyConstants(target_velocity=h["target_velocity"]),
                             h["limiter"] if limiter is None else limiter, h["cfl"])


def ensemble_spec(cfg: ExperimentConfig, size: int | None = None, workers: int | None = None) -> EnsembleSpec:
    h = cfg["highfid"]
    return EnsembleSpec(permeability_stats(cfg), h["ensemble_size"] if size is None else size,
                        h["seed"], h["workers"] if workers is None else workers)


def upscaled_observations(x, t: float, values, sigma: float | None = None) -> ObservationSet:
    """Depth-averaged snapshot at time ``t`` as an observation set."""
    x = np.asarray(x, float)
    return ObservationSet(x, np.full(len(x), float(t)), values, sigma)
