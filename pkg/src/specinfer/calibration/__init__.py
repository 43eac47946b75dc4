"""Newton MAP and Hessian-preconditioned MCMC inference of operator spectra."""

from .checks import DerivativeReport, check_derivatives, random_admissible, step_sweep
from .forward import (
    ObservationSet,
    SpectralForwardModel,
    admissible_bounds,
    forward_observe,
    spectrum_to_vector,
    unit_bounds,
    vector_to_spectrum,
)
from .mcmc import (
    BoxPosterior,
    Chain,
    effective_sample_size,
    integrated_autocorr_time,
    mc_standard_error,
    mcmc_sample,
    regularize_metric,
)
from .misfit import Misfit, MisfitEvaluation, hessian, jacobian, misfit
from .newton import NewtonOptions, NewtonResult, newton_map
from .pipeline import (
    CalibrationResult,
    alias_period,
    calibrate_map,
    calibrate_multistart,
    canonical_alias,
    default_starts,
    positivity_margin,
)
from .sensitivity import DEFAULT_GAMMA_TOL, SensitivityResult, sensitivity_cutoff

__all__ = [
    "BoxPosterior", "CalibrationResult", "Chain", "DEFAULT_GAMMA_TOL", "DerivativeReport",
    "Misfit", "MisfitEvaluation", "NewtonOptions", "NewtonResult", "ObservationSet",
    "SensitivityResult", "SpectralForwardModel", "admissible_bounds", "alias_period",
    "calibrate_map", "calibrate_multistart", "canonical_alias", "check_derivatives",
    "default_starts", "effective_sample_size", "forward_observe", "hessian",
    "integrated_autocorr_time", "jacobian", "mc_standard_error", "mcmc_sample", "misfit",
    "newton_map", "positivity_margin", "random_admissible", "regularize_metric",
    "sensitivity_cutoff", "spectrum_to_vector", "step_sweep", "unit_bounds", "vector_to_spectrum",
]
