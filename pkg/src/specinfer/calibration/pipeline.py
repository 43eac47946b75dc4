"""Sensitivity-guided MAP calibration with optional active-set refinement."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from ..spectral import ANGLE_LO
from .misfit import Misfit
from .newton import NewtonOptions, NewtonResult, newton_map
from .sensitivity import DEFAULT_GAMMA_TOL, SensitivityResult, sensitivity_cutoff

logger = logging.getLogger(__name__)


@dataclass
class CalibrationResult:
    theta: np.ndarray
    active: np.ndarray
    sensitivity: SensitivityResult
    newton: NewtonResult
    passes: int
    cutoffs: list[int] = field(default_factory=list)

    @property
    def cutoff(self) -> int:
        n = len(self.active) // 2
        idx = np.nonzero(self.active[:n])[0]
        return int(idx[-1]) + 1 if len(idx) else 0

    @property
    def converged(self) -> bool:
        return self.newton.converged


def calibrate_map(misfit: Misfit, theta0, lower=None, upper=None,
                  gamma_tol: float = DEFAULT_GAMMA_TOL, refine: bool = False,
                  max_passes: int = 6, min_modes: int = 0, active=None,
                  options: NewtonOptions | None = None) -> CalibrationResult:
    """Pick active modes at ``theta0`` and run projected Newton on them.

    With ``refine`` the cutoff is recomputed at each converged point and the
    active set grows until the cutoff stops increasing. Modes the starting
    spectrum damps too strongly to register a sensitivity can become
    informative once the neighbouring modes have moved.

    ``min_modes`` forces at least that many leading modes into the active set.
    A given ``active`` mask skips mode selection altogether.
    """
    lower = misfit.model.lower if lower is None else np.asarray(lower, float)
    upper = misfit.model.upper if upper is None else np.asarray(upper, float)
    theta = np.asarray(theta0, float)
    if np.any(theta < lower) or np.any(theta > upper):
        raise DomainError("starting point lies outside the bounds")
    n = len(theta) // 2
    if active is not None:
        active = np.asarray(active, bool)
        sens = sensitivity_cutoff(misfit, theta, gamma_tol)
        res = newton_map(misfit, theta, lower, upper, active=active, options=options)
        return CalibrationResult(res.theta, active, sens, res, 1, [sens.cutoff])
    active = np.zeros(2 * n, bool)
    cutoffs = []
    sens = None
    res = None
    passes = 0
    for passes in range(1, max_passes + 1):
        sens = sensitivity_cutoff(misfit, theta, gamma_tol)
        cut = max(sens.cutoff, min(min_modes, n))
        cutoffs.append(sens.cutoff)
        prev = int(active[:n].sum())
        if res is not None and cut <= prev:
            passes -= 1
            break
        modes = np.arange(1, n + 1) <= max(cut, prev)
        active = np.concatenate([modes, modes])
        res = newton_map(misfit, theta, lower, upper, active=active, options=options)
        theta = res.theta
        logger.info("pass %d: cutoff %d, J=%.6e (%s)", passes, int(modes.sum()), res.value, res.reason)
        if not refine:
            break
    return CalibrationResult(theta, active, sens, res, passes, cutoffs)


def positivity_margin(field_values) -> float:
    """Minimum of a field relative to its peak; negative means undershoot."""
    v = np.asarray(field_values, float)
    return float(v.min() / np.abs(v).max())


def calibrate_multistart(misfit: Misfit, starts, lower=None, upper=None,
                         **kwargs) -> CalibrationResult:
    """Run :func:`calibrate_map` from each start and keep the lowest misfit.

    The misfit is not convex in the argument coordinates, so a single
    starting spectrum can land in a poor local minimum. The active set is
    chosen once, at the first start, and shared by all runs.
    """
    starts = list(starts)
    if not starts:
        raise DomainError("no starting points given")
    if kwargs.get("active") is None:
        first = calibrate_map(misfit, starts[0], lower, upper, **kwargs)
        kwargs = dict(kwargs, active=first.active, refine=False)
        starts = starts[1:]
        best = first
    else:
        best = None
    for s in starts:
        res = calibrate_map(misfit, s, lower, upper, **kwargs)
        logger.info("start -> J=%.6e", res.newton.value)
        if best is None or res.newton.value < best.newton.value:
            best = res
    return best


def default_starts(grid, constants, lower, upper, factors=(1.0, 0.3, 3.0)):
    """Fickian spectra at scaled diffusivities plus the mid-angle pure-advection point.

    The first entry uses the unscaled diffusivity, so it doubles as the
    reference point for mode selection in :func:`calibrate_multistart`.
    """
    from ..spectral import TransportConstants, fickian_spectrum
    from .forward import spectrum_to_vector

    out = []
    for f in factors:
        c = TransportConstants(constants.mean_velocity, constants.diffusivity * f, 2.0)
        out.append(np.clip(spectrum_to_vector(fickian_spectrum(c, grid)), lower, upper))
    n = grid.n_modes
    out.append(np.clip(np.concatenate([np.full(n, -np.inf), np.full(n, 0.5)]), lower, upper))
    return out


def alias_period(model) -> float | None:
    """``2 pi / t`` when every observation shares one time ``t > 0``, else ``None``."""
    t = model.t
    if t[0] > 0 and np.allclose(t, t[0], rtol=1e-12, atol=0.0):
        return 2.0 * np.pi / t[0]
    return None


def canonical_alias(model, theta, active=None, lower=None, upper=None) -> np.ndarray:
    """Move each active mode to its smallest-radius alias inside the bounds.

    Data taken at a single time ``t`` cannot distinguish ``Im mu_k`` from
    ``Im mu_k + 2 pi m / t``, so the MAP point is not unique. Under a prior
    that is uniform in (r*, theta*) the mass of each alias basin scales like
    ``1 / r``; the smallest-radius alias is the most probable one. The
    predictions are unchanged to rounding.
    """
    period = alias_period(model)
    theta = np.array(theta, dtype=float)
    if period is None:
        return theta
    n = model.grid.n_modes
    lower = model.lower if lower is None else np.asarray(lower, float)
    upper = model.upper if upper is None else np.asarray(upper, float)
    modes = np.arange(n) if active is None else np.nonzero(np.asarray(active, bool)[:n])[0]
    r, ang = model.polar(theta)
    mu = r * np.exp(1j * ang)
    for k in modes:
        if r[k] == 0:
            continue
        m = np.round(mu[k].imag / period)
        cand = mu[k] - 1j * period * np.array([m - 1, m, m + 1])
        best = None
        for c in sorted(cand, key=abs):
            rs = (abs(c) - model.offset[k]) / model.scale[k]
            ts = (np.mod(np.angle(c), 2 * np.pi) - ANGLE_LO) / np.pi
            if lower[k] <= rs <= upper[k] and lower[n + k] <= ts <= upper[n + k]:
                best = (rs, ts)
                break
        if best is not None:
            theta[k], theta[n + k] = best
    return theta
