"""Hessian-diagonal sensitivity cutoff used to pick the calibrated modes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, NumericalError
from .misfit import Misfit

DEFAULT_GAMMA_TOL = 1e-2


@dataclass(frozen=True)
class SensitivityResult:
    r_sensitivity: np.ndarray
    theta_sensitivity: np.ndarray
    k_r: int
    k_theta: int
    gamma_tol: float

    @property
    def cutoff(self) -> int:
        return max(self.k_r, self.k_theta)

    @property
    def n_modes(self) -> int:
        return len(self.r_sensitivity)

    @property
    def active_mask(self) -> np.ndarray:
        """Boolean mask over ``[r*, theta*]``; both halves of an active mode are active."""
        modes = np.arange(1, self.n_modes + 1) <= self.cutoff
        return np.concatenate([modes, modes])

    @property
    def n_active(self) -> int:
        return 2 * self.cutoff


def _last_above(values, gamma_tol) -> int:
    top = values.max()
    if not top > 0:
        return 0
    hits = np.nonzero(values >= gamma_tol * top)[0]
    return int(hits[-1]) + 1


def sensitivity_cutoff(misfit: Misfit, theta0, gamma_tol: float = DEFAULT_GAMMA_TOL,
                       gn_only: bool = False) -> SensitivityResult:
    """Select modes from the Hessian diagonals at the starting point ``theta0``.

    Radii and arguments are thresholded separately because the radii scale
    with wavenumber; the cutoff is the larger of the two indices.
    """
    if not 0 < gamma_tol <= 1:
        raise DomainError(f"gamma_tol must lie in (0, 1], got {gamma_tol}")
    ev = misfit.evaluate(theta0, gn_only=gn_only)
    r_sens = np.diag(ev.h_rr).copy()
    t_sens = np.diag(ev.h_thetatheta).copy()
    if not (r_sens.max() > 0 or t_sens.max() > 0):
        raise NumericalError("all sensitivities vanish: the data carry no information")
    return SensitivityResult(r_sens, t_sens, _last_above(r_sens, gamma_tol),
                             _last_above(t_sens, gamma_tol), gamma_tol)
