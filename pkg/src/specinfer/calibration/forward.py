"""Parameter-to-observable map and its analytic derivatives.

Parameters are always handled in rescaled coordinates ``[r*, theta*]``
(length ``2 n_k``); derivatives are chained through the affine map back to
the polar form ``mu_k = r_k exp(i theta_k)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, InputShapeError
from ..spectral import (
    ANGLE_LO,
    OperatorSpectrum,
    RescaledParameters,
    SpectralField,
    TransportConstants,
    radius_offset,
    radius_scale,
    rescale,
    unrescale,
)

# Rescaled parameters may sit this far outside their box before a point is rejected.
BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class ObservationSet:
    """Point observations ``d_j`` of the mean concentration at ``(x_j, t_j)``.

    ``sigma`` is the known standard deviation of i.i.d. Gaussian noise, or
    ``None`` for a deterministic fit.
    """

    x: np.ndarray
    t: np.ndarray
    values: np.ndarray
    sigma: float | None = None

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        d = np.atleast_1d(np.asarray(self.values, dtype=float))
        if not x.shape == t.shape == d.shape or x.ndim != 1:
            raise InputShapeError("x, t and values must be 1D arrays of equal length")
        if np.any(t < 0):
            raise DomainError("observation times must be non-negative")
        if len(np.unique(np.stack([x, t]), axis=1).T) != len(x):
            raise DomainError("observation points must be distinct")
        if self.sigma is not None and not self.sigma > 0:
            raise DomainError("noise standard deviation must be positive")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", d)

    def __len__(self):
        return len(self.x)

    @property
    def weight(self) -> float:
        return 1.0 if self.sigma is None else 1.0 / self.sigma**2

    def with_values(self, values, sigma=None) -> ObservationSet:
        return ObservationSet(self.x, self.t, values, sigma)


def admissible_bounds(grid, positive_radius: bool = True):
    """Box in rescaled coordinates implied by ``r_k >= 0`` and the angle range."""
    n = grid.n_modes
    lo_r = -radius_offset(grid) / radius_scale(grid) if positive_radius else np.full(n, -np.inf)
    lower = np.concatenate([lo_r, np.zeros(n)])
    upper = np.concatenate([np.full(n, np.inf), np.ones(n)])
    return lower, upper


def unit_bounds(grid):
    """Uniform-prior support ``[0, 1]`` for every rescaled parameter."""
    n = 2 * grid.n_modes
    return np.zeros(n), np.ones(n)


class SpectralForwardModel:
    """Map rescaled spectrum parameters to predicted concentrations.

    Parameters
    ----------
    c0 : SpectralField
        Fourier coefficients of the initial condition.
    constants : TransportConstants
        Supplies the mean velocity.
    x, t : array_like
        Observation locations and times.
    """

    def __init__(self, c0: SpectralField, constants: TransportConstants, x, t):
        self.grid = c0.grid
        self.constants = constants
        self.x = np.atleast_1d(np.asarray(x, dtype=float))
        self.t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.x.shape != self.t.shape:
            raise InputShapeError("x and t must have equal length")
        if np.any(self.t < 0):
            raise DomainError("observation times must be non-negative")
        grid = self.grid
        self.kx = grid.wavenumber(grid.positive_ks)
        self.offset = radius_offset(grid)
        self.scale = radius_scale(grid)
        half = c0.nonnegative
        self.mean = half[0].real
        phase = np.multiply.outer(self.x, self.kx) - constants.mean_velocity * np.multiply.outer(self.t, self.kx)
        self._base = half[1:] * np.exp(1j * phase)
        self._tt = self.t[:, None]
        self.lower, self.upper = admissible_bounds(grid)

    @property
    def n_params(self) -> int:
        return 2 * self.grid.n_modes

    def __len__(self):
        return len(self.x)

    def polar(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise InputShapeError(f"parameter vector must have length {self.n_params}")
        if np.any(theta < self.lower - BOUND_SLACK) or np.any(theta > self.upper + BOUND_SLACK):
            raise DomainError("parameters outside the admissible box (theta* in [0,1], r >= 0)")
        n = self.grid.n_modes
        r = self.offset + self.scale * theta[:n]
        ang = ANGLE_LO + np.pi * theta[n:]
        return r, ang

    def spectrum(self, theta) -> OperatorSpectrum:
        r, ang = self.polar(theta)
        return OperatorSpectrum(self.grid, np.maximum(r, 0.0), np.clip(ang, ANGLE_LO, ANGLE_LO + np.pi))

    def parameters_of(self, spectrum: OperatorSpectrum) -> np.ndarray:
        return rescale(spectrum).as_vector()

    def _modal(self, theta):
        r, ang = self.polar(theta)
        rot = np.exp(1j * ang)
        mu = r * rot
        terms = self._base * np.exp(mu * self._tt)
        return r, rot, mu, terms

    def observe(self, theta) -> np.ndarray:
        _, _, _, terms = self._modal(theta)
        return self.mean + 2.0 * terms.sum(axis=1).real

    def jacobian(self, theta) -> np.ndarray:
        """Derivatives of every prediction, shape ``(n_obs, 2 n_k)``."""
        _, rot, mu, terms = self._modal(theta)
        tt = self._tt
        d_r = 2.0 * (rot * tt * terms).real * self.scale
        d_th = 2.0 * (1j * tt * mu * terms).real * np.pi
        return np.hstack([d_r, d_th])

    def observe_and_jacobian(self, theta):
        _, rot, mu, terms = self._modal(theta)
        tt = self._tt
        c = self.mean + 2.0 * terms.sum(axis=1).real
        d_r = 2.0 * (rot * tt * terms).real * self.scale
        d_th = 2.0 * (1j * tt * mu * terms).real * np.pi
        return c, np.hstack([d_r, d_th])

    def second_derivatives(self, theta):
        """Per-observation diagonal second derivatives ``(rr, theta theta, r theta)``.

        Each array has shape ``(n_obs, n_k)``; cross-mode second derivatives
        vanish because every parameter touches a single mode.
        """
        _, rot, mu, terms = self._modal(theta)
        tt = self._tt
        rr = 2.0 * ((rot * tt) ** 2 * terms).real * self.scale**2
        thth = 2.0 * (-tt * mu * (1.0 + tt * mu) * terms).real * np.pi**2
        rth = 2.0 * (1j * tt * rot * (1.0 + tt * mu) * terms).real * (self.scale * np.pi)
        return rr, thth, rth


def spectrum_to_vector(spectrum: OperatorSpectrum) -> np.ndarray:
    return rescale(spectrum).as_vector()


def vector_to_spectrum(grid, theta) -> OperatorSpectrum:
    return unrescale(RescaledParameters.from_vector(grid, theta))


def forward_observe(theta, c0: SpectralField, constants: TransportConstants, x, t) -> np.ndarray:
    """Predicted concentrations at ``(x_j, t_j)`` for rescaled parameters ``theta``."""
    return SpectralForwardModel(c0, constants, x, t).observe(theta)
