"""Log-normal permeability fields, periodic in x and aperiodic in y."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..errors import DomainError, NumericalError
from .grid import Grid2D

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PermeabilityStats:
    """Statistics of ``log kappa``; covariance ``var * exp(-dx^2/(2 lx^2) - dy^2/(2 ly^2))``."""

    log_mean: float = 0.0
    log_variance: float = 1.0
    corr_x: float = 0.1
    corr_y: float = 0.1

    def __post_init__(self):
        if self.log_variance < 0:
            raise DomainError("log-permeability variance must be non-negative")
        if not (self.corr_x > 0 and self.corr_y > 0):
            raise DomainError("correlation lengths must be positive")


@dataclass(frozen=True)
class PermeabilityRealization:
    grid: Grid2D
    kappa: np.ndarray = field(repr=False)
    seed: int | None = None
    stats: PermeabilityStats | None = None

    def __post_init__(self):
        k = self.grid.check(self.kappa)
        if not np.all(k > 0):
            raise DomainError("permeability must be positive everywhere")
        object.__setattr__(self, "kappa", k)

    @classmethod
    def constant(cls, grid: Grid2D, value: float = 1.0) -> PermeabilityRealization:
        return cls(grid, np.full(grid.shape, float(value)), None, None)


def periodic_eigenvalues(n: int, length: float, corr: float) -> np.ndarray:
    """Eigenvalues of the circulant unit-variance covariance on a ring of ``n`` cells.

    The squared-exponential kernel is wrapped around the ring so the
    covariance is exactly periodic; its eigenvalues are then non-negative
    up to roundoff.
    """
    d = np.arange(n) * (length / n)
    wraps = np.arange(-3, 4)[:, None] * length
    row = np.exp(-((d[None, :] + wraps) ** 2) / (2.0 * corr**2)).sum(axis=0)
    lam = np.fft.fft(row).real
    return np.clip(lam, 0.0, None)


def y_cholesky(grid: Grid2D, corr: float, nugget: float = 1e-10) -> np.ndarray:
    y = grid.yc
    cov = np.exp(-((y[:, None] - y[None, :]) ** 2) / (2.0 * corr**2))
    cov[np.diag_indices_from(cov)] += nugget
    try:
        return scipy.linalg.cholesky(cov, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"y-covariance is not positive definite with nugget {nugget:g}") from exc


def sample_permeability(grid: Grid2D, stats: PermeabilityStats, seed: int | None,
                        nugget: float = 1e-10) -> PermeabilityRealization:
    """Draw one log-normal realization.

    The x-direction is sampled through the FFT of the circulant covariance
    and the y-direction through a Cholesky factor, which is valid because
    the covariance is separable.
    """
    if stats.log_variance == 0:
        kappa = np.full(grid.shape, np.exp(stats.log_mean))
        return PermeabilityRealization(grid, kappa, seed, stats)
    if stats.corr_y >= grid.ly:
        warnings.warn("correlation length in y is not smaller than the domain; "
                      "the y-covariance is close to singular", RuntimeWarning, stacklevel=2)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(grid.shape)
    lam = periodic_eigenvalues(grid.nx, grid.lx, stats.corr_x)
    zx = np.fft.ifft(np.sqrt(lam)[:, None] * np.fft.fft(z, axis=0), axis=0).real
    chol = y_cholesky(grid, stats.corr_y, nugget)
    g = zx @ chol.T
    log_k = stats.log_mean + np.sqrt(stats.log_variance) * g
    return PermeabilityRealization(grid, np.exp(log_k), seed, stats)
