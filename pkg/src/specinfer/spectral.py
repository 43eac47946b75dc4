"""Fourier-space representation of the 1D generalized advection-diffusion model.

The mean concentration on a periodic interval ``[0, L)`` is expanded as

.. math:: \\bar c(x, t) = \\sum_{k=-n_k}^{n_k} \\hat c_k(t) e^{i \\kappa_k x},
          \\qquad \\kappa_k = 2\\pi k / L

and the unknown diffusion operator acts diagonally on each mode with
eigenvalue ``mu_k``. Everything in this module is a pure function of
immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, DomainError, InputShapeError

__all__ = [
    "WaveGrid",
    "SpectralField",
    "OperatorSpectrum",
    "RescaledParameters",
    "TransportConstants",
    "InitialCondition",
    "analyze",
    "synthesize",
    "evaluate_at",
    "propagate_exact",
    "frade_spectrum",
    "fickian_spectrum",
    "second_derivative_spectrum",
    "rescale",
    "unrescale",
    "radius_offset",
    "radius_scale",
    "lambda_from_mu",
    "mu_from_lambda",
]

# Tolerance used when checking that a coefficient vector describes a real field.
SYMMETRY_TOL = 1e-12
ANGLE_LO = 0.5 * np.pi
ANGLE_HI = 1.5 * np.pi


@dataclass(frozen=True)
class WaveGrid:
    """Periodic 1D grid and its retained wavenumbers."""

    domain_length: float = 1.0
    n_modes: int = 256
    n_points: int | None = None

    def __post_init__(self):
        if not self.domain_length > 0:
            raise DomainError(f"domain_length must be positive, got {self.domain_length}")
        if self.n_modes < 1:
            raise DomainError(f"n_modes must be >= 1, got {self.n_modes}")
        if self.n_points is None:
            object.__setattr__(self, "n_points", 2 * self.n_modes + 1)
        if self.n_points < 2 * self.n_modes + 1:
            raise DomainError(
                f"n_points={self.n_points} cannot resolve {self.n_modes} modes "
                f"(need at least {2 * self.n_modes + 1})"
            )

    @property
    def ks(self) -> np.ndarray:
        """Integer mode indices ``-n_k..n_k``."""
        return np.arange(-self.n_modes, self.n_modes + 1)

    @property
    def positive_ks(self) -> np.ndarray:
        return np.arange(1, self.n_modes + 1)

    def wavenumber(self, k):
        return 2.0 * np.pi * np.asarray(k, dtype=float) / self.domain_length

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_points) * (self.domain_length / self.n_points)


@dataclass(frozen=True)
class SpectralField:
    """Truncated Fourier coefficients ``c_k`` for ``k = -n_k..n_k`` (ascending)."""

    grid: WaveGrid
    coefficients: np.ndarray
    time_stamp: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.shape != (2 * self.grid.n_modes + 1,):
            raise InputShapeError(
                f"expected {2 * self.grid.n_modes + 1} coefficients, got shape {c.shape}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    def coeff(self, k):
        return self.coefficients[np.asarray(k) + self.grid.n_modes]

    @property
    def nonnegative(self) -> np.ndarray:
        """Coefficients for ``k = 0..n_k``; the rest follow by conjugation."""
        return self.coefficients[self.grid.n_modes:]

    @classmethod
    def from_nonnegative(cls, grid: WaveGrid, half, time_stamp=0.0) -> SpectralField:
        half = np.asarray(half, dtype=complex)
        if half.shape != (grid.n_modes + 1,):
            raise InputShapeError(f"expected {grid.n_modes + 1} coefficients, got {half.shape}")
        half = half.copy()
        half[0] = half[0].real
        full = np.concatenate([np.conj(half[:0:-1]), half])
        return cls(grid, full, time_stamp)

    def symmetry_defect(self) -> float:
        c = self.coefficients
        scale = max(np.max(np.abs(c)), np.finfo(float).tiny)
        return float(np.max(np.abs(c - np.conj(c[::-1]))) / scale)


@dataclass(frozen=True)
class OperatorSpectrum:
    """Eigenvalues ``mu_k = r_k exp(i theta_k)`` for ``k = 1..n_k``.

    ``mu_0`` is identically zero and ``mu_{-k} = conj(mu_k)``.
    """

    grid: WaveGrid
    radii: np.ndarray
    arguments: np.ndarray

    def __post_init__(self):
        r = np.array(self.radii, dtype=float)
        th = np.array(self.arguments, dtype=float)
        n = self.grid.n_modes
        if r.shape != (n,) or th.shape != (n,):
            raise InputShapeError(f"radii/arguments must have shape ({n},)")
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise DomainError("radii must be finite and non-negative")
        slack = 1e-12
        if np.any(th < ANGLE_LO - slack) or np.any(th > ANGLE_HI + slack):
            raise DomainError("arguments must lie in [pi/2, 3pi/2]")
        r.setflags(write=False)
        th.setflags(write=False)
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "arguments", th)

    @property
    def mu(self) -> np.ndarray:
        """Eigenvalues for ``k = 1..n_k``."""
        return self.radii * np.exp(1j * self.arguments)

    @property
    def full_mu(self) -> np.ndarray:
        """Eigenvalues for ``k = -n_k..n_k`` with ``mu_0 = 0``."""
        mu = self.mu
        return np.concatenate([np.conj(mu[::-1]), [0.0], mu])

    @classmethod
    def from_mu(cls, grid: WaveGrid, mu) -> OperatorSpectrum:
        mu = np.asarray(mu, dtype=complex)
        if np.any(mu.real > 1e-12 * np.maximum(np.abs(mu), 1.0)):
            raise DomainError("eigenvalues with positive real part are not admissible")
        theta = np.angle(mu)
        theta = np.where(theta < 0, theta + 2 * np.pi, theta)
        theta = np.clip(theta, ANGLE_LO, ANGLE_HI)
        return cls(grid, np.abs(mu), theta)


@dataclass(frozen=True)
class RescaledParameters:
    grid: WaveGrid
    r_star: np.ndarray
    theta_star: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.r_star, self.theta_star])

    @classmethod
    def from_vector(cls, grid: WaveGrid, vec) -> RescaledParameters:
        vec = np.asarray(vec, dtype=float)
        n = grid.n_modes
        if vec.shape != (2 * n,):
            raise InputShapeError(f"expected parameter vector of length {2 * n}")
        return cls(grid, vec[:n].copy(), vec[n:].copy())


@dataclass(frozen=True)
class TransportConstants:
    mean_velocity: float = 1.0
    diffusivity: float = 1.0
    fractional_order: float = 2.0

    def __post_init__(self):
        if self.diffusivity < 0:
            raise DomainError("diffusivity must be non-negative")
        if not 1.0 <= self.fractional_order <= 2.0:
            raise DomainError("fractional_order must lie in [1, 2]")


@dataclass(frozen=True)
class InitialCondition:
    """Initial condition description.

    ``kind`` is ``"gaussian_bump"`` (``center``, ``width``), ``"single_mode"``
    (``mode``, a cosine of that wavenumber) or ``"sampled"`` (``values``).
    """

    kind: str = "gaussian_bump"
    center: float | None = None
    width: float | None = None
    mode: int = 1
    values: np.ndarray | None = field(default=None, repr=False)

    def sample(self, x, domain_length: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian_bump":
            x0 = 0.25 * domain_length if self.center is None else self.center
            l = 0.05 * domain_length if self.width is None else self.width
            return np.exp(-((x - x0) ** 2) / l**2)
        if self.kind == "single_mode":
            return np.cos(2 * np.pi * self.mode * x / domain_length)
        if self.kind == "sampled":
            if self.values is None:
                raise DomainError("sampled initial condition needs values")
            v = np.asarray(self.values, dtype=float)
            if v.shape != x.shape:
                raise InputShapeError(f"sampled IC has {v.size} values for {x.size} points")
            return v
        raise DomainError(f"unknown initial condition kind {self.kind!r}")

    def on_grid(self, grid: WaveGrid) -> SpectralField:
        return analyze(grid, self.sample(grid.x, grid.domain_length))


def analyze(grid: WaveGrid, values) -> SpectralField:
    """Discrete Fourier analysis of real samples at ``grid.x``."""
    v = np.asarray(values, dtype=float)
    if v.shape != (grid.n_points,):
        raise InputShapeError(f"expected {grid.n_points} samples, got shape {v.shape}")
    spec = np.fft.fft(v) / grid.n_points
    idx = grid.ks % grid.n_points
    half = spec[idx[grid.n_modes:]]
    return SpectralField.from_nonnegative(grid, half)


def synthesize(field_: SpectralField) -> np.ndarray:
    """Real samples of the truncated Fourier series at ``grid.x``."""
    if field_.symmetry_defect() > SYMMETRY_TOL:
        raise ConsistencyError(
            f"coefficients are not conjugate symmetric (defect {field_.symmetry_defect():.3e})"
        )
    grid = field_.grid
    full = np.zeros(grid.n_points, dtype=complex)
    full[grid.ks % grid.n_points] = field_.coefficients
    return np.fft.ifft(full).real * grid.n_points


def evaluate_at(field_: SpectralField, x) -> np.ndarray:
    """Evaluate the series at arbitrary points (not restricted to the grid)."""
    x = np.asarray(x, dtype=float)
    grid = field_.grid
    kx = grid.wavenumber(grid.positive_ks)
    half = field_.nonnegative
    phase = np.exp(1j * np.multiply.outer(x, kx))
    return half[0].real + 2.0 * (phase @ half[1:]).real


def _growth(spectrum: OperatorSpectrum, constants: TransportConstants) -> np.ndarray:
    """Per-mode rate ``mu_k - i u kappa_k`` for ``k = -n_k..n_k``."""
    grid = spectrum.grid
    return spectrum.full_mu - 1j * constants.mean_velocity * grid.wavenumber(grid.ks)


def propagate_exact(c0: SpectralField, spectrum: OperatorSpectrum,
                    constants: TransportConstants, t: float) -> SpectralField:
    """Advance every Fourier coefficient by its exact exponential factor."""
    if t < 0:
        raise DomainError(f"cannot propagate to negative time t={t}")
    if c0.grid != spectrum.grid:
        raise InputShapeError("field and spectrum live on different grids")
    coeffs = c0.coefficients * np.exp(_growth(spectrum, constants) * t)
    return SpectralField(c0.grid, coeffs, c0.time_stamp + t)


def frade_spectrum(constants: TransportConstants, grid: WaveGrid) -> OperatorSpectrum:
    """Eigenvalues ``nu (i kappa_k)^alpha`` of the fractional diffusion term.

    The principal branch gives ``nu kappa^alpha exp(i alpha pi / 2)`` for
    ``k > 0``.
    """
    alpha = constants.fractional_order
    nu = constants.diffusivity
    if not 1.0 <= alpha <= 2.0:
        raise DomainError(f"fractional order {alpha} outside [1, 2]")
    if not nu > 0:
        raise DomainError("FRADE spectrum needs a positive diffusivity")
    kx = grid.wavenumber(grid.positive_ks)
    radii = nu * kx**alpha
    args = np.full(grid.n_modes, alpha * np.pi / 2)
    return OperatorSpectrum(grid, radii, args)


def fickian_spectrum(constants: TransportConstants, grid: WaveGrid) -> OperatorSpectrum:
    """Spectrum of ``nu d^2/dx^2`` (no inadequacy term)."""
    kx = grid.wavenumber(grid.positive_ks)
    return OperatorSpectrum(grid, constants.diffusivity * kx**2, np.full(grid.n_modes, np.pi))


def second_derivative_spectrum(grid: WaveGrid) -> OperatorSpectrum:
    """Spectrum of the bare second derivative, ``-kappa_k^2``."""
    kx = grid.wavenumber(grid.positive_ks)
    return OperatorSpectrum(grid, kx**2, np.full(grid.n_modes, np.pi))


def _check_modes(grid: WaveGrid, ks) -> np.ndarray:
    ks = np.asarray(ks)
    if np.any(ks == 0):
        raise DomainError("mode k = 0 has no rescaled or lambda representation")
    return ks


def radius_offset(grid: WaveGrid, ks=None) -> np.ndarray:
    """Advection-scale radius used as the origin of the rescaled radius."""
    ks = grid.positive_ks if ks is None else _check_modes(grid, ks)
    return np.abs(grid.wavenumber(ks))


def radius_scale(grid: WaveGrid, ks=None) -> np.ndarray:
    """Distance between the diffusion-scale and advection-scale radii."""
    ks = grid.positive_ks if ks is None else _check_modes(grid, ks)
    kx = np.abs(grid.wavenumber(ks))
    scale = kx**2 - kx
    if np.any(scale == 0):
        raise DomainError("radius scale vanishes (kappa_k = 1); choose another domain length")
    return scale


def rescale(spectrum: OperatorSpectrum) -> RescaledParameters:
    grid = spectrum.grid
    r_star = (spectrum.radii - radius_offset(grid)) / radius_scale(grid)
    theta_star = (spectrum.arguments - ANGLE_LO) / np.pi
    return RescaledParameters(grid, r_star, theta_star)


def unrescale(params: RescaledParameters) -> OperatorSpectrum:
    grid = params.grid
    radii = radius_offset(grid) + radius_scale(grid) * np.asarray(params.r_star)
    arguments = ANGLE_LO + np.pi * np.asarray(params.theta_star)
    return OperatorSpectrum(grid, radii, arguments)


def lambda_from_mu(spectrum, constants: TransportConstants, grid: WaveGrid | None = None,
                   ks=None) -> np.ndarray:
    """Recover the inadequacy eigenvalues from ``mu = nu (i kappa)^2 + lambda (i kappa)``.

    ``spectrum`` is an :class:`OperatorSpectrum` or a complex array of ``mu_k``
    (then ``grid`` is required); ``ks`` defaults to ``1..n_k``.
    """
    if isinstance(spectrum, OperatorSpectrum):
        grid = spectrum.grid
        mu = spectrum.mu
    else:
        if grid is None:
            raise DomainError("a grid is needed to interpret a raw eigenvalue array")
        mu = np.asarray(spectrum, dtype=complex)
    ks = grid.positive_ks if ks is None else _check_modes(grid, ks)
    ikx = 1j * grid.wavenumber(ks)
    return (mu - constants.diffusivity * ikx**2) / ikx


def mu_from_lambda(lam, constants: TransportConstants, grid: WaveGrid, ks=None) -> np.ndarray:
    ks = grid.positive_ks if ks is None else _check_modes(grid, ks)
    ikx = 1j * grid.wavenumber(ks)
    return constants.diffusivity * ikx**2 + np.asarray(lam) * ikx
