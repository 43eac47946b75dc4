"""Finite-difference verification of the analytic misfit derivatives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from .misfit import Misfit

GRADIENT_TOL = 1e-5
HESSIAN_TOL = 1e-4


@dataclass(frozen=True)
class DerivativeReport:
    gradient_error: float
    hessian_error: float
    h_gradient: float
    h_hessian: float
    n_checked: int

    @property
    def gradient_ok(self) -> bool:
        return self.gradient_error < GRADIENT_TOL

    @property
    def hessian_ok(self) -> bool:
        return self.hessian_error < HESSIAN_TOL

    @property
    def passed(self) -> bool:
        return self.gradient_ok and self.hessian_ok

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{verdict} gradient rel err {self.gradient_error:.2e} (h={self.h_gradient:g}), "
                f"hessian rel err {self.hessian_error:.2e} (h={self.h_hessian:g}), "
                f"{self.n_checked} parameters")


def _rel(a, b) -> float:
    scale = np.abs(b).max()
    return float(np.abs(a - b).max() / (scale if scale > 0 else 1.0))


def _interior(theta, h, lower, upper):
    if np.any(theta - 2 * h < lower) or np.any(theta + 2 * h > upper):
        raise DomainError("finite-difference stencil leaves the admissible box; move the point inward")


def fd_gradient(misfit: Misfit, theta, h: float, indices) -> np.ndarray:
    out = np.empty(len(indices))
    for n, i in enumerate(indices):
        e = np.zeros_like(theta)
        e[i] = h
        out[n] = (misfit.value(theta + e) - misfit.value(theta - e)) / (2 * h)
    return out


def fd_hessian(misfit: Misfit, theta, h: float, indices) -> np.ndarray:
    """Second-order central differences of ``J`` itself."""
    m = len(indices)
    j0 = misfit.value(theta)
    out = np.empty((m, m))
    step = np.zeros((m, len(theta)))
    step[np.arange(m), indices] = h
    for a in range(m):
        ea = step[a]
        out[a, a] = (misfit.value(theta + ea) - 2 * j0 + misfit.value(theta - ea)) / h**2
        for b in range(a + 1, m):
            eb = step[b]
            v = (misfit.value(theta + ea + eb) - misfit.value(theta + ea - eb)
                 - misfit.value(theta - ea + eb) + misfit.value(theta - ea - eb)) / (4 * h**2)
            out[a, b] = out[b, a] = v
    return out


def check_derivatives(misfit: Misfit, theta, h: float = 1e-6, h_hessian: float = 1e-5,
                      indices=None) -> DerivativeReport:
    """Compare the analytic gradient and full Hessian with central differences.

    Errors are normwise, ``max|fd - analytic| / max|analytic|``. The
    Hessian check differences ``J`` twice, so its step is larger than the
    gradient step to keep rounding (``~eps J / h^2``) below truncation.
    ``indices`` restricts the check to a subset of parameters.
    """
    if not (h > 0 and h_hessian > 0):
        raise DomainError("finite-difference steps must be positive")
    theta = np.asarray(theta, dtype=float)
    idx = np.arange(len(theta)) if indices is None else np.asarray(indices, int)
    _interior(theta, max(h, h_hessian), misfit.model.lower, misfit.model.upper)
    ev = misfit.evaluate(theta)
    g_err = _rel(fd_gradient(misfit, theta, h, idx), ev.gradient[idx])
    h_err = _rel(fd_hessian(misfit, theta, h_hessian, idx), ev.hessian[np.ix_(idx, idx)])
    return DerivativeReport(g_err, h_err, h, h_hessian, len(idx))


def step_sweep(misfit: Misfit, theta, steps=(1e-4, 1e-6, 1e-8), indices=None) -> dict[float, float]:
    """Gradient error for each step size; truncation dominates large ``h``, rounding small ``h``."""
    theta = np.asarray(theta, dtype=float)
    idx = np.arange(len(theta)) if indices is None else np.asarray(indices, int)
    g = misfit.gradient(theta)[idx]
    return {float(h): _rel(fd_gradient(misfit, theta, h, idx), g) for h in steps}


def random_admissible(grid, rng, margin: float = 0.05, radius_cap: float = 0.2) -> np.ndarray:
    """Random interior point: ``theta*`` in ``[margin, 1 - margin]`` and ``r*`` near the radius floor.

    ``r*`` is drawn so ``r_k`` stays below ``radius_cap * kappa_k^2``; larger
    radii damp every mode to zero and make the check vacuous.
    """
    from ..spectral import radius_offset, radius_scale

    n = grid.n_modes
    off, sc = radius_offset(grid), radius_scale(grid)
    lo_r = -off / sc + margin * radius_cap
    hi_r = lo_r + radius_cap * (1 - 2 * margin)
    r_star = rng.uniform(lo_r, hi_r)
    th = rng.uniform(margin, 1 - margin, n)
    return np.concatenate([r_star, th])
