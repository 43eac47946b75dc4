"""Incompressible Darcy flow with an imposed mean pressure gradient in x."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import DomainError, SolverError
from .grid import Grid2D
from .permeability import PermeabilityRealization

logger = logging.getLogger(__name__)

DIVERGENCE_TOL = 1e-10


@dataclass(frozen=True)
class DarcyConstants:
    """``porosity_viscosity`` is the product phi * mu_f.

    With ``pressure_gradient=None`` the gradient G is chosen so that the
    mean of ``u_x`` over all x-faces equals ``target_velocity``.
    """

    porosity_viscosity: float = 1.0
    pressure_gradient: float | None = None
    target_velocity: float = 1.0

    def __post_init__(self):
        if not self.porosity_viscosity > 0:
            raise DomainError("porosity * viscosity must be positive")


@dataclass(frozen=True)
class DarcyVelocity:
    """Face velocities.

    ``ux[i, j]`` sits on the face between cells ``i`` and ``i+1`` (periodic);
    ``uy[i, j]`` sits on the lower face of cell ``(i, j)`` so ``uy`` has
    ``n_y + 1`` columns and the first and last are the walls.
    """

    grid: Grid2D
    ux: np.ndarray = field(repr=False)
    uy: np.ndarray = field(repr=False)
    pressure: np.ndarray = field(repr=False)
    gradient: float = 1.0
    constants: DarcyConstants = DarcyConstants()

    def divergence(self) -> np.ndarray:
        g = self.grid
        return ((self.ux - np.roll(self.ux, 1, axis=0)) / g.dx
                + (self.uy[:, 1:] - self.uy[:, :-1]) / g.dy)

    @property
    def mean_velocity(self) -> float:
        return float(self.ux.mean())

    @classmethod
    def uniform(cls, grid: Grid2D, ux: float, uy_interior: float = 0.0) -> DarcyVelocity:
        uy = np.full((grid.nx, grid.ny + 1), float(uy_interior))
        uy[:, 0] = uy[:, -1] = 0.0
        return cls(grid, np.full(grid.shape, float(ux)), uy, np.zeros(grid.shape), 0.0)


def face_permeability(kappa):
    """Harmonic means on x-faces (periodic) and interior y-faces."""
    kx = 2.0 * kappa * np.roll(kappa, -1, axis=0) / (kappa + np.roll(kappa, -1, axis=0))
    ky = 2.0 * kappa[:, :-1] * kappa[:, 1:] / (kappa[:, :-1] + kappa[:, 1:])
    return kx, ky


def _assemble(grid: Grid2D, tx, ty):
    """Five-point operator ``div(T grad p')`` for the periodic fluctuation."""
    nx, ny = grid.shape
    idx = np.arange(nx * ny).reshape(nx, ny)
    rows, cols, vals = [], [], []
    ax = tx / grid.dx**2
    ay = ty / grid.dy**2
    east = np.roll(idx, -1, axis=0)
    # x-faces: every cell couples to its east neighbour
    for a, b in ((idx, east), (east, idx)):
        rows.append(a.ravel()); cols.append(b.ravel()); vals.append(ax.ravel())
        rows.append(a.ravel()); cols.append(a.ravel()); vals.append(-ax.ravel())
    lo, hi = idx[:, :-1], idx[:, 1:]
    for a, b in ((lo, hi), (hi, lo)):
        rows.append(a.ravel()); cols.append(b.ravel()); vals.append(ay.ravel())
        rows.append(a.ravel()); cols.append(a.ravel()); vals.append(-ay.ravel())
    n = nx * ny
    mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(n, n))
    return mat


def enforce_continuity(grid: Grid2D, ux):
    """Divergence-free face fluxes that differ from ``ux`` only at roundoff level.

    Each column of x-faces is shifted so all carry the same total flux, and
    ``u_y`` is rebuilt upward from the bottom wall by cell-wise continuity,
    the differenced form of a discrete stream function. Continuity then
    holds to the rounding of a cumulative sum of O(|u|) terms instead of
    that of the pressure solve.
    """
    q = ux.sum(axis=1) * grid.dy
    ux = ux - ((q - q.mean()) / grid.ly)[:, None]
    jump = (ux - np.roll(ux, 1, axis=0)) * (grid.dy / grid.dx)
    uy = np.zeros((grid.nx, grid.ny + 1))
    uy[:, 1:] = -np.cumsum(jump, axis=1)
    uy[:, -1] = 0.0
    return ux, uy


def solve_darcy(perm: PermeabilityRealization, constants: DarcyConstants | None = None,
                tol: float = DIVERGENCE_TOL, refine_steps: int = 3) -> DarcyVelocity:
    """Solve ``div(kappa/(phi mu) grad p) = 0`` with ``p = -G x + p'``, ``p'`` periodic.

    The singular system for ``p'`` is made regular by fixing ``p'`` in the
    first cell, then solved with a sparse LU factorization followed by
    iterative refinement.

    Raises
    ------
    SolverError
        When the discrete divergence of the result exceeds ``tol``.
    """
    constants = constants or DarcyConstants()
    grid = perm.grid
    kappa = perm.kappa
    if not np.all(kappa > 0):
        raise DomainError("permeability must be positive")
    kx, ky = face_permeability(kappa)
    tx = kx / constants.porosity_viscosity
    ty = ky / constants.porosity_viscosity
    g0 = 1.0 if constants.pressure_gradient is None else float(constants.pressure_gradient)

    mat = _assemble(grid, tx, ty)
    # the imposed gradient drives a flux tx * G through every x-face
    flux0 = tx * g0
    rhs = ((flux0 - np.roll(flux0, 1, axis=0)) / grid.dx).ravel()
    mat = mat.tolil()
    mat[0, :] = 0.0
    mat[0, 0] = 1.0
    rhs[0] = 0.0
    mat = mat.tocsc()
    lu = spla.splu(mat)
    p = lu.solve(rhs)
    # a few sweeps of iterative refinement recover the digits lost to conditioning
    for _ in range(refine_steps):
        r = rhs - mat @ p
        if np.abs(r).max() <= 1e-15 * np.abs(rhs).max():
            break
        p += lu.solve(r)

    pr = p.reshape(grid.shape)
    ux = tx * (g0 - (np.roll(pr, -1, axis=0) - pr) / grid.dx)
    uy = np.zeros((grid.nx, grid.ny + 1))
    uy[:, 1:-1] = -ty * (pr[:, 1:] - pr[:, :-1]) / grid.dy
    ux_c, uy_c = enforce_continuity(grid, ux)
    drift = max(np.abs(ux_c - ux).max(), np.abs(uy_c - uy).max())
    if drift > 1e-6 * max(np.abs(ux).max(), 1e-300):
        raise SolverError("pressure solve is too inaccurate for a consistent velocity", residual=drift)
    ux, uy = ux_c, uy_c

    scale = 1.0
    if constants.pressure_gradient is None:
        mean = ux.mean()
        if not mean > 0:
            raise SolverError("mean velocity is not positive; cannot normalize the flow")
        scale = constants.target_velocity / mean
    vel = DarcyVelocity(grid, ux * scale, uy * scale, pr * scale, g0 * scale, constants)
    div = np.abs(vel.divergence()).max()
    if not div < tol:
        raise SolverError("Darcy solve left a divergent velocity field", residual=float(div))
    logger.debug("darcy: G=%.6g, max |div u|=%.2e", vel.gradient, div)
    return vel
