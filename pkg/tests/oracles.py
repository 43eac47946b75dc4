"""Independent reference solvers used only by the tests."""

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.special import erf


def generalized_ade_matrix(spectrum, mean_velocity):
    """Dense real matrix of ``-u d/dx + D`` acting on grid samples.

    Built column by column from the action on unit vectors through an
    explicit DFT matrix, not through the propagator under test.
    """
    grid = spectrum.grid
    n = grid.n_points
    j = np.arange(n)
    ks = grid.ks
    kx = 2 * np.pi * ks / grid.domain_length
    rate = spectrum.full_mu - 1j * mean_velocity * kx
    fwd = np.exp(-2j * np.pi * np.outer(ks, j) / n) / n     # samples -> coefficients
    inv = np.exp(2j * np.pi * np.outer(j, ks) / n)          # coefficients -> samples
    return (inv @ (rate[:, None] * fwd)).real


def crank_nicolson(values0, matrix, t_end, n_steps):
    dt = t_end / n_steps
    eye = np.eye(len(values0))
    lu = lu_factor(eye - 0.5 * dt * matrix)
    explicit = eye + 0.5 * dt * matrix
    c = np.array(values0, dtype=float)
    for _ in range(n_steps):
        c = lu_solve(lu, explicit @ c)
    return c


def gaussian_cell_average(xc, dx, t, velocity=1.0, nu=0.0, x0=0.25, width=0.05, length=1.0, images=3):
    """Cell averages of the periodic advected and diffused Gaussian bump ``exp(-(x-x0)^2/width^2)``."""
    w = np.sqrt(width**2 + 4 * nu * t)
    out = np.zeros_like(xc, dtype=float)
    for m in range(-images, images + 1):
        a = (xc - dx / 2 - x0 - velocity * t + m * length) / w
        b = (xc + dx / 2 - x0 - velocity * t + m * length) / w
        out += width * np.sqrt(np.pi) / 2 * (erf(b) - erf(a)) / dx
    return out


def dense_darcy(kappa, dx, dy, gradient):
    """Pressure perturbation and x-face velocity from a dense solve of the 5-point scheme.

    ``p = -G x + p'`` with ``p'`` periodic in x and no-flow walls in y;
    harmonic face permeability; the first cell is pinned.
    """
    nx, ny = kappa.shape
    idx = lambda i, j: (i % nx) * ny + j
    a = np.zeros((nx * ny, nx * ny))
    rhs = np.zeros(nx * ny)
    for i in range(nx):
        for j in range(ny):
            row = idx(i, j)
            for di in (-1, 1):
                k2 = kappa[(i + di) % nx, j]
                kf = 2 * kappa[i, j] * k2 / (kappa[i, j] + k2)
                a[row, row] += kf / dx**2
                a[row, idx(i + di, j)] -= kf / dx**2
                # the mean gradient drives flux -kf * (-G) through each x face
                rhs[row] += di * kf * gradient / dx * (-1)
            for dj in (-1, 1):
                if 0 <= j + dj < ny:
                    k2 = kappa[i, j + dj]
                    kf = 2 * kappa[i, j] * k2 / (kappa[i, j] + k2)
                    a[row, row] += kf / dy**2
                    a[row, idx(i, j + dj)] -= kf / dy**2
    a[0, :] = 0
    a[0, 0] = 1
    rhs[0] = 0
    p = np.linalg.solve(a, rhs).reshape(nx, ny)
    kr = np.roll(kappa, -1, axis=0)
    kf = 2 * kappa * kr / (kappa + kr)
    ux = -kf * ((np.roll(p, -1, axis=0) - p) / dx - gradient)
    return p, ux
