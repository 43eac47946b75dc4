"""Finite-volume advection-diffusion on :class:`Grid2D`.

Advection uses MUSCL reconstruction with upwind face fluxes, diffusion a
centred two-point flux, and time stepping the two-stage SSP Runge-Kutta
scheme. Fluxes are differenced in conservative form, so the total mass
only changes through rounding.
"""

from __future__ import annotations

import numpy as np

from ..errors import DomainError, PreconditionError
from .darcy import DarcyVelocity
from .grid import Concentration2D

LIMITERS = ("mc", "minmod", "none")


def _slope(a, b, limiter: str):
    """Limited slope from the backward difference ``a`` and forward difference ``b``."""
    if limiter == "none":
        # central slope, i.e. the unlimited Fromm scheme; linear in c
        return 0.5 * (a + b)
    same = a * b > 0
    if limiter == "minmod":
        return np.where(same, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)
    if limiter == "mc":
        m = np.minimum(np.minimum(2.0 * np.abs(a), 2.0 * np.abs(b)), 0.5 * np.abs(a + b))
        return np.where(same, np.sign(a) * m, 0.0)
    raise DomainError(f"unknown limiter {limiter!r}; choose from {LIMITERS}")


def cfl_number(vel: DarcyVelocity, dt: float) -> float:
    """``max(|u_x| dt/dx + |u_y| dt/dy)`` over cells, using the larger face value per cell."""
    g = vel.grid
    ax = np.maximum(np.abs(vel.ux), np.abs(np.roll(vel.ux, 1, axis=0)))
    ay = np.maximum(np.abs(vel.uy[:, 1:]), np.abs(vel.uy[:, :-1]))
    return float(np.max(ax * dt / g.dx + ay * dt / g.dy))


def diffusion_number(grid, nu: float, dt: float) -> float:
    return float(nu * dt * (1.0 / grid.dx**2 + 1.0 / grid.dy**2))


def stable_time_step(vel: DarcyVelocity, nu: float, cfl: float = 0.4, diffusion: float = 0.4) -> float:
    """Largest step meeting both the advective CFL target and the diffusion limit."""
    g = vel.grid
    ax = np.maximum(np.abs(vel.ux), np.abs(np.roll(vel.ux, 1, axis=0)))
    ay = np.maximum(np.abs(vel.uy[:, 1:]), np.abs(vel.uy[:, :-1]))
    rate = float(np.max(ax / g.dx + ay / g.dy))
    dt = np.inf if rate == 0 else cfl / rate
    if nu > 0:
        dt = min(dt, diffusion / (nu * (1.0 / g.dx**2 + 1.0 / g.dy**2)))
    if not np.isfinite(dt):
        raise DomainError("no transport: velocity and diffusivity are both zero")
    return float(dt)


def _rhs(c, vel: DarcyVelocity, nu: float, limiter: str):
    g = vel.grid
    # x direction (periodic)
    fwd = np.roll(c, -1, axis=0) - c
    bwd = c - np.roll(c, 1, axis=0)
    s = _slope(bwd, fwd, limiter)
    left = c + 0.5 * s                           # state at face i+1/2 from cell i
    right = np.roll(c - 0.5 * s, -1, axis=0)     # state at face i+1/2 from cell i+1
    u = vel.ux
    fx = np.where(u >= 0, u * left, u * right) - nu * fwd / g.dx

    # y direction (walls: zero advective and diffusive flux)
    fy = np.zeros((g.nx, g.ny + 1))
    if g.ny > 1:
        dy_ = c[:, 1:] - c[:, :-1]
        zero = np.zeros((g.nx, 1))
        down = np.concatenate([zero, dy_], axis=1)
        up = np.concatenate([dy_, zero], axis=1)
        sy = _slope(down, up, limiter)
        below = (c + 0.5 * sy)[:, :-1]
        above = (c - 0.5 * sy)[:, 1:]
        v = vel.uy[:, 1:-1]
        fy[:, 1:-1] = np.where(v >= 0, v * below, v * above) - nu * dy_ / g.dy
    return -((fx - np.roll(fx, 1, axis=0)) / g.dx + (fy[:, 1:] - fy[:, :-1]) / g.dy)


def advance_ade2d(c: Concentration2D, vel: DarcyVelocity, nu: float, dt: float, n_steps: int,
                  limiter: str = "mc") -> Concentration2D:
    """Advance ``c_t + div(u c) = nu lap(c)`` by ``n_steps`` steps of size ``dt``.

    ``div(u c)`` equals ``u . grad c`` for the divergence-free Darcy field.

    Raises
    ------
    PreconditionError
        If ``dt`` violates the advective CFL bound (1) or the explicit
        diffusion bound (1/2).
    """
    if limiter not in LIMITERS:
        raise DomainError(f"unknown limiter {limiter!r}; choose from {LIMITERS}")
    if nu < 0:
        raise DomainError("diffusivity must be non-negative")
    if n_steps < 0:
        raise DomainError("n_steps must be non-negative")
    if c.grid != vel.grid:
        raise DomainError("concentration and velocity live on different grids")
    cfl = cfl_number(vel, dt)
    if cfl > 1.0:
        raise PreconditionError(f"dt={dt:.6g} violates the CFL condition (CFL number {cfl:.4g} > 1)")
    dn = diffusion_number(c.grid, nu, dt)
    if dn > 0.5:
        raise PreconditionError(f"dt={dt:.6g} violates the diffusion limit (nu dt sum 1/h^2 = {dn:.4g} > 0.5)")
    u = c.values.copy()
    for _ in range(n_steps):
        u1 = u + dt * _rhs(u, vel, nu, limiter)
        u = 0.5 * (u + u1 + dt * _rhs(u1, vel, nu, limiter))
    return Concentration2D(c.grid, u, c.time_stamp + n_steps * dt)


def advance_to(c: Concentration2D, vel: DarcyVelocity, nu: float, t_end: float,
               dt_max: float | None = None, limiter: str = "mc", cfl: float = 0.4) -> Concentration2D:
    """Advance to ``t_end`` in equal steps no longer than ``dt_max``."""
    span = t_end - c.time_stamp
    if span < 0:
        raise DomainError("t_end lies before the current time")
    if span == 0:
        return c
    dt_max = stable_time_step(vel, nu, cfl) if dt_max is None else dt_max
    n = int(np.ceil(span / dt_max - 1e-12))
    out = advance_ade2d(c, vel, nu, span / n, n, limiter)
    return Concentration2D(out.grid, out.values, float(t_end))
