"""Projected Newton iteration on a box in rescaled coordinates."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..errors import DomainError
from .misfit import Misfit

logger = logging.getLogger(__name__)


@dataclass
class NewtonOptions:
    max_iter: int = 200
    gtol: float = 1e-8
    xtol: float = 1e-12
    armijo: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 60
    gn_only: bool = False
    # Upper limit of the distance to a bound that counts as "on the bound".
    active_eps: float = 1e-3
    initial_damping: float = 1e-3
    min_damping: float = 1e-12
    max_damping: float = 1e16


@dataclass
class IterationRecord:
    iteration: int
    value: float
    grad_norm: float
    step_norm: float
    hessian: str


@dataclass
class NewtonResult:
    theta: np.ndarray
    value: float
    grad_norm: float
    converged: bool
    reason: str
    n_iter: int
    history: list[IterationRecord] = field(default_factory=list)


def _solve_spd(h, g):
    """Return the Newton direction or ``None`` when ``h`` is not positive definite."""
    try:
        chol = scipy.linalg.cho_factor(h)
    except np.linalg.LinAlgError:
        return None
    return -scipy.linalg.cho_solve(chol, g)


def newton_map(misfit: Misfit, theta0, lower=None, upper=None, active=None,
               options: NewtonOptions | None = None) -> NewtonResult:
    """Minimize ``misfit`` over the box ``[lower, upper]`` starting at ``theta0``.

    Only coordinates flagged in ``active`` move; the rest keep their initial
    values. The full Hessian is used when it is positive definite on the free
    set, otherwise the Gauss-Newton part.
    """
    opts = options or NewtonOptions()
    x = np.array(theta0, dtype=float)
    n = len(x)
    lower = misfit.model.lower if lower is None else np.asarray(lower, dtype=float)
    upper = misfit.model.upper if upper is None else np.asarray(upper, dtype=float)
    active = np.ones(n, bool) if active is None else np.asarray(active, bool)
    if np.any(x < lower) or np.any(x > upper):
        raise DomainError("initial point lies outside the bounds")

    history: list[IterationRecord] = []
    damping = opts.initial_damping
    ev = misfit.evaluate(x, gn_only=opts.gn_only)
    reason = "max_iter"
    converged = False
    gnorm = np.inf
    it = 0
    for it in range(opts.max_iter + 1):
        g = ev.gradient
        # Projected-gradient optimality measure (zero at a KKT point of the box problem).
        pg = x - np.clip(x - g, lower, upper)
        gnorm = float(np.linalg.norm(pg[active]))
        # Bertsekas epsilon-active set: coordinates close to a bound with the
        # gradient pushing outward are held fixed for this iteration.
        diag = np.abs(np.diag(ev.hessian))
        scaled = x - np.clip(x - g / np.where(diag > 0, diag, 1.0), lower, upper)
        eps = min(opts.active_eps, float(np.linalg.norm(scaled[active])))
        at_lo = (x - lower <= eps) & (g > 0)
        at_hi = (upper - x <= eps) & (g < 0)
        free = active & ~at_lo & ~at_hi
        if it == 0:
            history.append(IterationRecord(0, ev.value, gnorm, 0.0, "-"))
        if gnorm < opts.gtol:
            reason, converged = "gradient", True
            break
        if it == opts.max_iter:
            break

        idx = np.nonzero(free)[0]
        # held coordinates follow the diagonally scaled projected gradient
        held = np.nonzero(active & ~free)[0]
        p_held = -g[held] / np.where(diag[held] > 0, diag[held], 1.0)
        gf = g[idx]
        hf = ev.hessian[np.ix_(idx, idx)]
        kind = "gn" if opts.gn_only else "full"
        p = None if opts.gn_only else _solve_spd(hf, gf)
        accepted = False
        if p is not None:
            step = 1.0
            for _ in range(opts.max_backtracks):
                trial = x.copy()
                trial[idx] = np.clip(x[idx] + step * p, lower[idx], upper[idx])
                trial[held] = np.clip(x[held] + step * p_held, lower[held], upper[held])
                dx = trial - x
                new_val = misfit.value(trial)
                if new_val <= ev.value + opts.armijo * float(g @ dx) and new_val <= ev.value:
                    accepted = True
                    break
                step *= opts.shrink
        if not accepted:
            # Gauss-Newton with Marquardt damping; backtrack on the damping
            # parameter instead of the step length.
            kind = "gn"
            hgn = hf if opts.gn_only else misfit.evaluate(x, gn_only=True).hessian[np.ix_(idx, idx)]
            scale = np.maximum(np.diag(hgn), 1e-12 * max(np.max(np.diag(hgn)), 1e-300))
            for _ in range(opts.max_backtracks):
                if damping > opts.max_damping:
                    break
                p = _solve_spd(hgn + damping * np.diag(scale), gf)
                if p is not None:
                    trial = x.copy()
                    trial[idx] = np.clip(x[idx] + p, lower[idx], upper[idx])
                    trial[held] = np.clip(x[held] + p_held / (1.0 + damping), lower[held], upper[held])
                    dx = trial - x
                    new_val = misfit.value(trial)
                    if new_val <= ev.value + opts.armijo * float(g @ dx) and new_val < ev.value:
                        accepted = True
                        damping = max(damping / 3.0, opts.min_damping)
                        break
                damping *= 10.0
            damping = min(damping, opts.max_damping)
        if not accepted and not np.all(free == active):
            # Retry with the held coordinates released, along the projected gradient.
            p_g = -g / np.where(diag > 0, diag, 1.0)
            step = 1.0
            for _ in range(opts.max_backtracks):
                trial = np.where(active, np.clip(x + step * p_g, lower, upper), x)
                dx = trial - x
                new_val = misfit.value(trial)
                if new_val <= ev.value + opts.armijo * float(g @ dx) and new_val < ev.value:
                    accepted, kind = True, "pgrad"
                    break
                step *= opts.shrink
        if not accepted:
            reason = "line_search"
            logger.warning("line search failed at iteration %d (J=%.3e)", it, ev.value)
            break
        snorm = float(np.linalg.norm(dx))
        x = trial
        ev = misfit.evaluate(x, gn_only=opts.gn_only)
        history.append(IterationRecord(it + 1, ev.value, float(np.linalg.norm(ev.gradient[active])),
                                       snorm, kind))
        logger.debug("newton %3d J=%.6e |g|=%.3e |dx|=%.3e (%s)", it + 1, ev.value, gnorm, snorm, kind)
        if snorm < opts.xtol:
            reason, converged = "step", True
            it += 1
            break

    return NewtonResult(x, ev.value, gnorm, converged, reason, it, history)
