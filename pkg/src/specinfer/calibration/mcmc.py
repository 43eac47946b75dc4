"""Hessian-preconditioned Langevin sampling (simplified manifold MALA).

With the metric frozen at the MAP point this is the stochastic Newton
sampler; with ``position_dependent=True`` the metric is re-evaluated at every
state and the proposal densities carry the matching log-determinants.
Metric-derivative drift terms are omitted (simplified MMALA), which keeps
the chain exact through the Metropolis-Hastings correction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, MetricError
from .misfit import Misfit

logger = logging.getLogger(__name__)

METRIC_FLOOR = 1e-8
TARGET_ACCEPTANCE = 0.574


class BoxPosterior:
    """Posterior ``exp(-J)`` restricted to a box (uniform prior on the box).

    ``J`` is the noise-weighted misfit. Only the coordinates in ``active``
    are sampled; the others stay at ``theta_fixed``.
    """

    def __init__(self, misfit: Misfit, theta_fixed, active=None, lower=None, upper=None,
                 gn_metric: bool = False):
        self.misfit = misfit
        self.theta_fixed = np.array(theta_fixed, dtype=float)
        n = len(self.theta_fixed)
        self.active = np.ones(n, bool) if active is None else np.asarray(active, bool)
        self.idx = np.nonzero(self.active)[0]
        lo = np.zeros(n) if lower is None else np.asarray(lower, float)
        hi = np.ones(n) if upper is None else np.asarray(upper, float)
        self.lower = lo[self.idx]
        self.upper = hi[self.idx]
        self.gn_metric = gn_metric

    @property
    def dim(self) -> int:
        return len(self.idx)

    def full(self, z) -> np.ndarray:
        theta = self.theta_fixed.copy()
        theta[self.idx] = z
        return theta

    def reduce(self, theta) -> np.ndarray:
        return np.asarray(theta, float)[self.idx]

    def in_support(self, z) -> bool:
        return bool(np.all(z >= self.lower) and np.all(z <= self.upper))

    def log_density(self, z) -> float:
        return -self.misfit.value(self.full(z))

    def log_density_and_gradient(self, z):
        ev = self.misfit.evaluate(self.full(z), hessian=False)
        return -ev.value, -ev.gradient[self.idx]

    def metric(self, z) -> np.ndarray:
        h = self.misfit.hessian(self.full(z), gn_only=self.gn_metric)
        return h[np.ix_(self.idx, self.idx)]

    @property
    def alias_period(self) -> float | None:
        """Shift of ``Im mu_k`` invisible to the data, or ``None``.

        When every observation is taken at the same time ``t`` the factor
        ``exp(i Im(mu) t)`` cannot tell ``Im mu`` from ``Im mu + 2 pi / t``.
        """
        t = self.misfit.model.t
        if t[0] > 0 and np.allclose(t, t[0], rtol=1e-12, atol=0.0):
            return 2.0 * np.pi / t[0]
        return None

    def alias_jump(self, z, rng):
        """Shift one active mode by one alias period; returns ``(y, log_jacobian)``.

        ``log_jacobian`` is the log determinant of the move in rescaled
        coordinates, ``log(r / r')`` from the polar area element.
        """
        period = self.alias_period
        if period is None:
            return None, 0.0
        model = self.misfit.model
        n = model.grid.n_modes
        modes = self.idx[self.idx < n]
        if len(modes) == 0:
            return None, 0.0
        k = int(rng.choice(modes))
        theta = self.full(z)
        r, ang = model.polar(theta)
        mu = r[k] * np.exp(1j * ang[k]) + 1j * period * rng.choice((-1.0, 1.0))
        r_new = abs(mu)
        if not r[k] > 0 or not r_new > 0:
            return None, 0.0
        ang_new = np.mod(np.angle(mu), 2.0 * np.pi)
        theta[k] = (r_new - model.offset[k]) / model.scale[k]
        theta[n + k] = (ang_new - np.pi / 2) / np.pi
        return self.reduce(theta), float(np.log(r[k] / r_new))


def regularize_metric(h, floor: float = METRIC_FLOOR, absolute_floor: float = 0.0):
    """Symmetrize ``h`` and floor its eigenvalues.

    Returns ``(metric, chol_of_inverse)`` where ``chol_of_inverse @ chol_of_inverse.T``
    is the inverse metric.
    """
    h = 0.5 * (np.asarray(h, float) + np.asarray(h, float).T)
    w, v = np.linalg.eigh(h)
    top = w.max()
    lo = max(floor * top, absolute_floor)
    if not lo > 0:
        raise MetricError(f"metric is not positive definite: largest eigenvalue {top:.3e}")
    w = np.maximum(w, lo)
    metric = (v * w) @ v.T
    chol_inv = v * (1.0 / np.sqrt(w))
    return metric, chol_inv


@dataclass
class Chain:
    states: np.ndarray
    log_posterior: np.ndarray
    accepted: np.ndarray
    step_size: float
    seed: int | None
    burn_in: int = 0
    thin: int = 1
    proposals_outside: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted.mean()) if len(self.accepted) else float("nan")

    def __len__(self):
        return len(self.states)

    def histograms(self, bins=20, range_=(0.0, 1.0)):
        """Per-parameter histogram counts, shape ``(dim, bins)``, and bin edges."""
        edges = np.linspace(range_[0], range_[1], bins + 1)
        counts = np.stack([np.histogram(col, bins=edges)[0] for col in self.states.T])
        return counts, edges

    def central_interval(self, level=0.95) -> np.ndarray:
        a = 0.5 * (1 - level)
        return np.quantile(self.states, [a, 1 - a], axis=0).T


class _MetricState:
    def __init__(self, metric_fn, floor, absolute_floor):
        self.metric_fn = metric_fn
        self.floor = floor
        self.absolute_floor = absolute_floor

    def at(self, z):
        g, l = regularize_metric(self.metric_fn(z), self.floor, self.absolute_floor)
        logdet = float(np.sum(np.log(np.linalg.eigvalsh(g))))
        return g, l, logdet


def mcmc_sample(target, x0, n_samples: int, *, step_size: float | None = None,
                burn_in: int = 0, thin: int = 1, seed: int | None = None,
                metric=None, position_dependent: bool = False, adapt: bool = True,
                metric_floor: float = METRIC_FLOOR, absolute_floor: float = 0.0,
                jump_prob: float = 0.0) -> Chain:
    """Draw ``n_samples`` retained states from ``target``.

    Parameters
    ----------
    target
        Object with ``dim``, ``in_support``, ``log_density_and_gradient`` and
        ``metric`` (the Hessian of the negative log density).
    x0
        Starting point, normally the MAP point in the sampled coordinates.
    metric
        Fixed metric matrix. ``None`` evaluates ``target.metric(x0)`` once.
    adapt
        Tune the step size toward the MALA optimal acceptance during burn-in
        only; the retained chain uses a fixed kernel.
    jump_prob
        Probability of replacing a Langevin step by ``target.alias_jump``,
        an exact Metropolis move between modes the data cannot separate.
    """
    rng = np.random.default_rng(seed)
    x = np.array(x0, dtype=float)
    d = len(x)
    if not target.in_support(x):
        raise DomainError("starting point lies outside the prior support")
    h = step_size if step_size is not None else 1.65 * d ** (-1.0 / 6.0)

    if position_dependent:
        mstate = _MetricState(target.metric, metric_floor, absolute_floor)
    else:
        base = target.metric(x) if metric is None else metric
        g_fixed, l_fixed = regularize_metric(base, metric_floor, absolute_floor)
        mstate = None

    def local(z):
        lp, grad = target.log_density_and_gradient(z)
        if mstate is None:
            g, l, logdet = g_fixed, l_fixed, 0.0
        else:
            g, l, logdet = mstate.at(z)
        drift = l @ (l.T @ grad)
        return lp, drift, g, l, logdet

    def log_q(to, frm_mean, g, logdet, hh):
        diff = to - frm_mean
        return -0.5 * float(diff @ g @ diff) / hh**2 + 0.5 * logdet

    lp, drift, g, l, logdet = local(x)
    total = burn_in + n_samples * thin
    states = np.empty((n_samples, d))
    logps = np.empty(n_samples)
    accepted = np.zeros(total, bool)
    langevin = np.ones(total, bool)
    outside = 0
    jumps = [0, 0]
    can_jump = jump_prob > 0 and getattr(target, "alias_jump", None) is not None
    log_h = np.log(h)
    kept = 0
    for it in range(total):
        h = np.exp(log_h)
        if can_jump and rng.uniform() < jump_prob:
            y, log_jac = target.alias_jump(x, rng)
            if y is not None and target.in_support(y):
                jumps[0] += 1
                lp_y, drift_y, g_y, l_y, logdet_y = local(y)
                if np.log(rng.uniform()) < lp_y - lp + log_jac:
                    jumps[1] += 1
                    x, lp, drift, g, l, logdet = y, lp_y, drift_y, g_y, l_y, logdet_y
            langevin[it] = False
            if it >= burn_in and (it - burn_in) % thin == thin - 1:
                states[kept] = x
                logps[kept] = lp
                kept += 1
            continue
        mean_fwd = x + 0.5 * h**2 * drift
        y = mean_fwd + h * (l @ rng.standard_normal(d))
        accept = False
        if target.in_support(y):
            lp_y, drift_y, g_y, l_y, logdet_y = local(y)
            mean_bwd = y + 0.5 * h**2 * drift_y
            log_alpha = (lp_y - lp + log_q(x, mean_bwd, g_y, logdet_y, h)
                         - log_q(y, mean_fwd, g, logdet, h))
            if np.log(rng.uniform()) < log_alpha:
                accept = True
                x, lp, drift, g, l, logdet = y, lp_y, drift_y, g_y, l_y, logdet_y
            alpha = min(1.0, float(np.exp(min(log_alpha, 0.0))))
        else:
            outside += 1
            alpha = 0.0
        accepted[it] = accept
        if adapt and it < burn_in:
            log_h += (alpha - TARGET_ACCEPTANCE) / np.sqrt(it + 1.0)
        if it >= burn_in and (it - burn_in) % thin == thin - 1:
            states[kept] = x
            logps[kept] = lp
            kept += 1
    kept_acc = accepted[burn_in:][langevin[burn_in:]]
    logger.info("mcmc: %d steps, acceptance %.3f, step %.3g", total,
                kept_acc.mean() if len(kept_acc) else np.nan, np.exp(log_h))
    return Chain(states, logps, kept_acc, float(np.exp(log_h)), seed, burn_in, thin,
                 outside, {"position_dependent": position_dependent, "dim": d,
                           "jumps_proposed": jumps[0], "jumps_accepted": jumps[1]})


def integrated_autocorr_time(series, c: float = 5.0) -> float:
    """Sokal's windowed estimate of the integrated autocorrelation time."""
    x = np.asarray(series, float) - np.mean(series)
    n = len(x)
    if n < 4 or not np.any(x):
        return 1.0
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acf = np.fft.irfft(f * np.conj(f), size)[:n]
    acf /= acf[0]
    taus = 2.0 * np.cumsum(acf) - 1.0
    window = np.arange(n) >= c * taus
    m = int(np.argmax(window)) if window.any() else n - 1
    return float(max(taus[m], 1.0))


def effective_sample_size(series) -> float:
    return len(series) / integrated_autocorr_time(series)


def mc_standard_error(series) -> float:
    return float(np.std(series, ddof=1) / np.sqrt(effective_sample_size(series)))
