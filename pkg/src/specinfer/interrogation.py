"""Probe the 2D model with single Fourier modes to test the 1D model's assumptions.

A generalized advection-diffusion operator is linear, shift invariant and
time independent, so a mode ``exp(i kappa' x)`` evolves as
``exp((mu_k' - i u kappa') t)`` without exciting any other mode and with a
constant log derivative. Deviations measured on upscaled 2D data quantify
how far the high-fidelity physics is from those assumptions.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, InputShapeError
from .highfid.darcy import solve_darcy
from .highfid.grid import Grid2D
from .highfid.permeability import PermeabilityRealization, sample_permeability
from .highfid.upscale import EnsembleSpec, TransportSettings, evolve_realization
from .spectral import (
    OperatorSpectrum,
    SpectralField,
    TransportConstants,
    WaveGrid,
    analyze,
    propagate_exact,
)

logger = logging.getLogger(__name__)

DEFAULT_PROBES = (1, 2, 4, 8, 16)
AMPLITUDE_FLOOR = 1e-10
SHIFT_TOL = 1e-10
TIME_TOL = 0.01


@dataclass
class ModeProbeResult:
    """Coefficient history ``coeffs[n, j] = c_{ks[j]}(times[n])`` for the probe ``exp(i kappa_probe x)``."""

    probe: int
    times: np.ndarray
    ks: np.ndarray
    coeffs: np.ndarray
    provenance: dict = field(default_factory=dict)

    def coeff(self, k) -> np.ndarray:
        hit = np.nonzero(self.ks == k)[0]
        if len(hit) == 0:
            raise DomainError(f"mode {k} is not resolved by the analysis grid")
        return self.coeffs[:, hit[0]]


@dataclass
class LogDerivativeSeries:
    mode: int
    times: np.ndarray
    values: np.ndarray
    valid: np.ndarray

    @property
    def mean(self) -> complex:
        v = self.values[self.valid]
        return complex(v.mean()) if len(v) else complex("nan")

    def variation(self) -> float:
        """``max |v(t) - mean| / |mean|`` over valid times."""
        v = self.values[self.valid]
        if len(v) == 0:
            return float("nan")
        m = v.mean()
        return float(np.abs(v - m).max() / abs(m))

    def real_variation(self) -> float:
        v = self.values[self.valid].real
        if len(v) == 0:
            return float("nan")
        m = v.mean()
        return float(np.abs(v - m).max() / abs(m))


def analysis_grid(grid: Grid2D) -> WaveGrid:
    """Largest wave grid whose points coincide with the 2D cell centres in x."""
    return WaveGrid(grid.lx, (grid.nx - 1) // 2, grid.nx)


def _mode_profiles(grid: Grid2D, k: int):
    kx = 2.0 * np.pi * k / grid.lx
    return np.cos(kx * grid.xc), np.sin(kx * grid.xc)


def _history(wg: WaveGrid, snaps) -> np.ndarray:
    return np.stack([analyze(wg, s).coefficients for s in snaps])


def propagate_mode(k: int, source, grid: Grid2D, settings: TransportSettings | None = None,
                   times=None) -> ModeProbeResult:
    """Run the 2D pipeline from the mode ``exp(i kappa_k x)`` (uniform in y).

    The complex initial condition is realized as a cosine run and a sine
    run; the coefficients recombine as ``c = c_cos + i c_sin``. Ensemble
    members share one Darcy solve for both runs and are averaged in member
    order.
    """
    settings = settings or TransportSettings(limiter="none")
    wg = analysis_grid(grid)
    if abs(k) > wg.n_modes:
        raise DomainError(f"probe mode {k} exceeds the resolvable {wg.n_modes}")
    times = default_times() if times is None else np.asarray(times, dtype=float)
    cos_p, sin_p = _mode_profiles(grid, k)

    def one(vel):
        a, _ = evolve_realization(cos_p, vel, settings, times)
        b, _ = evolve_realization(sin_p, vel, settings, times)
        return _history(wg, a) + 1j * _history(wg, b)

    if isinstance(source, PermeabilityRealization):
        coeffs = one(solve_darcy(source, settings.darcy))
        prov = {"seed": source.seed, "members": 1}
    elif isinstance(source, EnsembleSpec):
        acc = None
        for s in source.seeds:
            h = one(solve_darcy(sample_permeability(grid, source.stats, s), settings.darcy))
            acc = h if acc is None else acc + h
        coeffs = acc / source.size
        prov = {"base_seed": source.base_seed, "members": source.size}
    else:
        raise DomainError("source must be a PermeabilityRealization or an EnsembleSpec")
    prov["limiter"] = settings.limiter
    return ModeProbeResult(k, times, wg.ks, coeffs, prov)


def spectral_probe(k: int, spectrum: OperatorSpectrum, constants: TransportConstants,
                   times) -> ModeProbeResult:
    """Probe result generated by the 1D generalized ADE itself (exact reference)."""
    wg = spectrum.grid
    if abs(k) > wg.n_modes:
        raise DomainError(f"probe mode {k} exceeds the resolvable {wg.n_modes}")
    c0 = np.zeros(len(wg.ks), complex)
    c0[wg.ks == k] = 1.0
    fld = SpectralField(wg, c0)
    times = np.asarray(times, dtype=float)
    coeffs = np.stack([propagate_exact(fld, spectrum, constants, t).coefficients for t in times])
    return ModeProbeResult(k, times, wg.ks, coeffs, {"model": "spectral"})


def default_times(t_end: float = 1.0, dt_snap: float = 0.005) -> np.ndarray:
    n = int(round(t_end / dt_snap))
    return np.linspace(0.0, t_end, n + 1)


def log_derivative(probe: ModeProbeResult, k: int | None = None,
                   floor: float = AMPLITUDE_FLOOR) -> LogDerivativeSeries:
    """``c_k^{-1} dc_k/dt`` from differences of ``log c_k`` in time.

    Differencing the logarithm (modulus plus unwrapped phase) instead of
    ``c_k`` itself makes the estimate exact for a pure exponential; second
    order central differences inside, one-sided second order at the ends.
    Times where ``|c_k|`` drops below ``floor`` times the initial probe
    amplitude are marked invalid.
    """
    k = probe.probe if k is None else k
    t = probe.times
    if len(t) < 3:
        raise InputShapeError("need at least 3 snapshots for a log derivative")
    c = probe.coeff(k)
    ref = np.abs(probe.coeff(probe.probe)[0])
    valid = np.abs(c) >= floor * (ref if ref > 0 else 1.0)
    logc = np.full(len(t), np.nan + 0j)
    if valid.any():
        with np.errstate(divide="ignore"):
            logc = np.log(np.abs(c)) + 1j * np.unwrap(np.angle(c))
    values = np.gradient(logc, t, edge_order=2)
    # a derivative touching an invalid point is itself invalid
    ok = valid.copy()
    ok[1:] &= valid[:-1]
    ok[:-1] &= valid[1:]
    if len(t) > 2:
        ok[0] &= valid[2]
        ok[-1] &= valid[-3]
    values = np.where(ok, values, np.nan + 0j)
    return LogDerivativeSeries(k, t, values, ok)


@dataclass
class CrossModeMatrix:
    ks: np.ndarray
    probes: np.ndarray
    matrix: np.ndarray
    time: float

    def off_diagonal_ratio(self) -> np.ndarray:
        """Per probe: energy outside the probed mode over total energy."""
        out = np.empty(len(self.probes))
        for j, p in enumerate(self.probes):
            col = np.abs(self.matrix[:, j]) ** 2
            total = col.sum()
            out[j] = (total - col[self.ks == p].sum()) / total if total > 0 else 0.0
        return out


def cross_mode_matrix(probes, t: float) -> CrossModeMatrix:
    """Matrix ``M[k, k'] = c_k(t)`` from the probe of mode ``k'``."""
    probes = list(probes)
    if not probes:
        raise DomainError("no probes given")
    ks = probes[0].ks
    cols = []
    for p in probes:
        if not np.array_equal(p.ks, ks):
            raise InputShapeError("probes use different analysis grids")
        hit = np.nonzero(np.isclose(p.times, t, rtol=0, atol=1e-12))[0]
        if len(hit) == 0:
            raise DomainError(f"probe {p.probe} has no snapshot at t={t}")
        cols.append(p.coeffs[hit[0]])
    return CrossModeMatrix(ks, np.array([p.probe for p in probes]), np.stack(cols, axis=1), float(t))


@dataclass
class ModeVerdict:
    probe: int
    off_diagonal: float
    log_derivative_variation: float
    real_part_variation: float
    mean_log_derivative: complex
    shift_invariant: bool
    time_independent: bool


@dataclass
class AssumptionReport:
    verdicts: list
    shift_tol: float
    time_tol: float

    @property
    def shift_invariance(self) -> bool:
        return all(v.shift_invariant for v in self.verdicts)

    @property
    def time_independence(self) -> bool:
        return all(v.time_independent for v in self.verdicts)

    def to_dict(self) -> dict:
        rows = []
        for v in self.verdicts:
            d = asdict(v)
            m = d.pop("mean_log_derivative")
            d["mean_log_derivative_re"] = m.real
            d["mean_log_derivative_im"] = m.imag
            rows.append(d)
        return {"shift_invariance": "PASS" if self.shift_invariance else "FAIL",
                "time_independence": "PASS" if self.time_independence else "FAIL",
                "shift_tol": self.shift_tol, "time_tol": self.time_tol, "modes": rows}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        lines = [f"shift_invariance = {'PASS' if self.shift_invariance else 'FAIL'}",
                 f"time_independence = {'PASS' if self.time_independence else 'FAIL'}",
                 f"shift_tol = {self.shift_tol:g}",
                 f"time_tol = {self.time_tol:g}"]
        for v in self.verdicts:
            lines.append(f"mode {v.probe}: off_diagonal = {v.off_diagonal:.3e}, "
                         f"log_derivative_variation = {v.log_derivative_variation:.3e}, "
                         f"real_part_variation = {v.real_part_variation:.3e}")
        return "\n".join(lines)


def assumption_report(probes, shift_tol: float = SHIFT_TOL, time_tol: float = TIME_TOL,
                      floor: float = AMPLITUDE_FLOOR) -> AssumptionReport:
    """Per-probe verdicts.

    Shift invariance uses the largest off-diagonal energy ratio over all
    snapshots after the first; time independence the relative variation of
    the probed mode's log derivative.
    """
    verdicts = []
    for p in probes:
        ratios = [cross_mode_matrix([p], t).off_diagonal_ratio()[0] for t in p.times[1:]]
        off = float(max(ratios)) if ratios else 0.0
        ld = log_derivative(p, floor=floor)
        var = ld.variation()
        verdicts.append(ModeVerdict(p.probe, off, var, ld.real_variation(), ld.mean,
                                    bool(off < shift_tol), bool(var < time_tol)))
    return AssumptionReport(verdicts, shift_tol, time_tol)
