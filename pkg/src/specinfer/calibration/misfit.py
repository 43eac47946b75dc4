"""Least-squares data misfit with analytic gradient and block Hessian."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputShapeError
from .forward import ObservationSet, SpectralForwardModel


@dataclass(frozen=True)
class MisfitEvaluation:
    value: float
    gradient: np.ndarray
    h_rr: np.ndarray | None = None
    h_rtheta: np.ndarray | None = None
    h_thetatheta: np.ndarray | None = None
    gn_only: bool = False

    @property
    def hessian(self) -> np.ndarray:
        if self.h_rr is None:
            raise ValueError("evaluation was computed without Hessian blocks")
        return np.block([[self.h_rr, self.h_rtheta], [self.h_rtheta.T, self.h_thetatheta]])


class Misfit:
    """``J = w/2 * ||c(theta) - d||^2`` with ``w = 1/sigma^2`` when noise is modelled.

    With no noise model ``w = 1`` and ``J`` is the plain half squared norm.
    """

    def __init__(self, model: SpectralForwardModel, obs: ObservationSet):
        if len(model) != len(obs):
            raise InputShapeError("model and observations have different lengths")
        if not (np.array_equal(model.x, obs.x) and np.array_equal(model.t, obs.t)):
            raise InputShapeError("model was built for different observation points")
        self.model = model
        self.obs = obs
        self.weight = obs.weight

    @classmethod
    def build(cls, c0, constants, obs: ObservationSet) -> Misfit:
        return cls(SpectralForwardModel(c0, constants, obs.x, obs.t), obs)

    @property
    def n_params(self):
        return self.model.n_params

    def residual(self, theta) -> np.ndarray:
        return self.model.observe(theta) - self.obs.values

    def value(self, theta) -> float:
        res = self.residual(theta)
        return 0.5 * self.weight * float(res @ res)

    def gradient(self, theta) -> np.ndarray:
        c, jac = self.model.observe_and_jacobian(theta)
        return self.weight * jac.T @ (c - self.obs.values)

    def evaluate(self, theta, hessian: bool = True, gn_only: bool = False) -> MisfitEvaluation:
        c, jac = self.model.observe_and_jacobian(theta)
        res = c - self.obs.values
        w = self.weight
        value = 0.5 * w * float(res @ res)
        grad = w * jac.T @ res
        if not hessian:
            return MisfitEvaluation(value, grad)
        n = self.model.grid.n_modes
        gn = w * jac.T @ jac
        h_rr, h_rt, h_tt = gn[:n, :n], gn[:n, n:], gn[n:, n:]
        if not gn_only:
            rr, thth, rth = self.model.second_derivatives(theta)
            wres = w * res
            h_rr = h_rr + np.diag(wres @ rr)
            h_tt = h_tt + np.diag(wres @ thth)
            h_rt = h_rt + np.diag(wres @ rth)
        return MisfitEvaluation(value, grad, h_rr, h_rt, h_tt, gn_only)

    def hessian(self, theta, gn_only: bool = False) -> np.ndarray:
        return self.evaluate(theta, gn_only=gn_only).hessian


def misfit(theta, obs: ObservationSet, c0, constants) -> MisfitEvaluation:
    """Value and gradient of the data misfit (no Hessian)."""
    return Misfit.build(c0, constants, obs).evaluate(theta, hessian=False)


def jacobian(theta, obs: ObservationSet, c0, constants) -> np.ndarray:
    return SpectralForwardModel(c0, constants, obs.x, obs.t).jacobian(theta)


def hessian(theta, obs: ObservationSet, c0, constants, gn_only: bool = False) -> MisfitEvaluation:
    return Misfit.build(c0, constants, obs).evaluate(theta, gn_only=gn_only)
