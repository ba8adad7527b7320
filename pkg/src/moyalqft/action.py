"""Classical action with harmonic term, evaluated exactly on Gaussian fields."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError, PreconditionError
from .gaussian import GaussianFunction, integrate, multiply, quadratic_expectation
from .moyal import MoyalContext, star_gaussian
from .symplectic import Metric, SymplecticStructure, adaptedness_residual, ADAPTED_TOL, orthogonal_action


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Couplings and geometry of the model.

    ``require_adapted`` guards the quantum-level modules; a non-adapted pair
    is only meaningful for classical-action experiments.
    """

    metric: Metric
    sigma: SymplecticStructure
    theta: float
    omega: float
    mass2: float = 0.0
    coupling: float = 0.0
    require_adapted: bool = True
    adapted: bool = field(init=False)

    def __post_init__(self):
        if self.metric.dim != self.sigma.dim:
            raise DimensionError("metric and sigma dimensions differ")
        if not self.theta > 0:
            raise DomainError("theta must be positive")
        # omega = 0 is allowed for classical experiments; the propagator rejects it
        if not 0 <= self.omega <= 1:
            raise DomainError(f"omega must lie in [0, 1], got {self.omega}")
        if self.mass2 < 0:
            raise DomainError("mass2 must be nonnegative")
        adapted = adaptedness_residual(self.sigma, self.metric) <= ADAPTED_TOL
        if self.require_adapted and not adapted:
            raise PreconditionError("sigma is not adapted to the metric")
        object.__setattr__(self, "adapted", adapted)

    @property
    def dim(self):
        return self.metric.dim

    @property
    def omega_tilde(self):
        return 2.0 * self.omega / self.theta

    def moyal(self):
        return MoyalContext(self.metric, self.sigma, self.theta, calibrate=False)

    def with_sigma(self, sigma):
        return ModelParams(
            self.metric, sigma, self.theta, self.omega, self.mass2, self.coupling, self.require_adapted
        )

    def rotated(self, lam):
        """Model with ``Sigma^{-1} -> Lambda Sigma^{-1} Lambda^T``."""
        return self.with_sigma(orthogonal_action(lam, self.sigma))


@dataclass(frozen=True, eq=False)
class FieldConfig:
    """Real, integrable Gaussian field ``phi``."""

    phi: GaussianFunction

    def __post_init__(self):
        if not self.phi.is_real:
            raise DomainError("field must be real valued (real coeff, A and b)")
        if not self.phi.is_integrable:
            raise DomainError("field must be integrable (A positive definite)")

    @classmethod
    def gaussian(cls, quad, lin=None, coeff=1.0):
        quad = np.asarray(quad, dtype=float)
        lin = np.zeros(quad.shape[0]) if lin is None else lin
        return cls(GaussianFunction(coeff, quad, lin))

    def __call__(self, x):
        return self.phi(x)


def harmonic_matrix(params):
    """``H`` with ``G^{-1}_{mu nu} x~_mu x~_nu = x^T H x`` for any Sigma."""
    m = params.moyal().wedge
    return m.T @ params.metric.g_inv @ m


def action_terms(params, field_):
    """The four integrated terms of the action as a dict of complex numbers."""
    phi = field_.phi
    if phi.dim != params.dim:
        raise DimensionError("field and model dimensions differ")
    a, b = phi.quad.real, phi.lin.real
    sq = multiply(phi, phi)
    g_inv = params.metric.g_inv
    # d_mu phi = (b - 2 A x)_mu phi, so G^{-1} d phi d phi is quadratic times phi^2
    kin = 0.5 * quadratic_expectation(sq, 4 * a @ g_inv @ a, -4 * a @ g_inv @ b, b @ g_inv @ b)
    harm = 0.5 * params.omega ** 2 * quadratic_expectation(sq, harmonic_matrix(params))
    mass = 0.5 * params.mass2 * integrate(sq)
    quartic = 0.0
    if params.coupling != 0:
        quartic = params.coupling * quartic_term(params.moyal(), phi)
    return {"kinetic": kin, "harmonic": harm, "mass": mass, "quartic": quartic}


def quartic_term(ctx, phi):
    """``∫ phi*phi*phi*phi`` as ``∫ (phi*phi)(phi*phi)`` via the tracial identity."""
    psi = star_gaussian(ctx, phi, phi)
    return integrate(multiply(psi, psi))


def action_value(params, field_):
    """Action of a Gaussian field; real for real fields up to rounding."""
    return complex(sum(action_terms(params, field_).values())).real


def transform_field(lam, field_):
    """``phi^Lambda(x) = phi(Lambda^{-1} x)``."""
    if lam.metric.dim != field_.phi.dim:
        raise DimensionError("map and field dimensions differ")
    return FieldConfig(field_.phi.substitute(lam.inverse))


def check_classical_invariance(params, field_, lam):
    """``|S'(phi^Lambda) - S(phi)| / |S(phi)|`` with ``Sigma^{-1} -> Lambda Sigma^{-1} Lambda^T``."""
    before = action_value(params, field_)
    after = action_value(params.rotated(lam), transform_field(lam, field_))
    return abs(after - before) / abs(before)
