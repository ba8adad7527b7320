"""Mehler-kernel propagator of the harmonic model.

The kernel is built from the metric, ``theta``, ``Omega`` and ``m^2`` only;
it never sees the symplectic structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .gaussian import GaussianFunction, quadratic_expectation
from .quadrature import integrate_semi_infinite
from .symplectic import Metric


@dataclass(frozen=True)
class CutoffSpec:
    """UV cutoff on the Schwinger parameter and the quadrature tolerance."""

    epsilon: float
    alpha_max: float = np.inf
    tol: float = 1e-10

    def __post_init__(self):
        if not 0 < self.epsilon < self.alpha_max:
            raise DomainError(f"need 0 < epsilon < alpha_max, got {self.epsilon}, {self.alpha_max}")
        if not self.tol > 0:
            raise DomainError("tolerance must be positive")


def inv_sinh_power(alpha, power):
    """``sinh(alpha)^{-power}`` without overflow for large ``alpha``."""
    alpha = np.asarray(alpha, dtype=float)
    return (2.0 * np.exp(-alpha) / -np.expm1(-2.0 * alpha)) ** power


@dataclass(frozen=True, eq=False)
class MehlerKernel:
    metric: Metric
    theta: float
    omega: float
    mass2: float = 0.0

    def __post_init__(self):
        if not self.omega > 0:
            raise DomainError("the Mehler kernel needs omega > 0")
        if not self.theta > 0:
            raise DomainError("theta must be positive")

    @classmethod
    def from_params(cls, params):
        # deliberately reads no symplectic data
        return cls(params.metric, params.theta, params.omega, params.mass2)

    @property
    def dim(self):
        return self.metric.dim

    @property
    def omega_tilde(self):
        return 2.0 * self.omega / self.theta

    @property
    def prefactor(self):
        d = self.dim
        return (
            self.theta * np.sqrt(abs(self.metric.det)) / (4.0 * self.omega)
            * (self.omega / (np.pi * self.theta)) ** (d / 2)
        )

    def alpha_weight(self, alpha):
        """``sinh^{-D/2}(alpha) exp(-m^2 alpha / (2 Omega~))``."""
        alpha = np.asarray(alpha, dtype=float)
        return inv_sinh_power(alpha, self.dim / 2) * np.exp(-self.mass2 * alpha / (2 * self.omega_tilde))

    def kernel_at(self, x, y, alpha):
        """``C(x, y, alpha)``; broadcasts over leading axes of ``x``, ``y`` and ``alpha``."""
        alpha = np.asarray(alpha, dtype=float)
        if np.any(alpha <= 0):
            raise DomainError("alpha must be positive")
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        ot = self.omega_tilde
        diff = self.metric.norm2(x - y)
        summ = self.metric.norm2(x + y)
        return np.exp(-0.25 * ot * (diff / np.tanh(alpha / 2) + np.tanh(alpha / 2) * summ))

    def line_forms(self, alpha):
        """``(c_minus, c_plus)`` with ``C = exp(-c_minus (x-y)G(x-y) - c_plus (x+y)G(x+y))``."""
        alpha = np.asarray(alpha, dtype=float)
        ot = self.omega_tilde
        return 0.25 * ot / np.tanh(alpha / 2), 0.25 * ot * np.tanh(alpha / 2)


def propagator_value(k, cutoff, x, y):
    """Regularised propagator ``C_eps(x, y)`` as ``(value, abs_error)``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)

    def f(alpha):
        return k.alpha_weight(alpha) * k.kernel_at(x, y, alpha)

    res = integrate_semi_infinite(f, cutoff.epsilon, epsrel=cutoff.tol)
    return k.prefactor * res.value.real, k.prefactor * res.abs_error


def quadratic_operator_on(k, f):
    """``K f`` as ``(H, v, c)`` with ``(K f)(y) = (y^T H y + v.y + c) f(y)``.

    ``K = -G^{-1} d d + Omega~^2 y^T G y + m^2`` is the kernel of the quadratic
    part of the action (``S_2 = 1/2 <phi, K phi>``) for an adapted structure,
    i.e. the operator the propagator inverts.
    """
    a, b = f.quad, f.lin
    gi = k.metric.g_inv
    ot = k.omega_tilde
    # d_mu d_nu f = ((b - 2Ay)_mu (b - 2Ay)_nu - 2 A_mu nu) f
    h = -4 * a @ gi @ a + ot ** 2 * k.metric.g
    v = 4 * a @ gi @ b
    c = -(b @ gi @ b) + 2 * np.trace(gi @ a) + k.mass2
    return h, v, c


def smeared_kernel(k, x0, alpha):
    """``y -> C(x0, y, alpha)`` as a Gaussian in ``y``."""
    cm, cp = k.line_forms(alpha)
    g = k.metric.g
    quad = (cm + cp) * g
    lin = 2 * (cm - cp) * g @ x0
    coeff = np.exp(-(cm + cp) * (x0 @ g @ x0))
    return GaussianFunction(coeff, quad, lin)


def green_pairing(k, f, x0, epsilon, tol=1e-11, operator=None):
    """``∫ dy C_eps(x0, y) (K f)(y)`` with the inner integral in closed form."""
    x0 = np.asarray(x0, dtype=float)
    h, v, c = quadratic_operator_on(k, f) if operator is None else operator
    f_real = GaussianFunction(f.coeff, f.quad, f.lin)

    def integrand(alphas):
        out = np.empty(len(alphas), dtype=complex)
        for i, al in enumerate(alphas):
            ker = smeared_kernel(k, x0, al)
            prod = GaussianFunction(ker.coeff * f_real.coeff, ker.quad + f_real.quad, ker.lin + f_real.lin)
            out[i] = quadratic_expectation(prod, h, v, c)
        return k.alpha_weight(alphas) * out

    res = integrate_semi_infinite(integrand, epsilon, epsrel=tol)
    return k.prefactor * res.value, k.prefactor * res.abs_error


def check_green_property(k, testfn, x0, epsilon_sequence, operator=None):
    """``|∫ C_eps(x0, .) K f - f(x0)|`` for each cutoff in ``epsilon_sequence``."""
    target = testfn(np.asarray(x0, dtype=float))
    out = []
    for eps in epsilon_sequence:
        val, _ = green_pairing(k, testfn, x0, eps, operator=operator)
        out.append(float(abs(val - target)))
    return out


def operator_without_harmonic(k, f):
    """``K`` with the harmonic term dropped (negative control)."""
    h, v, c = quadratic_operator_on(k, f)
    return h - k.omega_tilde ** 2 * k.metric.g, v, c


def check_g_scaling(k, cutoff, x, y):
    """``|C_G(x, y) - sqrt(det G) C_I(G^{1/2} x, G^{1/2} y)| / |C_G(x, y)|``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    std = MehlerKernel(Metric.identity(k.dim), k.theta, k.omega, k.mass2)
    lhs, _ = propagator_value(k, cutoff, x, y)
    rhs, _ = propagator_value(std, cutoff, k.metric.g_sqrt @ x, k.metric.g_sqrt @ y)
    return abs(lhs - np.sqrt(k.metric.det) * rhs) / abs(lhs)
