"""Closed-form complex multivariate Gaussian integrals.

Two conventions live here:

* :class:`GaussianFunction` -- ``c * exp(-u^T A u + b^T u)`` (function algebra),
* :class:`QuadraticIntegrand` -- ``p * exp(-1/2 u^T Q u + L^T u)`` (integration),

related by ``Q = 2A``, ``L = b``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DivergentIntegralError, NumericalError

PD_TOL = 1e-12


def _sym(m):
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def _check_real_pd(q):
    """Raise unless ``Re(q)`` is positive definite (batched)."""
    re = _sym(np.real(q))
    if re.shape[-1] == 0:
        return
    w = np.linalg.eigvalsh(re)
    scale = np.maximum(np.max(np.abs(w), axis=-1), 1e-300)
    bad = w[..., 0] <= PD_TOL * scale
    if np.any(bad):
        worst = float(np.min(w[..., 0]))
        raise DivergentIntegralError(
            f"real part of quadratic form is not positive definite (eigenvalue {worst:.3e})",
            eigenvalue=worst,
        )


def log_det_principal(q):
    """``log det Q`` as a sum of principal logs of the eigenvalues.

    For ``Re Q`` positive definite every eigenvalue lies in the open right
    half plane, so each principal log is analytic along any path of such
    matrices and ``exp(-log_det/2)`` is the branch of ``det^{-1/2}``
    continuous from real positive-definite ``Q``.
    """
    if q.shape[-1] == 0:
        return np.zeros(q.shape[:-2], dtype=complex)
    return np.sum(np.log(np.linalg.eigvals(q).astype(complex)), axis=-1)


def _pivot_logdet_solve(q, lin):
    """``(log det Q, Q^{-1} L)`` by unpivoted symmetric elimination over a stack.

    Every pivot is a 1x1 Schur complement of ``Q``; with ``Re Q`` positive
    definite these all have positive real part, so the sum of their
    principal logs is continuous on that convex set and equals
    :func:`log_det_principal`, at a fraction of the cost of eigenvalues.
    """
    a = np.array(q, dtype=complex)
    x = np.array(lin, dtype=complex)
    k = a.shape[-1]
    logdet = np.zeros(a.shape[:-2], dtype=complex)
    for j in range(k):
        piv = a[..., j, j]
        logdet += np.log(piv)
        col = a[..., j + 1:, j] / piv[..., None]
        a[..., j + 1:, j + 1:] -= col[..., :, None] * a[..., j, None, j + 1:]
        x[..., j + 1:] -= col * x[..., j, None]
        a[..., j + 1:, j] = col
    for j in range(k - 1, -1, -1):
        x[..., j] = (x[..., j] - np.sum(a[..., j, j + 1:] * x[..., j + 1:], axis=-1)) / a[..., j, j]
    return logdet, x


def gaussian_integral_batch(q, lin, prefactor=1.0, check=True):
    """Vectorised ``∫ p exp(-1/2 u^T Q u + L^T u) du`` over stacks of ``(Q, L)``."""
    q = np.asarray(q, dtype=complex)
    lin = np.asarray(lin, dtype=complex)
    k = q.shape[-1]
    if check:
        _check_real_pd(q)
    if k == 0:
        return np.asarray(prefactor, dtype=complex) * np.ones(q.shape[:-2])
    logdet, sol = _pivot_logdet_solve(q, lin)
    expo = 0.5 * np.sum(lin * sol, axis=-1) - 0.5 * logdet
    return np.asarray(prefactor) * (2 * np.pi) ** (k / 2) * np.exp(expo)


@dataclass(frozen=True, eq=False)
class QuadraticIntegrand:
    """``prefactor * exp(-1/2 u^T Q u + L^T u)`` on ``C^k`` (``Q`` symmetrised)."""

    q: np.ndarray
    lin: np.ndarray
    prefactor: complex = 1.0

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.q, dtype=complex))
        if q.size == 0:
            q = np.zeros((0, 0), dtype=complex)
        lin = np.asarray(self.lin, dtype=complex).reshape(-1)
        if q.shape != (lin.size, lin.size):
            raise DimensionError(f"Q has shape {q.shape} but L has length {lin.size}")
        object.__setattr__(self, "q", _sym(q))
        object.__setattr__(self, "lin", lin)
        object.__setattr__(self, "prefactor", complex(self.prefactor))

    @property
    def dim(self):
        return self.lin.size

    def __call__(self, u):
        u = np.asarray(u)
        return self.prefactor * np.exp(
            -0.5 * np.einsum("...i,ij,...j->...", u, self.q, u) + u @ self.lin
        )


def gaussian_integral(qi):
    """Closed-form integral of a :class:`QuadraticIntegrand` over ``R^k``.

    Raises:
        DivergentIntegralError: ``Re Q`` not positive definite.
    """
    return complex(gaussian_integral_batch(qi.q, qi.lin, qi.prefactor))


def partial_gaussian_integral(qi, integrate_out):
    """Integrate out the variables in ``integrate_out`` by Schur complement.

    The result is a :class:`QuadraticIntegrand` over the remaining variables
    in their original relative order.
    """
    k = qi.dim
    out = sorted(set(int(i) for i in integrate_out))
    if any(i < 0 or i >= k for i in out):
        raise DimensionError(f"indices {out} out of range for {k} variables")
    keep = [i for i in range(k) if i not in set(out)]
    quu = qi.q[np.ix_(out, out)]
    _check_real_pd(quu)
    qvu = qi.q[np.ix_(keep, out)]
    qvv = qi.q[np.ix_(keep, keep)]
    lu, lv = qi.lin[out], qi.lin[keep]
    try:
        sol = np.linalg.solve(quu, np.column_stack([lu, qvu.T]))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("integrated block is singular") from exc
    x_l, x_q = sol[:, 0], sol[:, 1:]
    new_q = qvv - qvu @ x_q
    new_l = lv - qvu @ x_l
    pref = qi.prefactor * (2 * np.pi) ** (len(out) / 2) * np.exp(
        0.5 * lu @ x_l - 0.5 * log_det_principal(quu)
    )
    return QuadraticIntegrand(new_q, new_l, pref)


@dataclass(frozen=True, eq=False)
class GaussianFunction:
    """``coeff * exp(-u^T A u + b^T u)``; ``A`` is stored symmetrised."""

    coeff: complex
    quad: np.ndarray
    lin: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.quad, dtype=complex))
        b = np.asarray(self.lin, dtype=complex).reshape(-1)
        if a.shape != (b.size, b.size):
            raise DimensionError(f"A has shape {a.shape} but b has length {b.size}")
        object.__setattr__(self, "quad", _sym(a))
        object.__setattr__(self, "lin", b)
        object.__setattr__(self, "coeff", complex(self.coeff))

    @property
    def dim(self):
        return self.lin.size

    @classmethod
    def one(cls, dim):
        return cls(1.0, np.zeros((dim, dim)), np.zeros(dim))

    @classmethod
    def isotropic(cls, dim, width=1.0, coeff=1.0, lin=None):
        """``coeff * exp(-width * |u|^2 + lin.u)``."""
        return cls(coeff, width * np.eye(dim), np.zeros(dim) if lin is None else lin)

    def __call__(self, u):
        u = np.asarray(u)
        return self.coeff * np.exp(-np.einsum("...i,ij,...j->...", u, self.quad, u) + u @ self.lin)

    @property
    def is_integrable(self):
        try:
            _check_real_pd(2 * self.quad)
        except DivergentIntegralError:
            return False
        return True

    @property
    def is_real(self):
        return (
            abs(self.coeff.imag) <= 1e-15 * abs(self.coeff)
            and np.all(self.quad.imag == 0)
            and np.all(self.lin.imag == 0)
        )

    def to_integrand(self):
        return QuadraticIntegrand(2 * self.quad, self.lin, self.coeff)

    @classmethod
    def from_integrand(cls, qi):
        return cls(qi.prefactor, 0.5 * qi.q, qi.lin)

    def scaled(self, s):
        return GaussianFunction(self.coeff * s, self.quad, self.lin)

    def substitute(self, mat, shift=None):
        """``x -> f(mat @ x + shift)`` as a new Gaussian in ``x``."""
        mat = np.asarray(mat, dtype=float)
        s = np.zeros(self.dim) if shift is None else np.asarray(shift)
        a, b = self.quad, self.lin
        return GaussianFunction(
            self.coeff * np.exp(-s @ a @ s + b @ s),
            mat.T @ a @ mat,
            mat.T @ (b - 2 * a @ s),
        )

    def moments(self):
        """``(Z, mean, cov)`` with ``Z = ∫f``; mean/cov of the normalised weight."""
        qi = self.to_integrand()
        z = gaussian_integral(qi)
        cov = np.linalg.inv(qi.q)
        return z, cov @ qi.lin, cov


def multiply(f, g):
    """Pointwise product."""
    if f.dim != g.dim:
        raise DimensionError(f"cannot multiply {f.dim}- and {g.dim}-dimensional Gaussians")
    return GaussianFunction(f.coeff * g.coeff, f.quad + g.quad, f.lin + g.lin)


def integrate(f):
    """``∫ f(u) du`` over ``R^n``."""
    return gaussian_integral(f.to_integrand())


def quadratic_expectation(f, h, v=None, c=0.0):
    """``∫ (u^T H u + v.u + c) f(u) du`` in closed form."""
    z, mean, cov = f.moments()
    h = np.asarray(h)
    val = np.trace(h @ cov) + mean @ h @ mean + c
    if v is not None:
        val = val + np.asarray(v) @ mean
    return z * val


def random_gaussian(dim, rng, width=(0.3, 1.5), lin_scale=0.5, complex_lin=False):
    """Seeded integrable Gaussian with real ``A`` whose spectrum lies in ``width``."""
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    a = q @ np.diag(rng.uniform(*width, size=dim)) @ q.T
    b = lin_scale * rng.normal(size=dim)
    if complex_lin:
        b = b + 1j * lin_scale * rng.normal(size=dim)
    return GaussianFunction(rng.uniform(0.5, 2.0), a, b)
