"""Sparse multivariate polynomials with complex coefficients."""

from __future__ import annotations

from numbers import Number

import numpy as np

from .errors import DimensionError


class PolynomialFunction:
    """Polynomial in ``dim`` variables stored as ``{exponent tuple: coefficient}``.

    Zero coefficients are never stored, so two equal polynomials have equal
    term dictionaries.
    """

    __slots__ = ("dim", "terms")

    def __init__(self, dim, terms=None):
        self.dim = int(dim)
        clean = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.dim:
                raise DimensionError(f"exponent {exps} does not match dimension {self.dim}")
            c = complex(c)
            if c != 0:
                clean[exps] = clean.get(exps, 0) + c
        self.terms = {k: v for k, v in clean.items() if v != 0}

    @classmethod
    def constant(cls, dim, c=1.0):
        return cls(dim, {(0,) * dim: c})

    @classmethod
    def coordinate(cls, dim, mu):
        e = [0] * dim
        e[mu] = 1
        return cls(dim, {tuple(e): 1.0})

    @classmethod
    def linear(cls, coeffs):
        """``sum_mu coeffs[mu] x_mu``."""
        coeffs = np.asarray(coeffs)
        dim = coeffs.size
        return sum((cls.coordinate(dim, mu) * coeffs[mu] for mu in range(dim)), cls(dim))

    @property
    def degree(self):
        return max((sum(e) for e in self.terms), default=-1)

    def is_zero(self):
        return not self.terms

    def max_abs_coeff(self):
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def _check(self, other):
        if other.dim != self.dim:
            raise DimensionError(f"dimension mismatch {self.dim} vs {other.dim}")

    def __add__(self, other):
        if isinstance(other, Number):
            other = PolynomialFunction.constant(self.dim, other)
        self._check(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0) + c
        return PolynomialFunction(self.dim, out)

    __radd__ = __add__

    def __neg__(self):
        return PolynomialFunction(self.dim, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Number):
            return PolynomialFunction(self.dim, {e: c * other for e, c in self.terms.items()})
        self._check(other)
        out = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return PolynomialFunction(self.dim, out)

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, PolynomialFunction) and self.dim == other.dim and self.terms == other.terms

    def __repr__(self):
        return f"PolynomialFunction(dim={self.dim}, terms={self.terms!r})"

    def diff(self, mu, order=1):
        out = {}
        for e, c in self.terms.items():
            if e[mu] < order:
                continue
            f = 1
            for k in range(order):
                f *= e[mu] - k
            ne = list(e)
            ne[mu] -= order
            out[tuple(ne)] = out.get(tuple(ne), 0) + c * f
        return PolynomialFunction(self.dim, out)

    def diff_multi(self, alpha):
        out = self
        for mu, k in enumerate(alpha):
            if k:
                out = out.diff(mu, k)
        return out

    def __call__(self, x):
        x = np.asarray(x, dtype=complex)
        val = np.zeros(x.shape[:-1], dtype=complex)
        for e, c in self.terms.items():
            val = val + c * np.prod(x ** np.asarray(e), axis=-1)
        return val

    def restrict(self, keep):
        """Set every variable with index ``>= keep`` to zero."""
        return PolynomialFunction(
            keep, {e[:keep]: c for e, c in self.terms.items() if not any(e[keep:])}
        )


def random_polynomial(dim, degree, rng, density=0.5):
    """Seeded polynomial with real coefficients of total degree ``<= degree``."""
    terms = {}
    for exps in np.ndindex(*([degree + 1] * dim)):
        if sum(exps) <= degree and rng.random() < density:
            terms[exps] = rng.standard_normal()
    return PolynomialFunction(dim, terms)
