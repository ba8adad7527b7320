"""Metrics, symplectic structures and the orthogonal action on them.

Everything here is plain dense linear algebra on small ``D x D`` real
matrices.  The central routine is :func:`decompose_adapted`, which writes an
adapted symplectic structure as ``G^{1/2} R^T Sigma_st R G^{1/2}`` with ``R``
standard-orthogonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import schur

from .errors import DimensionError, DomainError, NumericalError, PreconditionError

SYM_TOL = 1e-12
ADAPTED_TOL = 1e-9
ORTHO_TOL = 1e-10

_SIGMA2 = np.array([[0.0, -1.0], [1.0, 0.0]])
_RHO = np.array([[0.0, 1.0], [1.0, 0.0]])


def _check_even(dim):
    if int(dim) != dim or dim < 2 or dim % 2:
        raise DimensionError(f"dimension must be an even integer >= 2, got {dim}")
    return int(dim)


def _as_square(m, name):
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {a.shape}")
    return a


def matrix_sqrt(m):
    """Symmetric positive-definite square root via the symmetric eigenproblem.

    Raises:
        DomainError: if ``m`` is not symmetric or not positive definite.
    """
    a = _as_square(m, "matrix")
    scale = max(np.max(np.abs(a)), 1.0)
    if np.max(np.abs(a - a.T)) > SYM_TOL * scale:
        raise DomainError("matrix is not symmetric")
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    if w[0] <= 0:
        raise DomainError(f"matrix is not positive definite (min eigenvalue {w[0]:.3e})")
    r = (v * np.sqrt(w)) @ v.T
    return 0.5 * (r + r.T)


@dataclass(frozen=True, eq=False)
class Metric:
    """Positive-definite scalar product ``G`` with cached root and inverse."""

    g: np.ndarray
    g_sqrt: np.ndarray = field(init=False, repr=False)
    g_inv_sqrt: np.ndarray = field(init=False, repr=False)
    g_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = _as_square(self.g, "metric")
        _check_even(g.shape[0])
        g = 0.5 * (g + g.T) if np.max(np.abs(g - g.T)) <= SYM_TOL * max(np.max(np.abs(g)), 1.0) else g
        root = matrix_sqrt(g)
        w, v = np.linalg.eigh(g)
        inv_root = (v / np.sqrt(w)) @ v.T
        for name, val in (
            ("g", g),
            ("g_sqrt", root),
            ("g_inv_sqrt", 0.5 * (inv_root + inv_root.T)),
            ("g_inv", (v / w) @ v.T),
        ):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def dim(self):
        return self.g.shape[0]

    @property
    def det(self):
        return float(np.linalg.det(self.g))

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(_check_even(dim)))

    def norm2(self, x):
        """Quadratic form ``x^T G x`` (batched over leading axes)."""
        x = np.asarray(x, dtype=float)
        return np.einsum("...i,ij,...j->...", x, self.g, x)


@dataclass(frozen=True, eq=False)
class SymplecticStructure:
    """Invertible antisymmetric real matrix ``Sigma``."""

    sigma: np.ndarray
    sigma_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        s = _as_square(self.sigma, "sigma")
        _check_even(s.shape[0])
        scale = max(np.max(np.abs(s)), 1.0)
        if np.max(np.abs(s + s.T)) > SYM_TOL * scale:
            raise DomainError("sigma is not antisymmetric")
        s = 0.5 * (s - s.T)
        norm = np.linalg.norm(s, 2)
        if norm == 0 or abs(np.linalg.det(s)) <= 1e-14 * norm ** s.shape[0]:
            raise DomainError("sigma is singular")
        inv = np.linalg.inv(s)
        inv = 0.5 * (inv - inv.T)
        s.setflags(write=False)
        inv.setflags(write=False)
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "sigma_inv", inv)

    @property
    def dim(self):
        return self.sigma.shape[0]

    @classmethod
    def from_inverse(cls, sigma_inv):
        return cls(np.linalg.inv(np.asarray(sigma_inv, dtype=float)))


@dataclass(frozen=True, eq=False)
class ComplexStructure:
    """Linear map ``I`` with ``I^2 = -1``."""

    i_matrix: np.ndarray

    def __post_init__(self):
        i = _as_square(self.i_matrix, "complex structure")
        if np.max(np.abs(i @ i + np.eye(i.shape[0]))) > ORTHO_TOL * max(1.0, np.max(np.abs(i)) ** 2):
            raise DomainError("I^2 != -1")
        i.setflags(write=False)
        object.__setattr__(self, "i_matrix", i)


@dataclass(frozen=True, eq=False)
class OrthogonalMap:
    """Element ``Lambda`` of ``O(R^D, G)``, i.e. ``Lambda^T G Lambda = G``."""

    lam: np.ndarray
    metric: Metric

    def __post_init__(self):
        lam = _as_square(self.lam, "lambda")
        if lam.shape != self.metric.g.shape:
            raise DimensionError("lambda and metric dimensions differ")
        g = self.metric.g
        res = np.max(np.abs(lam.T @ g @ lam - g))
        if res > ORTHO_TOL * max(1.0, np.max(np.abs(g))):
            raise DomainError(f"map does not preserve the metric (residual {res:.3e})")
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)

    @property
    def inverse(self):
        # Lambda^{-1} = G^{-1} Lambda^T G for G-orthogonal maps
        return self.metric.g_inv @ self.lam.T @ self.metric.g

    def compose(self, other):
        return OrthogonalMap(self.lam @ other.lam, self.metric)

    @classmethod
    def identity(cls, metric):
        return cls(np.eye(metric.dim), metric)


def standard_structures(dim):
    """Identity metric and block-diagonal ``Sigma_st`` with blocks ``[[0,-1],[1,0]]``."""
    dim = _check_even(dim)
    sigma = np.kron(np.eye(dim // 2), _SIGMA2)
    return Metric(np.eye(dim)), SymplecticStructure(sigma)


def _check_pair(sigma, g):
    if sigma.dim != g.dim:
        raise DimensionError(f"sigma is {sigma.dim}-dimensional, metric is {g.dim}-dimensional")


def j_matrix(sigma, g):
    """``J = -G^{-1/2} Sigma G^{-1/2}``; orthogonal exactly when Sigma is adapted."""
    _check_pair(sigma, g)
    return -g.g_inv_sqrt @ sigma.sigma @ g.g_inv_sqrt


def adaptedness_residual(sigma, g):
    j = j_matrix(sigma, g)
    return float(np.max(np.abs(j.T @ j - np.eye(g.dim))))


def is_adapted(sigma, g):
    """Return ``(adapted, witness)``; ``witness`` is the complex structure or None."""
    if adaptedness_residual(sigma, g) > ADAPTED_TOL:
        return False, None
    j = j_matrix(sigma, g)
    i = g.g_inv_sqrt @ j @ g.g_sqrt
    return True, ComplexStructure(i)


def decompose_adapted(sigma, g):
    """Standard-orthogonal ``R`` with ``Sigma = G^{1/2} R^T Sigma_st R G^{1/2}``.

    ``J`` is brought to real Schur form ``J = Z T Z^T``.  For a normal matrix
    with spectrum ``{+i, -i}`` the quasi-triangular factor is block diagonal
    with blocks ``-eps_a * sigma``; rows of ``S = Z^T`` give the canonical
    basis, and ``S_0`` flips the blocks with ``eps_a = -1`` using ``rho``.

    Raises:
        PreconditionError: ``sigma`` is not adapted to ``g``.
        NumericalError: the Schur factor is not cleanly 2x2 block diagonal.
    """
    res = adaptedness_residual(sigma, g)
    if res > ADAPTED_TOL:
        raise PreconditionError(f"sigma is not adapted to G (|J^T J - 1| = {res:.3e})")
    dim = g.dim
    j = j_matrix(sigma, g)
    t, z = schur(j, output="real")
    s = z.T
    blocks = -s @ j @ s.T
    eps = np.empty(dim // 2)
    ideal = np.zeros_like(blocks)
    for a in range(dim // 2):
        lo = 2 * a
        eps[a] = 1.0 if blocks[lo + 1, lo] > 0 else -1.0
        ideal[lo:lo + 2, lo:lo + 2] = eps[a] * _SIGMA2
    bad = float(np.max(np.abs(blocks - ideal)))
    if bad > 1e-8:
        raise NumericalError(f"canonical block structure not found (residual {bad:.3e})", residual=bad)
    s0 = np.zeros((dim, dim))
    for a, e in enumerate(eps):
        s0[2 * a:2 * a + 2, 2 * a:2 * a + 2] = np.eye(2) if e > 0 else _RHO
    r = s0 @ s
    return OrthogonalMap(r, Metric.identity(dim))


def round_trip_residual(sigma, g, r):
    """``max|Sigma - G^{1/2} R^T Sigma_st R G^{1/2}|``."""
    _, st = standard_structures(g.dim)
    lam = r.lam if isinstance(r, OrthogonalMap) else np.asarray(r)
    rebuilt = g.g_sqrt @ lam.T @ st.sigma @ lam @ g.g_sqrt
    return float(np.max(np.abs(sigma.sigma - rebuilt)))


def orthogonal_action(lam, sigma):
    """Left action ``(Lambda^{-1})^T Sigma Lambda^{-1}``."""
    if lam.metric.dim != sigma.dim:
        raise DimensionError("map and symplectic structure dimensions differ")
    inv = lam.inverse
    return SymplecticStructure(inv.T @ sigma.sigma @ inv)


def random_orthogonal(g, seed):
    """Seeded ``Lambda = G^{-1/2} Q G^{1/2}`` with ``Q`` Haar-distributed in O(D)."""
    rng = np.random.default_rng(seed)
    q = haar_orthogonal(g.dim, rng)
    return OrthogonalMap(g.g_inv_sqrt @ q @ g.g_sqrt, g)


def haar_orthogonal(dim, rng):
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def symmetry_group_check(lam, sigma, tol=ADAPTED_TOL):
    """True iff ``Lambda`` preserves Sigma too (isotropy group of Sigma)."""
    res = np.max(np.abs(lam.lam.T @ sigma.sigma @ lam.lam - sigma.sigma))
    return bool(res <= tol * max(1.0, np.max(np.abs(sigma.sigma))))


def r_lambda(r, g, lam):
    """``R_Lambda = R G^{-1/2} Lambda^T G^{1/2}``, standard-orthogonal for Lambda in O(G)."""
    return r.lam @ g.g_inv_sqrt @ lam.lam.T @ g.g_sqrt


def random_metric(dim, rng, spread=1.0):
    """Random SPD metric with eigenvalues in ``exp([-spread, spread])``."""
    q = haar_orthogonal(dim, rng)
    w = np.exp(rng.uniform(-spread, spread, size=dim))
    m = (q * w) @ q.T
    return Metric(0.5 * (m + m.T))


def random_adapted_pair(dim, seed, spread=1.0):
    """Seeded ``(G, Sigma)`` with ``Sigma = G^{1/2} R^T Sigma_st R G^{1/2}``."""
    rng = np.random.default_rng(seed)
    g = random_metric(dim, rng, spread)
    r = haar_orthogonal(dim, rng)
    _, st = standard_structures(dim)
    return g, SymplecticStructure(g.g_sqrt @ r.T @ st.sigma @ r @ g.g_sqrt)


def random_adapted_sigma(g, seed):
    """Seeded structure adapted to a given metric: ``G^{1/2} R^T Sigma_st R G^{1/2}``."""
    r = haar_orthogonal(g.dim, np.random.default_rng(seed))
    _, st = standard_structures(g.dim)
    return SymplecticStructure(g.g_sqrt @ r.T @ st.sigma @ r @ g.g_sqrt)
