"""Regularised Feynman amplitudes of the quartic model and their symmetry checks.

Each vertex is used in its delta-constraint form: the four corners obey
``x1 - x2 + x3 - x4 = 0`` and carry the phase
``exp(-i sum_{i<j} (-1)^{i+j+1} x_i ^ x_j)``.  Per vertex the integrated corner
of highest cyclic index is eliminated through the constraint; all remaining
corner positions enter one complex quadratic form whose real part comes from
the Mehler kernels and imaginary part from the vertex phases.  Internal
corners are then integrated exactly and the Schwinger parameters by adaptive
quadrature.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .action import transform_field
from .errors import ConstraintError, DimensionError, PreconditionError
from .gaussian import (
    GaussianFunction,
    QuadraticIntegrand,
    gaussian_integral,
    gaussian_integral_batch,
    partial_gaussian_integral,
)
from .propagator import MehlerKernel
from .quadrature import gauss_kronrod, graded_edges, semi_infinite_map
from .symplectic import Metric, decompose_adapted, standard_structures

MAX_LINES = 3
CONSTRAINT_TOL = 1e-9


def _sign(i, j):
    # (-1)^{i+j+1} is invariant under shifting both corner labels by one
    return -1.0 if (i + j) % 2 == 0 else 1.0


def _alt(i):
    return 1.0 if i % 2 == 0 else -1.0


@dataclass(frozen=True)
class FeynmanGraph:
    """Graph with ``n`` quartic vertices; slots are ``(vertex, corner)`` pairs, 0-based."""

    n: int
    lines: tuple
    external: tuple

    def __post_init__(self):
        lines = tuple(tuple(tuple(int(c) for c in slot) for slot in line) for line in self.lines)
        external = tuple(tuple(int(c) for c in slot) for slot in self.external)
        object.__setattr__(self, "lines", lines)
        object.__setattr__(self, "external", external)
        seen = []
        for line in lines:
            if len(line) != 2 or line[0] == line[1]:
                raise ValueError(f"line {line} must join two distinct corners")
            seen.extend(line)
        seen.extend(external)
        for v, i in seen:
            if not (0 <= v < self.n and 0 <= i < 4):
                raise ValueError(f"corner slot {(v, i)} out of range")
        if len(set(seen)) != len(seen) or len(seen) != 4 * self.n:
            raise ValueError("every corner slot must be used exactly once by a line or an external leg")
        if self.N % 2:
            raise ValueError("number of external legs must be even")

    @property
    def N(self):
        return len(self.external)

    @property
    def n_lines(self):
        return len(self.lines)

    @property
    def internal(self):
        return tuple(sorted(s for line in self.lines for s in line))

    @classmethod
    def from_dict(cls, data):
        return cls(data["n"], data.get("lines", []), data.get("external", []))

    @classmethod
    def load(cls, path):
        """Read a graph file; returns ``(graph, positions or None)``."""
        data = json.loads(Path(path).read_text())
        pos = data.get("positions")
        return cls.from_dict(data), (None if pos is None else np.asarray(pos, dtype=float))

    def to_dict(self):
        return {"n": self.n, "lines": [list(map(list, l)) for l in self.lines],
                "external": [list(s) for s in self.external]}

    @classmethod
    def tree_vertex(cls):
        return cls(1, (), ((0, 0), (0, 1), (0, 2), (0, 3)))

    @classmethod
    def planar_tadpole(cls):
        return cls(1, (((0, 1), (0, 2)),), ((0, 0), (0, 3)))

    @classmethod
    def nonplanar_tadpole(cls):
        return cls(1, (((0, 1), (0, 3)),), ((0, 0), (0, 2)))

    @classmethod
    def sunset(cls):
        """Two vertices joined by two lines, four external legs."""
        return cls(2, (((0, 2), (1, 1)), ((0, 3), (1, 0))), ((0, 0), (0, 1), (1, 2), (1, 3)))


@dataclass(frozen=True, eq=False)
class CornerLayout:
    """Linear parametrisation of every corner by the free corner positions.

    ``coeff[slot]`` is a vector over free corners (free integrated ones
    first, then fixed ones); ``constraints`` collects the alternating sums of
    vertices that have no integrated corner.
    """

    free: tuple
    n_integrated: int
    coeff: dict
    constraints: tuple
    eliminated: tuple

    @classmethod
    def build(cls, graph, integrated, fixed_order, pick=max):
        """``pick`` chooses the eliminated corner among a vertex's integrated ones."""
        integrated = set(integrated)
        eliminated = {}
        for v in range(graph.n):
            cands = [i for i in range(4) if (v, i) in integrated]
            if cands:
                eliminated[v] = pick(cands)
        free_int = [s for s in sorted(integrated) if eliminated.get(s[0]) != s[1]]
        free = tuple(free_int) + tuple(fixed_order)
        index = {s: k for k, s in enumerate(free)}
        nf = len(free)
        coeff = {}
        for s, k in index.items():
            vec = np.zeros(nf)
            vec[k] = 1.0
            coeff[s] = vec
        for v, k in eliminated.items():
            vec = np.zeros(nf)
            for i in range(4):
                if i != k:
                    vec -= _alt(k) * _alt(i) * coeff[(v, i)]
            coeff[(v, k)] = vec
        constraints = tuple(
            sum(_alt(i) * coeff[(v, i)] for i in range(4)) for v in range(graph.n) if v not in eliminated
        )
        return cls(free, len(free_int), coeff, constraints, tuple(sorted(eliminated.items())))


@dataclass(frozen=True, eq=False)
class _Assembly:
    """Pieces of ``Q(alpha) = q_const + sum_l cm(alpha_l) kd_l + cp(alpha_l) ks_l``."""

    layout: CornerLayout
    dim: int
    q_const: np.ndarray
    kd: tuple
    ks: tuple
    kernel: MehlerKernel
    log_pref: complex


def _assemble(graph, params, integrated, fixed_order, pick=max):
    d = params.dim
    layout = CornerLayout.build(graph, integrated, fixed_order, pick)
    nf = len(layout.free)
    g = params.metric.g
    wedge = params.moyal().wedge
    t = layout.coeff
    q = np.zeros((nf * d, nf * d), dtype=complex)
    for v in range(graph.n):
        for i in range(4):
            for j in range(i + 1, 4):
                ti, tj = t[(v, i)], t[(v, j)]
                q += 1j * _sign(i, j) * (np.kron(np.outer(ti, tj), wedge) + np.kron(np.outer(tj, ti), wedge.T))
    kd, ks = [], []
    for a, b in graph.lines:
        dv, sv = t[a] - t[b], t[a] + t[b]
        kd.append(2 * np.kron(np.outer(dv, dv), g))
        ks.append(2 * np.kron(np.outer(sv, sv), g))
    kernel = MehlerKernel.from_params(params)
    vertex_norm = params.metric.det / (np.pi * params.theta) ** d
    log_pref = graph.n_lines * np.log(kernel.prefactor) + graph.n * np.log(vertex_norm)
    return _Assembly(layout, d, q, tuple(kd), tuple(ks), kernel, log_pref)


def _check_model(params, graph):
    if not params.adapted:
        raise PreconditionError("Feynman amplitudes need a symplectic structure adapted to G")
    if graph.n_lines > MAX_LINES:
        raise PreconditionError(f"at most {MAX_LINES} internal lines are supported, got {graph.n_lines}")


def _externals(graph, params, externals):
    e = np.asarray(externals, dtype=float).reshape(-1, params.dim) if graph.N else np.zeros((0, params.dim))
    if e.shape[0] != graph.N:
        raise DimensionError(f"graph has {graph.N} external legs, got {e.shape[0]} positions")
    return e


def _check_constraints(asm, e):
    nint = asm.layout.n_integrated
    for c in asm.layout.constraints:
        val = c[nint:] @ e
        scale = max(1.0, float(np.max(np.abs(e))) if e.size else 1.0)
        if np.max(np.abs(val)) > CONSTRAINT_TOL * scale:
            raise ConstraintError(f"external positions violate a vertex constraint (residual {val})")


def _q_of(asm, alphas):
    """Stack of full quadratic forms for per-line alpha arrays of equal length."""
    alphas = np.atleast_2d(alphas)
    q = np.broadcast_to(asm.q_const, (alphas.shape[1],) + asm.q_const.shape).copy()
    for l, (kd, ks) in enumerate(zip(asm.kd, asm.ks)):
        cm, cp = asm.kernel.line_forms(alphas[l])
        q += cm[:, None, None] * kd + cp[:, None, None] * ks
    return q


def _weights(asm, alphas):
    alphas = np.atleast_2d(alphas)
    w = np.ones(alphas.shape[1])
    for row in alphas:
        w = w * asm.kernel.alpha_weight(row)
    return w


def assemble_integrand(graph, params, externals, alphas):
    """Internal-corner integrand at fixed Schwinger parameters.

    Returns a :class:`QuadraticIntegrand` over the free internal corner
    coordinates; external positions sit in its linear term and prefactor.
    The prefactor carries all line and vertex normalisations but not the
    ``sinh`` / mass weights of the Schwinger parameters.
    """
    _check_model(params, graph)
    e = _externals(graph, params, externals)
    asm = _assemble(graph, params, graph.internal, graph.external)
    _check_constraints(asm, e)
    alphas = np.asarray(alphas, dtype=float).reshape(graph.n_lines, 1)
    q = _q_of(asm, alphas)[0]
    k = asm.layout.n_integrated * asm.dim
    ev = e.reshape(-1)
    quu, que, qee = q[:k, :k], q[:k, k:], q[k:, k:]
    return QuadraticIntegrand(quu, -que @ ev, np.exp(asm.log_pref - 0.5 * ev @ qee @ ev))


@dataclass(frozen=True)
class _Reduced:
    """Integrand data projected onto fixed externals.

    ``Q`` is affine in the per-line coefficients ``(c_minus, c_plus)``, so with
    the externals fixed each of its internal block, linear term and external
    quadratic form is a combination of ``1 + 2L`` precomputed pieces.
    """

    quu: np.ndarray
    lin: np.ndarray
    qee: np.ndarray

    @classmethod
    def build(cls, asm, ev, k):
        basis = [asm.q_const] + [m for pair in zip(asm.kd, asm.ks) for m in pair]
        basis = np.asarray(basis, dtype=complex)
        quu = basis[:, :k, :k]
        lin = -basis[:, :k, k:] @ ev
        qee = np.einsum("i,bij,j->b", ev, basis[:, k:, k:], ev)
        return cls(quu, lin, qee)

    def coefficients(self, asm, alphas):
        alphas = np.atleast_2d(alphas)
        cols = [np.ones(alphas.shape[1])]
        for row in alphas:
            cm, cp = asm.kernel.line_forms(row)
            cols += [cm, cp]
        return np.stack(cols, axis=1)


def _integrand_values(asm, alphas, ev, k, red=None):
    red = _Reduced.build(asm, ev, k) if red is None else red
    c = red.coefficients(asm, alphas)
    quu = np.tensordot(c, red.quu, axes=(1, 0))
    lin = c @ red.lin
    pref = np.exp(asm.log_pref - 0.5 * (c @ red.qee))
    # Re Q_uu >= Omega~ tanh(alpha/2) sum_c t_c t_c^T (x) G on free corners: no PD check needed
    return _weights(asm, alphas) * gaussian_integral_batch(quu, lin, pref, check=False)


def _nested_alpha_integral(f, n_lines, eps, tol):
    """``∫_{[eps, inf)^L} f(alpha) d^L alpha`` with nested adaptive panels.

    ``f`` maps an ``(L, m)`` array of Schwinger parameters to ``m`` values.
    Each level integrates a vector-valued function whose components are the
    inner integrals at all nodes of the enclosing panel, so one inner
    quadrature serves a whole outer panel.  Inner error estimates are
    integrated alongside the values; the returned ``abs_error`` bounds the
    whole nest.
    """
    alpha, jac = semi_infinite_map(eps)
    top = np.nextafter(1.0, 0.0)
    edges = graded_edges(eps)

    def level(prefix, depth):
        m = prefix.shape[1]
        last = depth == n_lines - 1

        def g(u):
            u = np.minimum(u, top)
            n = u.size
            # column i*m + c pairs node i with prefix column c
            cols = np.vstack([np.tile(prefix, (1, n)), np.repeat(alpha(u), m)[None, :]])
            if last:
                vals, errs = f(cols), np.zeros(n * m)
            else:
                vals, errs = level(cols, depth + 1)
            j = jac(u)[:, None]
            return np.hstack([vals.reshape(n, m) * j, errs.reshape(n, m) * j])

        res = gauss_kronrod(g, 0.0, 1.0, epsrel=tol if depth == 0 else 0.1 * tol, error_columns=m, edges=edges)
        return res.value[:m], res.abs_error + np.abs(res.value[m:])

    val, err = level(np.zeros((0, 1)), 0)
    return complex(val[0]), float(err[0])


@dataclass(frozen=True)
class AmplitudeResult:
    value: complex
    abs_error: float
    n: int
    N: int
    epsilon: float
    det_g_factor: float
    n_delta: int = 0
    meta: dict = field(default_factory=dict)


def amplitude(graph, params, externals, cutoff):
    """Regularised amputated amplitude at fixed external corner positions.

    For vertices whose four corners are all external the amplitude contains
    ``delta(x1 - x2 + x3 - x4)``; the returned value is the coefficient of
    that delta (``n_delta`` counts them) and the externals must satisfy it.
    """
    _check_model(params, graph)
    e = _externals(graph, params, externals)
    asm = _assemble(graph, params, graph.internal, graph.external)
    _check_constraints(asm, e)
    k = asm.layout.n_integrated * asm.dim
    ev = e.reshape(-1)
    det_factor = params.metric.det ** (0.5 * (graph.n + graph.N / 2))
    common = dict(n=graph.n, N=graph.N, epsilon=cutoff.epsilon, det_g_factor=det_factor,
                  n_delta=len(asm.layout.constraints))
    if graph.n_lines == 0:
        val = _integrand_values(asm, np.zeros((0, 1)), ev, k)[0]
        return AmplitudeResult(complex(val), 0.0, **common)

    red = _Reduced.build(asm, ev, k)

    def f(alphas):
        return _integrand_values(asm, alphas, ev, k, red)

    val, err = _nested_alpha_integral(f, graph.n_lines, cutoff.epsilon, cutoff.tol)
    return AmplitudeResult(val, err, **common)


def alpha_scan(graph, params, externals, grid):
    """Rows ``(alpha_1..alpha_L, re, im)`` of the weighted integrand on a tensor grid."""
    _check_model(params, graph)
    e = _externals(graph, params, externals)
    asm = _assemble(graph, params, graph.internal, graph.external)
    _check_constraints(asm, e)
    k = asm.layout.n_integrated * asm.dim
    grid = np.asarray(grid, dtype=float)
    mesh = np.array(np.meshgrid(*([grid] * graph.n_lines), indexing="ij")).reshape(graph.n_lines, -1)
    vals = _integrand_values(asm, mesh, e.reshape(-1), k)
    return np.column_stack([mesh.T, vals.real, vals.imag])


def standard_model(params):
    g, st = standard_structures(params.dim)
    return type(params)(g, st, params.theta, params.omega, params.mass2, params.coupling)


def check_covariance(graph, params, externals, cutoff):
    """Relative residual of ``A^{G,Sigma}(x) = det(G)^{(n+N/2)/2} A^st(R G^{1/2} x)``.

    Coefficients of stripped vertex deltas pick up an extra ``det(G)^{-1/2}``
    each, the Jacobian of ``delta(R G^{1/2} c) = det(G)^{-1/2} delta(c)``.
    """
    _check_model(params, graph)
    e = _externals(graph, params, externals)
    r = decompose_adapted(params.sigma, params.metric)
    lhs = amplitude(graph, params, e, cutoff)
    mapped = e @ (r.lam @ params.metric.g_sqrt).T
    rhs = amplitude(graph, standard_model(params), mapped, cutoff)
    factor = lhs.det_g_factor * params.metric.det ** (-0.5 * lhs.n_delta)
    return abs(lhs.value - factor * rhs.value) / abs(lhs.value)


def check_orthogonal_invariance(graph, params, externals, lam, cutoff):
    """Relative residual of ``A^{G, Lam Sigma^-1 Lam^T}(Lam x) = A^{G,Sigma^-1}(x)``."""
    _check_model(params, graph)
    e = _externals(graph, params, externals)
    base = amplitude(graph, params, e, cutoff)
    moved = amplitude(graph, params.rotated(lam), e @ lam.lam.T, cutoff)
    return abs(moved.value - base.value) / abs(base.value)


def effective_action_term(graphs, params, field_, cutoff):
    """``sum_G w_G ∫ A_G(x_1..x_N) phi(x_1)...phi(x_N)`` over a finite graph list.

    ``graphs`` is a sequence of ``(graph, weight)`` pairs.  The external
    integrals are done together with the internal ones at each Schwinger
    point, so only the alpha integral is numerical.
    """
    total = 0j
    for graph, weight in graphs:
        _check_model(params, graph)
        total += weight * _effective_single(graph, params, field_.phi, cutoff)
    return total


def check_effective_invariance(graphs, params, field_, lam, cutoff):
    """Relative residual of the effective action under ``(Sigma, phi) -> (Lam.Sigma, phi^Lam)``."""
    base = effective_action_term(graphs, params, field_, cutoff)
    moved = effective_action_term(graphs, params.rotated(lam), transform_field(lam, field_), cutoff)
    return abs(moved - base) / abs(base)


def _effective_integrand(graph, params, phi):
    """``alpha -> sum over all corners`` of the weighted integrand with ``phi`` on the externals."""
    d = params.dim
    slots = [(v, i) for v in range(graph.n) for i in range(4)]
    asm = _assemble(graph, params, slots, ())
    t = asm.layout.coeff
    extra_q = np.zeros_like(asm.q_const)
    lin = np.zeros(asm.q_const.shape[0], dtype=complex)
    for s in graph.external:
        extra_q += 2 * np.kron(np.outer(t[s], t[s]), phi.quad)
        lin += np.kron(t[s], phi.lin)
    asm = _Assembly(asm.layout, d, asm.q_const + extra_q, asm.kd, asm.ks, asm.kernel,
                    asm.log_pref + graph.N * np.log(phi.coeff))

    def f(alphas):
        q = _q_of(asm, alphas)
        return _weights(asm, alphas) * gaussian_integral_batch(q, np.broadcast_to(lin, q.shape[:-1]), np.exp(asm.log_pref))

    return f


def _effective_single(graph, params, phi, cutoff):
    f = _effective_integrand(graph, params, phi)
    if graph.n_lines == 0:
        return complex(f(np.zeros((0, 1)))[0])
    val, _ = _nested_alpha_integral(f, graph.n_lines, cutoff.epsilon, cutoff.tol)
    return val


def vertex_factor(ctx, x1, x2, x3, x4, p):
    """Hypermomentum vertex phase ``V(x1, x2, x3, x4, p)``."""
    xs = [np.asarray(x, dtype=float) for x in (x1, x2, x3, x4)]
    p = np.asarray(p, dtype=float)
    phase = 0.0
    for i in range(4):
        for j in range(i + 1, 4):
            phase = phase + _sign(i, j) * ctx.wedge_product(xs[i], xs[j])
        phase = phase + _alt(i) * ctx.wedge_product(p, xs[i])
    return np.exp(-1j * phase)


def _corner_phase_matrix(ctx, n_corners=4):
    """``Q`` (half convention) of the pairwise vertex phase over stacked corners."""
    d = ctx.dim
    q = np.zeros((n_corners * d, n_corners * d), dtype=complex)
    for i in range(4):
        for j in range(i + 1, 4):
            bi, bj = slice(i * d, (i + 1) * d), slice(j * d, (j + 1) * d)
            q[bi, bj] += 1j * _sign(i, j) * ctx.wedge
            q[bj, bi] += 1j * _sign(i, j) * ctx.wedge.T
    return q


def _smeared_product(fs):
    """``prod_i f_i(x_i)`` as one Gaussian over stacked corners."""
    d = fs[0].dim
    n = len(fs)
    quad = np.zeros((n * d, n * d), dtype=complex)
    lin = np.zeros(n * d, dtype=complex)
    coeff = 1.0 + 0j
    for i, f in enumerate(fs):
        quad[i * d:(i + 1) * d, i * d:(i + 1) * d] = f.quad
        lin[i * d:(i + 1) * d] = f.lin
        coeff *= f.coeff
    return GaussianFunction(coeff, quad, lin)


def smeared_vertex_hypermomentum(ctx, fs):
    """``∫ prod f_i(x_i) (det G / (pi theta)^D) ∫ dp V(x, p)`` in closed form.

    The corner integrals are done first (their real part is positive
    definite); the hypermomentum integral converges afterwards.
    """
    d = ctx.dim
    base = _smeared_product(fs).to_integrand()
    n = 5 * d
    q = np.zeros((n, n), dtype=complex)
    q[:4 * d, :4 * d] = base.q + _corner_phase_matrix(ctx)
    p = slice(4 * d, 5 * d)
    for i in range(4):
        bi = slice(i * d, (i + 1) * d)
        q[p, bi] += 1j * _alt(i) * ctx.wedge
        q[bi, p] += 1j * _alt(i) * ctx.wedge.T
    lin = np.concatenate([base.lin, np.zeros(d)])
    norm = ctx.metric.det / (np.pi * ctx.theta) ** d
    joint = QuadraticIntegrand(q, lin, base.prefactor * norm)
    return gaussian_integral(partial_gaussian_integral(joint, range(4 * d)))


def smeared_vertex_delta(ctx, fs):
    """``∫ prod f_i(x_i) delta(x1 - x2 + x3 - x4) phase`` with ``x4`` eliminated."""
    d = ctx.dim
    eye = np.eye(d)
    # corners 1..3 free, corner 4 = x1 - x2 + x3
    embed = np.zeros((4 * d, 3 * d))
    for i in range(3):
        embed[i * d:(i + 1) * d, i * d:(i + 1) * d] = eye
    embed[3 * d:, :] = np.hstack([eye, -eye, eye])
    prod = _smeared_product(fs).substitute(embed)
    qi = prod.to_integrand()
    q = qi.q + embed.T @ _corner_phase_matrix(ctx) @ embed
    return gaussian_integral(QuadraticIntegrand(q, qi.lin, qi.prefactor))


def quartic_via_vertex(ctx, phi):
    """``∫ phi*phi*phi*phi`` from the delta-constraint vertex representation."""
    norm = ctx.metric.det / (np.pi * ctx.theta) ** ctx.dim
    return norm * smeared_vertex_delta(ctx, [phi] * 4)
