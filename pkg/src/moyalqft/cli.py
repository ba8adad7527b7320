"""Batch command line: ``moyalqft {adapt,verify,amplitude,propagator,action}``.

Records go to stdout as JSON lines, a short human summary to stderr.
Exit codes: 0 success, 1 check failed or structure not adapted, 2 invalid
input or unmet precondition, 3 quadrature failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .action import FieldConfig, ModelParams, action_terms, check_classical_invariance
from .errors import MoyalError, PreconditionError, QuadratureError
from .feynman import (
    FeynmanGraph,
    alpha_scan,
    amplitude,
    check_covariance,
    check_effective_invariance,
    check_orthogonal_invariance,
)
from .gaussian import GaussianFunction, random_gaussian
from .moyal import (
    MoyalContext,
    check_associativity,
    check_derivation_relations,
    check_tracial,
    commutator,
)
from .polynomial import PolynomialFunction, random_polynomial
from .propagator import (
    CutoffSpec,
    MehlerKernel,
    check_g_scaling,
    check_green_property,
    operator_without_harmonic,
    propagator_value,
)
from .symplectic import (
    ADAPTED_TOL,
    Metric,
    SymplecticStructure,
    decompose_adapted,
    is_adapted,
    random_adapted_sigma,
    random_orthogonal,
    round_trip_residual,
    standard_structures,
)

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_QUADRATURE = 0, 1, 2, 3

DEFAULTS = {
    "dimension": 2,
    "theta": 0.5,
    "omega": 1.0,
    "mass2": 0.5,
    "lambda": 0.0,
    "metric": None,
    "sigma": "standard",
    "epsilon": 0.2,
    "tol": 1e-8,
    "seed": 0,
    "graph": None,
    "positions": None,
    "x": None,
    "y": None,
    "field": None,
    "samples": 5,
}

SUITES = ("star", "action", "propagator", "covariance", "invariance")
GREEN_EPS = (0.4, 0.2, 0.1, 0.05)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RunConfig:
    raw: dict
    metric: Metric
    sigma: SymplecticStructure

    @property
    def dim(self):
        return self.metric.dim

    @property
    def digest(self):
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def __getitem__(self, key):
        return self.raw[key]

    def params(self, require_adapted=False):
        return ModelParams(
            self.metric, self.sigma, float(self["theta"]), float(self["omega"]),
            float(self["mass2"]), float(self["lambda"]), require_adapted,
        )

    def cutoff(self, epsilon=None):
        return CutoffSpec(float(self["epsilon"] if epsilon is None else epsilon), tol=float(self["tol"]))

    def field(self):
        spec = self["field"] or {}
        quad = np.asarray(spec.get("quad", 0.5 * np.eye(self.dim)), dtype=float)
        lin = np.asarray(spec.get("lin", np.zeros(self.dim)), dtype=float)
        return FieldConfig(GaussianFunction(float(spec.get("coeff", 1.0)), quad, lin))

    def point(self, key):
        val = self[key]
        return np.zeros(self.dim) if val is None else _vector(val, self.dim, key)


def _vector(val, dim, name):
    v = np.asarray(val, dtype=float)
    if v.shape != (dim,):
        raise ConfigError(f"{name} must have length {dim}")
    return v


def _seeded_token(value, prefix):
    if isinstance(value, str) and value.startswith(prefix + ":"):
        try:
            return int(value.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad seed in {value!r}") from exc
    return None


def build_config(args):
    raw = dict(DEFAULTS)
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        raw.update(loaded)
    for key in ("theta", "omega", "epsilon", "seed", "tol"):
        val = getattr(args, key, None)
        if val is not None:
            raw[key] = val
    if getattr(args, "graph", None):
        raw["graph"] = args.graph

    if raw["metric"] is None:
        metric = Metric.identity(int(raw["dimension"]))
    else:
        metric = Metric(np.asarray(raw["metric"], dtype=float))
    raw["dimension"] = metric.dim
    seed = _seeded_token(raw["sigma"], "adapted-random")
    if raw["sigma"] == "standard":
        sigma = standard_structures(metric.dim)[1]
    elif seed is not None:
        sigma = random_adapted_sigma(metric, seed)
    else:
        sigma = SymplecticStructure(np.asarray(raw["sigma"], dtype=float))
    if sigma.dim != metric.dim:
        raise ConfigError("metric and sigma dimensions differ")
    return RunConfig(raw, metric, sigma)


class Reporter:
    """Collects records; writes each one as a JSON line as soon as it exists."""

    def __init__(self, cfg, out=None):
        self.cfg = cfg
        self.out = out
        self.records = []

    def emit(self, **fields):
        rec = {"params_digest": self.cfg.digest, **fields}
        self.records.append(rec)
        (self.out or sys.stdout).write(json.dumps(_plain(rec), sort_keys=True) + "\n")
        return rec

    def check(self, name, residual, tolerance, above=False):
        residual = float(residual)
        ok = bool(np.isfinite(residual) and (residual > tolerance if above else residual < tolerance))
        return self.emit(check=name, residual=residual, tolerance=tolerance,
                         comparison=">" if above else "<", **{"pass": ok})


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def _say(msg):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------- commands


def cmd_adapt(cfg, args, rep):
    ok, witness = is_adapted(cfg.sigma, cfg.metric)
    if not ok:
        rep.emit(check="adapted", adapted=False, witness=None, R=None, residual=None, tolerance=ADAPTED_TOL,
                 **{"pass": False})
        _say("adapted: false")
        return EXIT_FAIL
    r = decompose_adapted(cfg.sigma, cfg.metric)
    res = round_trip_residual(cfg.sigma, cfg.metric, r)
    rep.emit(check="adapted", adapted=True, witness=witness.i_matrix, R=r.lam, residual=res,
             tolerance=ADAPTED_TOL, **{"pass": res < ADAPTED_TOL})
    _say(f"adapted: true, round-trip residual {res:.2e}")
    return EXIT_OK if res < ADAPTED_TOL else EXIT_FAIL


def _suite_star(cfg, rep):
    ctx = MoyalContext(cfg.metric, cfg.sigma, float(cfg["theta"]))
    rng = np.random.default_rng(int(cfg["seed"]))
    d = cfg.dim
    tracial = assoc = triple = 0.0
    for _ in range(int(cfg["samples"])):
        a, b, c = (random_gaussian(d, rng, complex_lin=True) for _ in range(3))
        tracial = max(tracial, check_tracial(ctx, a, b))
        it, tr = check_associativity(ctx, a, b, c)
        assoc, triple = max(assoc, it), max(triple, tr)
    rep.check("star.tracial", tracial, 1e-8)
    rep.check("star.associativity", assoc, 1e-9)
    rep.check("star.triple_formula", triple, 1e-9)
    comm = 0.0
    for mu in range(d):
        for nu in range(d):
            xm, xn = PolynomialFunction.coordinate(d, mu), PolynomialFunction.coordinate(d, nu)
            diff = commutator(ctx, xm, xn) - PolynomialFunction.constant(d, 1j * ctx.poisson[mu, nu])
            comm = max(comm, diff.max_abs_coeff())
    rep.check("star.coordinate_commutator", comm, 1e-12)
    rep.check("star.sign_calibration", ctx.calibration_residual, 1e-3 * max(1.0, np.max(np.abs(ctx.poisson))))
    poly = random_polynomial(d, 3, rng)
    rep.check("star.derivation_relations", max(check_derivation_relations(ctx, poly)), 1e-9)


def _suite_action(cfg, rep):
    params = cfg.params(require_adapted=False)
    rng = np.random.default_rng(int(cfg["seed"]))
    worst = check_classical_invariance(params, cfg.field(), random_orthogonal(cfg.metric, int(cfg["seed"])))
    for i in range(int(cfg["samples"]) - 1):
        field_ = FieldConfig(random_gaussian(cfg.dim, rng))
        lam = random_orthogonal(cfg.metric, int(cfg["seed"]) + 1 + i)
        worst = max(worst, check_classical_invariance(params, field_, lam))
    rep.check("action.classical_invariance", worst, 1e-8)


def _suite_propagator(cfg, rep):
    params = cfg.params(require_adapted=False)
    k = MehlerKernel.from_params(params)
    x = cfg.point("x") if cfg["x"] is not None else np.full(cfg.dim, 0.5)
    y = cfg.point("y")
    rep.check("propagator.g_scaling", check_g_scaling(k, cfg.cutoff(), x, y), 1e-10)
    f = GaussianFunction.isotropic(cfg.dim)
    x0 = np.zeros(cfg.dim)
    seq = check_green_property(k, f, x0, GREEN_EPS)
    ratio = max(b / a for a, b in zip(seq[:-1], seq[1:]))
    rep.check("propagator.green_monotone", ratio, 1.0)
    rep.check("propagator.green_final", seq[-1] / abs(f(x0)), 0.05)
    control = check_green_property(k, f, x0, GREEN_EPS[-1:], operator=operator_without_harmonic(k, f))
    rep.check("propagator.negative_control", control[-1] / abs(f(x0)), 0.05, above=True)


def _graph_and_positions(cfg, required):
    if cfg["graph"] is None:
        if required:
            raise ConfigError("this suite needs a graph file (--graph or config 'graph')")
        graph, pos = FeynmanGraph.planar_tadpole(), None
    else:
        graph, pos = FeynmanGraph.load(cfg["graph"])
    if cfg["positions"] is not None:
        pos = np.asarray(cfg["positions"], dtype=float)
    if pos is None:
        rng = np.random.default_rng(int(cfg["seed"]))
        pos = 0.5 * rng.normal(size=(graph.N, cfg.dim))
    return graph, pos


def _suite_covariance(cfg, rep, required=True):
    params = cfg.params()
    if not params.adapted:
        raise PreconditionError("covariance checks need sigma adapted to the metric")
    graph, pos = _graph_and_positions(cfg, required)
    rep.check("covariance.amplitude", check_covariance(graph, params, pos, cfg.cutoff()), 1e-5)


def _suite_invariance(cfg, rep, required=True):
    params = cfg.params()
    if not params.adapted:
        raise PreconditionError("invariance checks need sigma adapted to the metric")
    graph, pos = _graph_and_positions(cfg, required)
    lam = random_orthogonal(cfg.metric, int(cfg["seed"]))
    rep.check("invariance.amplitude", check_orthogonal_invariance(graph, params, pos, lam, cfg.cutoff()), 1e-5)
    eff = check_effective_invariance([(graph, 1.0)], params, cfg.field(), lam, cfg.cutoff())
    rep.check("invariance.effective_action", eff, 1e-5)


def cmd_verify(cfg, args, rep):
    suites = SUITES if args.suite == "all" else (args.suite,)
    runners = {
        "star": _suite_star,
        "action": _suite_action,
        "propagator": _suite_propagator,
        "covariance": lambda c, r: _suite_covariance(c, r, args.suite != "all"),
        "invariance": lambda c, r: _suite_invariance(c, r, args.suite != "all"),
    }
    code = EXIT_OK
    for name in suites:
        try:
            runners[name](cfg, rep)
        except QuadratureError as exc:
            rep.emit(check=name, error="quadrature", message=str(exc), **{"pass": False})
            _say(f"{name}: quadrature failure: {exc}")
            code = EXIT_QUADRATURE
        except PreconditionError as exc:
            rep.emit(check=name, error="precondition", message=str(exc), **{"pass": False})
            _say(f"{name}: refused: {exc}")
            code = max(code, EXIT_INVALID)
    failed = [r["check"] for r in rep.records if not r.get("pass", True)]
    _say(f"{len(rep.records) - len(failed)}/{len(rep.records)} checks passed")
    if code != EXIT_OK:
        return code
    return EXIT_OK if not failed else EXIT_FAIL


def _parse_grid(text):
    """``lo:hi:num`` -> the per-line alpha grid (the scan is its tensor power)."""
    try:
        lo, hi, num = text.split(":")
        grid = np.linspace(float(lo), float(hi), int(num))
    except ValueError as exc:
        raise ConfigError(f"bad alpha grid spec {text!r}; expected lo:hi:num") from exc
    if grid.size == 0 or np.any(grid <= 0):
        raise ConfigError("alpha grid must be non-empty and positive")
    return grid


def cmd_amplitude(cfg, args, rep):
    graph, pos = _graph_and_positions(cfg, required=True)
    params = cfg.params(require_adapted=True)
    if args.alpha_scan:
        if graph.n_lines == 0:
            raise ConfigError("alpha scan needs at least one line")
        rows = alpha_scan(graph, params, pos, _parse_grid(args.alpha_scan))
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow([f"alpha_{i + 1}" for i in range(graph.n_lines)] + ["re", "im"])
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
        _say(f"alpha scan: {len(rows)} rows")
        return EXIT_OK
    res = amplitude(graph, params, pos, cfg.cutoff())
    rep.emit(check="amplitude", re=res.value.real, im=res.value.imag, abs_error=res.abs_error,
             epsilon=res.epsilon, n=res.n, N=res.N, n_lines=graph.n_lines,
             det_g_factor=res.det_g_factor, n_delta=res.n_delta, **{"pass": True})
    _say(f"amplitude = {res.value.real:.12g} {res.value.imag:+.12g}i  (+/- {res.abs_error:.2e}, eps={res.epsilon})")
    return EXIT_OK


def cmd_propagator(cfg, args, rep):
    k = MehlerKernel.from_params(cfg.params(require_adapted=False))
    x, y = cfg.point("x"), cfg.point("y")
    val, err = propagator_value(k, cfg.cutoff(), x, y)
    rep.emit(check="propagator", value=val, abs_error=err, epsilon=float(cfg["epsilon"]), x=x, y=y,
             **{"pass": True})
    _say(f"C_eps(x, y) = {val:.12g}  (+/- {err:.2e})")
    return EXIT_OK


def cmd_action(cfg, args, rep):
    params = cfg.params(require_adapted=False)
    terms = {k: complex(v).real for k, v in action_terms(params, cfg.field()).items()}
    total = sum(terms.values())
    rep.emit(check="action", total=total, adapted=params.adapted, **terms, **{"pass": True})
    _say(f"S(phi) = {total:.12g}")
    return EXIT_OK


COMMANDS = {
    "adapt": cmd_adapt,
    "verify": cmd_verify,
    "amplitude": cmd_amplitude,
    "propagator": cmd_propagator,
    "action": cmd_action,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--theta", type=float)
    common.add_argument("--omega", type=float)
    common.add_argument("--epsilon", type=float, help="UV cutoff on the Schwinger parameter")
    common.add_argument("--seed", type=int)
    common.add_argument("--tol", type=float, help="relative quadrature tolerance")

    parser = argparse.ArgumentParser(prog="moyalqft", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("adapt", parents=[common], help="adaptedness verdict and canonical decomposition")
    p = sub.add_parser("verify", parents=[common], help="run a residual suite")
    p.add_argument("suite", choices=SUITES + ("all",))
    p.add_argument("--graph", help="graph file for covariance/invariance")
    p = sub.add_parser("amplitude", parents=[common], help="regularised amplitude of a graph")
    p.add_argument("--graph", help="graph file")
    p.add_argument("--alpha-scan", metavar="LO:HI:NUM", help="emit CSV of the alpha integrand instead")
    sub.add_parser("propagator", parents=[common], help="regularised propagator C_eps(x, y)")
    sub.add_parser("action", parents=[common], help="classical action of a Gaussian field")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args)
    except (MoyalError, ValueError, TypeError, KeyError) as exc:
        _say(f"invalid input: {exc}")
        return EXIT_INVALID
    rep = Reporter(cfg)
    try:
        return COMMANDS[args.command](cfg, args, rep)
    except QuadratureError as exc:
        _say(f"quadrature failure: {exc}")
        return EXIT_QUADRATURE
    except PreconditionError as exc:
        _say(f"precondition: {exc}")
        return EXIT_INVALID
    except (MoyalError, ValueError, OSError) as exc:
        _say(f"invalid input: {exc}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
