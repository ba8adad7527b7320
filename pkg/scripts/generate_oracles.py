"""Brute-force tadpole amplitudes for the regression oracle file.

The free internal corner is integrated numerically over R^D with
``scipy.integrate.cubature`` at every Schwinger parameter, and the Schwinger
parameter with ``scipy.integrate.quad``.  The integrand is assembled
pointwise from ``kernel_at`` and the hypermomentum-free ``vertex_factor``;
none of the Gaussian-calculus code paths are used.

    python3 scripts/generate_oracles.py [--out tests/data/tadpole_oracle.json]
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np
import scipy
from scipy.integrate import cubature, quad_vec

from moyalqft.action import ModelParams
from moyalqft.feynman import FeynmanGraph, vertex_factor
from moyalqft.propagator import MehlerKernel
from moyalqft.symplectic import Metric, SymplecticStructure, random_adapted_pair, standard_structures

RTOL = 1e-9


def _benchmarks():
    g2, st2 = standard_structures(2)
    g_diag = Metric(np.diag([4.0, 1.0]))
    s_diag = SymplecticStructure(g_diag.g_sqrt @ st2.sigma @ g_diag.g_sqrt)
    g_rand, s_rand = random_adapted_pair(2, 7)
    return [
        dict(name="standard-planar", graph="planar", metric=g2, sigma=st2, theta=1.0, omega=0.5, mass2=1.0,
             epsilon=0.2, externals=[[0.3, 0.0], [-0.1, 0.2]]),
        dict(name="diag41-planar", graph="planar", metric=g_diag, sigma=s_diag, theta=0.8, omega=0.7, mass2=0.5,
             epsilon=0.1, externals=[[0.2, -0.3], [0.1, 0.4]]),
        dict(name="random7-nonplanar", graph="nonplanar", metric=g_rand, sigma=s_rand, theta=1.2, omega=0.6,
             mass2=1.5, epsilon=0.4, externals=[[-0.25, 0.1], [0.35, 0.05]]),
    ]


def _graph(name):
    return FeynmanGraph.planar_tadpole() if name == "planar" else FeynmanGraph.nonplanar_tadpole()


def brute_force_tadpole(graph, params, externals, epsilon):
    """``(value, error)`` of a one-vertex one-line amplitude by direct quadrature."""
    d = params.dim
    ctx = params.moyal()
    kern = MehlerKernel.from_params(params)
    (a, b), = graph.lines
    lo, hi = sorted([a[1], b[1]])
    ext = dict(zip((s[1] for s in graph.external), np.asarray(externals, dtype=float)))
    alt = [1.0, -1.0, 1.0, -1.0]
    # delta(x1 - x2 + x3 - x4): solve for the internal corner ``hi``
    fixed = sum(alt[i] * ext[i] for i in ext)

    def corners(u):
        x = {i: np.broadcast_to(v, u.shape) for i, v in ext.items()}
        x[lo] = u
        x[hi] = -alt[hi] * (fixed + alt[lo] * u)
        return [x[i] for i in range(4)]

    omega_t = 2 * params.omega / params.theta
    line_pref = (params.theta * np.sqrt(params.metric.det) / (4 * params.omega)
                 * (params.omega / (np.pi * params.theta)) ** (d / 2))
    vertex_pref = params.metric.det / (np.pi * params.theta) ** d

    def inner(alpha):
        def f(u):
            x = corners(u)
            v = kern.kernel_at(x[lo], x[hi], alpha) * vertex_factor(ctx, *x, np.zeros(d))
            # cubature silently drops imaginary parts, so integrate (re, im) as a vector
            return np.stack([v.real, v.imag], axis=-1)

        res = cubature(f, [-np.inf] * d, [np.inf] * d, rtol=RTOL * 0.1, atol=1e-13, max_subdivisions=20000)
        if res.status != "converged":
            raise RuntimeError(f"cubature did not converge at alpha={alpha}")
        weight = np.sinh(alpha) ** (-d / 2) * np.exp(-params.mass2 * alpha / (2 * omega_t))
        return weight * res.estimate

    val, err = quad_vec(inner, epsilon, np.inf, epsabs=0.0, epsrel=RTOL, norm="max", limit=400)
    scale = line_pref * vertex_pref
    return scale * complex(val[0], val[1]), scale * float(err)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests" / "data" / "tadpole_oracle.json"))
    args = ap.parse_args(argv)
    records = []
    for bench in _benchmarks():
        t0 = time.time()
        params = ModelParams(bench["metric"], bench["sigma"], bench["theta"], bench["omega"], bench["mass2"])
        val, err = brute_force_tadpole(_graph(bench["graph"]), params, bench["externals"], bench["epsilon"])
        dt = time.time() - t0
        print(f"{bench['name']}: {val.real:.15g} {val.imag:+.15g}i  (+/- {err:.1e}, {dt:.0f} s)", file=sys.stderr)
        records.append({
            "name": bench["name"],
            "graph": bench["graph"],
            "metric": bench["metric"].g.tolist(),
            "sigma": bench["sigma"].sigma.tolist(),
            "theta": bench["theta"],
            "omega": bench["omega"],
            "mass2": bench["mass2"],
            "epsilon": bench["epsilon"],
            "externals": bench["externals"],
            "value": [val.real, val.imag],
            "abs_error": err,
        })
    out = {"generator": "scripts/generate_oracles.py", "method": "scipy cubature (corner) x quad_vec (alpha)",
           "scipy": scipy.__version__, "rtol": RTOL, "benchmarks": records}
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(out, indent=2) + "\n")


if __name__ == "__main__":
    main()
