import numpy as np
import pytest
from scipy import integrate as si

from moyalqft.errors import QuadratureError
from moyalqft.quadrature import GAUSS_W, KRONROD_W, NODES, gauss_kronrod, graded_edges, integrate_semi_infinite


def test_rule_weights():
    assert KRONROD_W.sum() == pytest.approx(2.0, abs=1e-15)
    assert GAUSS_W.sum() == pytest.approx(2.0, abs=1e-15)
    # K15 is exact for degree 22 polynomials
    assert KRONROD_W @ NODES ** 22 == pytest.approx(2 / 23, rel=1e-13)


def test_smooth_integral():
    res = gauss_kronrod(np.cos, 0.0, 3.0, epsrel=1e-13)
    assert res.value == pytest.approx(np.sin(3.0), rel=1e-13)
    assert res.abs_error < 1e-12


def test_vector_valued_and_complex():
    f = lambda x: np.stack([np.exp(1j * x), x ** 2], axis=-1)
    res = gauss_kronrod(f, 0.0, 1.0, epsrel=1e-12)
    np.testing.assert_allclose(res.value, [(np.exp(1j) - 1) / 1j, 1 / 3], rtol=1e-12)


def test_error_columns_ignore_passive_components():
    # second column is a nasty integrand, but only column 0 is controlled
    f = lambda x: np.stack([np.ones_like(x), 1 / np.sqrt(np.abs(x - 0.3) + 1e-12)], axis=-1)
    res = gauss_kronrod(f, 0.0, 1.0, epsrel=1e-12, error_columns=1)
    assert res.n_panels <= 8


def test_nonconvergence_raises():
    with pytest.raises(QuadratureError):
        gauss_kronrod(lambda x: np.sin(1 / x), 1e-8, 1.0, epsrel=1e-14, max_panels=20)


def test_duplicate_edges_are_harmless():
    res = gauss_kronrod(np.exp, 0.0, 1.0, edges=[0.0, 0.5, 0.5, 1.0, 1.0])
    assert res.value == pytest.approx(np.e - 1, rel=1e-13)


@pytest.mark.parametrize("eps", [1e-3, 0.1, 0.4, 2.0])
def test_graded_edges(eps):
    u = graded_edges(eps)
    assert u[0] == 0.0 and u[-1] == 1.0
    assert np.all(np.diff(u) > 0)


@pytest.mark.parametrize("eps", [0.05, 0.2, 1.0])
def test_semi_infinite_against_scipy(eps):
    # exp(-a) / a^2 / sqrt(sinh a), written without overflow
    f = lambda a: np.sqrt(2.0) * np.exp(-1.5 * a) / a ** 2 / np.sqrt(-np.expm1(-2 * a))
    ref = si.quad(f, eps, np.inf, epsabs=0, epsrel=1e-13, limit=500)[0]
    res = integrate_semi_infinite(f, eps, epsrel=1e-11)
    assert abs(res.value - ref) < 1e-10 * ref
    assert res.abs_error < 1e-11 * abs(res.value) * 10


def test_semi_infinite_endpoint_never_evaluated_at_infinity():
    seen = []

    def f(a):
        seen.append(np.max(a))
        return np.exp(-a)

    integrate_semi_infinite(f, 0.1)
    assert np.isfinite(max(seen))
