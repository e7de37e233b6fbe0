import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose
from scipy import stats
from scipy.integrate import quad

from splice_em.exceptions import InfiniteMeanError
from splice_em.model import SplicedModel, splice_cdf, splice_pdf, splice_sf
from splice_em.risk import premium, premium_me_star, premium_pareto_star, tvar, var


def _model(T=math.inf, tl=0.5, gamma=0.45):
    return SplicedModel.build(0.8, [0.3, 0.5, 0.2], [1, 3, 7], 0.6, gamma, tl, 4.0, T)


def _premium_quad(R, m):
    # E(X - R)_+ = int_R^T S(x) dx, plus (t_lower - R) when R sits below the support
    lo = max(R, m.t_lower)
    sf = lambda x: float(splice_sf(x, m))
    pts = [p for p in (m.t,) if lo < p < m.T]
    total = 0.0
    edges = [lo, *pts, m.T]
    for a, b in zip(edges[:-1], edges[1:]):
        total += quad(sf, a, b, epsabs=1e-13, epsrel=1e-12, limit=400)[0]
    return total + max(m.t_lower - R, 0.0)


# -- starred premiums -------------------------------------------------------------

def test_me_star_examples():
    assert premium_me_star(0.0, [1.0], 2.5) == pytest.approx(2.5)
    assert premium_me_star(1.0, [1.0], 1.0) == pytest.approx(math.exp(-1))
    assert premium_me_star(500.0, [0.2, 0.8], 1.0) < 1e-150


@pytest.mark.parametrize("R", [0.0, 0.3, 2.0, 7.5, 25.0])
def test_me_star_matches_quadrature_sparse_shapes(R):
    alphas, shapes, theta = np.array([0.3, 0.5, 0.2]), np.array([1, 3, 7]), 0.6
    sf = lambda x: float(np.sum(alphas * stats.gamma.sf(x, shapes, scale=theta)))
    ref = quad(sf, R, np.inf, epsabs=1e-14, limit=200)[0]
    assert premium_me_star(R, alphas, theta, shapes) == pytest.approx(ref, rel=1e-10, abs=1e-14)


def test_pareto_star_examples():
    assert premium_pareto_star(2.0, 1.0, 0.5) == pytest.approx(0.5)
    assert premium_pareto_star(3.0, 3.0, 0.25) == pytest.approx(3.0 / 3.0)
    for R in (1.5, 4.0, 40.0):
        ref = quad(lambda x: (x / 1.2) ** (-1 / 0.6), R, np.inf, epsabs=1e-13)[0]
        assert premium_pareto_star(R, 1.2, 0.6) == pytest.approx(ref, rel=1e-8)
    with pytest.raises(InfiniteMeanError):
        premium_pareto_star(2.0, 1.0, 1.0)


# -- spliced premium --------------------------------------------------------------

@pytest.mark.parametrize("T, gamma", [(math.inf, 0.45), (50.0, 0.45), (50.0, 1.0), (50.0, 1.7)])
@pytest.mark.parametrize("R", [0.0, 0.2, 0.5, 1.0, 3.9, 4.0, 4.5, 10.0, 49.0])
def test_premium_matches_quadrature(T, gamma, R):
    m = _model(T, gamma=gamma)
    assert premium(R, m) == pytest.approx(_premium_quad(R, m), rel=1e-8, abs=1e-12)


def test_premium_edges_and_types():
    m = _model(50.0)
    assert premium(50.0, m) == 0.0
    assert premium(80.0, m) == 0.0
    assert isinstance(premium(2.0, m), float)
    assert premium([1.0, 2.0], m).shape == (2,)
    # below the support the premium grows one for one
    assert premium(0.1, m) == pytest.approx(premium(0.5, m) + 0.4)
    with pytest.raises(ValueError):
        premium(math.inf, m)


def test_infinite_mean_tail():
    m = _model(gamma=1.2)
    with pytest.raises(InfiniteMeanError):
        premium(10.0, m)
    with pytest.raises(InfiniteMeanError):
        tvar(0.01, m)
    assert premium(10.0, _model(100.0, gamma=1.2)) > 0


@pytest.mark.parametrize("T", [math.inf, 50.0])
def test_premium_shape_properties(T):
    m = _model(T)
    R = np.linspace(m.t_lower, min(T, 60.0) - 1e-9, 600)
    P = premium(R, m)
    dP = np.diff(P)
    assert np.all(dP <= 1e-12)
    assert np.all(-dP <= np.diff(R) + 1e-12)
    assert np.all(np.diff(dP) >= -1e-12)  # convex


@pytest.mark.parametrize("T", [math.inf, 50.0])
@pytest.mark.parametrize("R", [1.0, 2.7, 5.0, 12.0, 33.0])
def test_premium_derivative_is_minus_survival(T, R):
    m = _model(T)
    h = 1e-5
    d = (premium(R + h, m) - premium(R - h, m)) / (2 * h)
    assert d == pytest.approx(-float(splice_sf(R, m)), abs=1e-6)


@given(R=st.floats(0.0, 80.0), dR=st.floats(0.0, 20.0), T=st.sampled_from([math.inf, 60.0]))
def test_premium_is_one_lipschitz(R, dR, T):
    m = _model(T)
    a, b = premium(R, m), premium(R + dR, m)
    assert a >= b - 1e-12
    assert a - b <= dR + 1e-9


# -- VaR and TVaR ---------------------------------------------------------------

def test_var_at_splice_weight_is_t():
    m = _model()
    assert var(1.0 - m.pi, m) == pytest.approx(m.t, rel=1e-10)
    with pytest.raises(ValueError):
        var(0.0, m)


@pytest.mark.parametrize("T", [math.inf, 50.0])
def test_var_round_trip(T):
    m = _model(T)
    p = np.array([0.9, 0.5, 0.2, 0.05, 0.01, 0.001])
    assert_allclose(splice_cdf(var(p, m), m), 1.0 - p, atol=1e-8)


@pytest.mark.parametrize("T", [math.inf, 50.0])
def test_tvar_identity_and_quadrature(T):
    m = _model(T)
    for p in (0.5, 0.1, 0.01):
        v, tv = var(p, m), tvar(p, m)
        assert tv - v == pytest.approx(premium(v, m) / p, rel=1e-12)
        assert tv >= v
        f = lambda x: x * float(splice_pdf(x, m))
        edges = [v, m.t, T] if v < m.t else [v, T]
        top = sum(quad(f, a, b, epsabs=1e-12, limit=400)[0] for a, b in zip(edges[:-1], edges[1:]))
        assert tv == pytest.approx(top / p, rel=1e-7)


def test_tvar_nonincreasing_in_p():
    m = _model(50.0)
    p = np.linspace(0.001, 0.99, 200)
    assert np.all(np.diff(tvar(p, m)) <= 1e-10)


def test_single_exponential_body_tvar():
    # exponential body: int_v^t x f(x) dx = (v + theta) e^(-v/theta) - (t + theta) e^(-t/theta)
    m = SplicedModel.build(0.95, [1.0], [1], 2.0, 0.3, 0.0, 5.0)
    p = 0.5
    v = var(p, m)
    assert v < m.t
    F_t = -math.expm1(-m.t / 2.0)
    body = m.pi / F_t * ((v + 2.0) * math.exp(-v / 2.0) - (m.t + 2.0) * math.exp(-m.t / 2.0))
    tail = (1 - m.pi) * m.t / (1 - 0.3)
    assert tvar(p, m) == pytest.approx((body + tail) / p, rel=1e-10)
