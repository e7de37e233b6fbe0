import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose
from scipy.optimize import minimize_scalar

from splice_em.data import CensoredData
from splice_em.evt import (
    endpoint_gamma,
    hill,
    mean_excess,
    mean_excess_at,
    truncated_gamma_residual,
    truncated_pareto_gamma,
    truncation_odds,
)
from splice_em.exceptions import DataError


def test_hill_simple():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    assert hill(x, 2.0) == pytest.approx((math.log(2) + math.log(4)) / 2)
    with pytest.raises(DataError):
        hill(x, 8.0)


def test_hill_recovers_pareto_shape():
    rng = np.random.default_rng(0)
    x = (1.0 - rng.random(200000)) ** -0.4
    assert hill(x, 1.0) == pytest.approx(0.4, rel=0.01)


@given(H=st.floats(0.05, 2.0), L=st.floats(0.2, 30.0))
def test_truncated_gamma_is_root(H, L):
    if H >= L / 2:
        return
    g = truncated_pareto_gamma(H, L)
    assert abs(truncated_gamma_residual(g, H, L)) < 1e-10
    # upper truncation removes large log-excesses, so the shape exceeds H
    assert g >= H


def test_truncated_gamma_maximizes_likelihood():
    # log-likelihood of exceedances of a Pareto truncated at T, written in terms of H and L
    H, L, n = 0.4, 3.0, 100

    def nll(g):
        return n * (math.log(g) + H / g + math.log(-math.expm1(-L / g)))

    g_num = minimize_scalar(nll, bounds=(1e-3, 20), method="bounded",
                            options={"xatol": 1e-12}).x
    assert truncated_pareto_gamma(H, L) == pytest.approx(g_num, rel=1e-6)
    assert truncated_pareto_gamma(H, math.inf) == H


def test_mean_excess_small_example():
    assert_allclose(mean_excess_at([1, 2, 3, 4], 2.0), [1.5])
    me = mean_excess(np.array([1.0, 2.0, 3.0, 4.0]))
    assert_allclose(me.k, [1, 2, 3])
    assert_allclose(me.thresholds, [3.0, 2.0, 1.0])
    assert_allclose(me.excess, [1.0, 1.5, 2.0])


@given(st.lists(st.floats(0.1, 100.0), min_size=3, max_size=30))
def test_mean_excess_turnbull_mode_agrees_on_exact_data(xs):
    x = np.asarray(xs)
    a = mean_excess(x)
    b = mean_excess(x, use_turnbull=True)
    assert_allclose(a.thresholds, b.thresholds)
    assert_allclose(a.excess, b.excess, rtol=1e-10, atol=1e-12)


def test_mean_excess_censored_runs_and_csv():
    rng = np.random.default_rng(1)
    lo = rng.exponential(2.0, 80)
    up = np.where(rng.random(80) < 0.3, lo + 1.0, lo)
    me = mean_excess(CensoredData(lo, up), use_turnbull=True)
    assert np.all(np.isfinite(me.excess)) and np.all(me.excess >= 0)
    buf = io.StringIO()
    me.to_csv(buf)
    assert buf.getvalue().startswith("k,v,e_hat\n")
    with pytest.raises(DataError):
        mean_excess(CensoredData(lo, up))


def test_endpoint_gamma_solves_conditional_equation():
    rng = np.random.default_rng(3)
    x = np.sort((1.0 - rng.random(500) * (1 - 50.0 ** (-1 / 0.5))) ** -0.5)
    k = 200
    g = endpoint_gamma(x, k)
    thr, xmax = x[-k - 1], x[-1]
    H = np.mean(np.log(x[-k:] / thr))
    R = xmax / thr
    assert g == pytest.approx(H + math.log(R) / (R ** (1 / g) - 1), rel=1e-10)


def test_truncation_odds_clamps_and_estimates():
    rng = np.random.default_rng(4)
    # truncated Pareto with gamma=0.5, T=20
    u = rng.random(2000)
    x = (1 - u * (1 - 20.0 ** (-2.0))) ** -0.5
    k = 500
    g = endpoint_gamma(x, k)
    D, T = truncation_odds(x, k, g)
    assert D >= 0
    assert T >= x.max()
    # an untruncated sample gives clamped odds at the maximum or a large endpoint
    y = (1 - rng.random(2000)) ** -0.5
    D0, T0 = truncation_odds(y, 50, 0.5)
    assert D0 >= 0 and T0 >= y.max()
    with pytest.raises(DataError):
        truncation_odds(y, 0, 0.5)
