import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose
from scipy import stats
from scipy.integrate import quad

from splice_em.exceptions import DegenerateWindowError
from splice_em.model import (
    MEParams,
    ParetoParams,
    SplicedModel,
    alpha_to_beta,
    beta_to_alpha,
    dense_alphas,
    erlang_cdf,
    erlang_mass,
    erlang_pdf,
    pareto_trunc_cdf,
    pareto_trunc_pdf,
    pareto_trunc_quantile,
    sample,
    splice_cdf,
    splice_pdf,
    splice_quantile,
    splice_sf,
    truncated_me_cdf,
    truncated_me_pdf,
)


def _model(T=math.inf, tl=0.5):
    return SplicedModel.build(0.8, [0.3, 0.5, 0.2], [1, 3, 7], 0.6, 0.45, tl, 4.0, T)


# -- Erlang -----------------------------------------------------------------

@pytest.mark.parametrize("r", [1, 2, 5, 20])
def test_erlang_matches_scipy_gamma(r):
    x = np.linspace(0, 40, 81)
    assert_allclose(erlang_cdf(x, r, 1.7), stats.gamma.cdf(x, r, scale=1.7), atol=1e-14)
    assert_allclose(erlang_pdf(x, r, 1.7), stats.gamma.pdf(x, r, scale=1.7), rtol=1e-12, atol=1e-300)


def test_erlang_edges():
    assert erlang_cdf(0.0, 3, 1.0) == 0.0
    assert erlang_cdf(np.inf, 3, 1.0) == 1.0
    assert erlang_pdf(0.0, 1, 2.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        erlang_cdf(np.nan, 1, 1.0)
    with pytest.raises(ValueError):
        erlang_cdf(1.0, 1, 0.0)


def test_erlang_mass_far_tail_keeps_precision():
    # both CDF values round to 1 here; the survival branch must still resolve the mass
    m = erlang_mass(60.0, 61.0, 2, 1.0)
    exact = stats.gamma.sf(60.0, 2) - stats.gamma.sf(61.0, 2)
    assert m == pytest.approx(exact, rel=1e-10)
    assert m > 0


# -- weight transforms ------------------------------------------------------

weights = st.lists(st.floats(0.01, 1.0), min_size=1, max_size=6)


@given(w=weights, theta=st.floats(0.2, 5.0), tl=st.floats(0.0, 2.0), width=st.floats(0.5, 20.0))
def test_alpha_beta_round_trip(w, theta, tl, width):
    shapes = np.cumsum(np.arange(1, len(w) + 1))
    alphas = np.asarray(w) / sum(w)
    t = tl + width
    try:
        betas = alpha_to_beta(alphas, shapes, theta, tl, t)
    except DegenerateWindowError:
        return
    masses = erlang_mass(tl, t, shapes, theta)
    if np.any(masses == 0):
        return
    assert betas.sum() == pytest.approx(1.0, abs=1e-12)
    assert_allclose(beta_to_alpha(betas, shapes, theta, tl, t), alphas, atol=1e-10)


def test_degenerate_window_raises():
    with pytest.raises(DegenerateWindowError):
        alpha_to_beta([1.0], [1], 1e-3, 1e6, 1e6 + 1)


def test_me_params_validation():
    with pytest.raises(ValueError):
        MEParams.from_alphas([0.5, 0.5], [3, 3], 1.0, 0.0, 5.0)
    with pytest.raises(ValueError):
        MEParams.from_alphas([0.5, 0.5], [0, 2], 1.0, 0.0, 5.0)
    with pytest.raises(ValueError):
        MEParams.from_alphas([1.0], [1], -1.0, 0.0, 5.0)


def test_dense_alphas():
    assert_allclose(dense_alphas([0.2, 0.8], [2, 4]), [0, 0.2, 0, 0.8])


# -- truncated components ---------------------------------------------------

def test_truncated_me_integrates_to_one():
    me = MEParams.from_alphas([0.3, 0.7], [2, 5], 0.8, 0.5, 4.0)
    total = quad(lambda x: float(truncated_me_pdf(x, me, 0.5, 4.0)), 0.5, 4.0)[0]
    assert total == pytest.approx(1.0, abs=1e-10)
    assert truncated_me_cdf(0.5, me, 0.5, 4.0) == 0.0
    assert truncated_me_cdf(4.0, me, 0.5, 4.0) == 1.0


@pytest.mark.parametrize("T", [math.inf, 30.0])
def test_pareto_cdf_pdf_quantile(T):
    p = ParetoParams(0.7, 2.0)
    assert pareto_trunc_cdf(2.0, p, T) == 0.0
    x = np.array([2.5, 5.0, 20.0])
    for xi in x:
        area = quad(lambda z: float(pareto_trunc_pdf(z, p, T)), 2.0, xi)[0]
        assert area == pytest.approx(float(pareto_trunc_cdf(xi, p, T)), abs=1e-10)
    q = np.array([0.0, 0.1, 0.5, 0.99])
    assert_allclose(pareto_trunc_cdf(pareto_trunc_quantile(q, p, T), p, T), q, atol=1e-12)
    if not math.isinf(T):
        assert pareto_trunc_quantile(1.0, p, T) == pytest.approx(T)


# -- spliced model ----------------------------------------------------------

@pytest.mark.parametrize("T", [math.inf, 50.0])
def test_splice_pdf_integrates_to_one(T):
    m = _model(T)
    body = quad(lambda x: float(splice_pdf(x, m)), m.t_lower, m.t, limit=200)[0]
    tail = quad(lambda x: float(splice_pdf(x, m)), m.t, T, limit=200)[0]
    assert body == pytest.approx(m.pi, abs=1e-9)
    assert body + tail == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("T", [math.inf, 50.0])
def test_splice_cdf_structure(T):
    m = _model(T)
    assert splice_cdf(m.t_lower, m) == 0.0
    assert splice_cdf(m.t, m) == pytest.approx(m.pi, abs=1e-14)
    assert splice_cdf(m.t * (1 + 1e-12), m) == pytest.approx(m.pi, abs=1e-9)
    x = np.linspace(0, 80, 400)
    F = splice_cdf(x, m)
    assert np.all(np.diff(F) >= 0)
    assert_allclose(F + splice_sf(x, m), 1.0, atol=1e-14)
    if not math.isinf(T):
        assert splice_cdf(T, m) == 1.0


@given(p=st.floats(0.0, 1.0), T=st.sampled_from([math.inf, 50.0]))
def test_quantile_inverts_cdf(p, T):
    m = _model(T)
    x = splice_quantile(p, m)
    assert m.t_lower <= x <= T
    if 0 < p < 1:
        assert splice_cdf(x, m) == pytest.approx(p, abs=1e-10)


def test_quantile_at_splice_weight_is_t():
    m = _model()
    assert splice_quantile(m.pi, m) == pytest.approx(m.t, rel=1e-10)
    assert splice_quantile(0.0, m) == m.t_lower
    with pytest.raises(ValueError):
        splice_quantile(1.5, m)
    assert isinstance(splice_quantile(0.3, m), float)
    assert splice_quantile([0.3, 0.9], m).shape == (2,)


def test_model_validation():
    with pytest.raises(ValueError):
        SplicedModel.build(1.0, [1.0], [1], 1.0, 0.5, 0.0, 3.0)
    with pytest.raises(ValueError):
        SplicedModel.build(0.5, [1.0], [1], 1.0, 0.5, 3.0, 3.0)
    with pytest.raises(ValueError):
        SplicedModel.build(0.5, [1.0], [1], 1.0, -0.5, 0.0, 3.0)
    m = _model()
    with pytest.raises(ValueError):
        SplicedModel(m.pi, m.body, ParetoParams(0.5, 9.0), m.t_lower, m.t)


@pytest.mark.parametrize("T", [math.inf, 50.0])
def test_json_round_trip(T):
    m = _model(T)
    text = m.to_json()
    if math.isinf(T):
        assert '"T": "inf"' in text
    back = SplicedModel.from_json(text)
    assert back.pi == m.pi and back.T == m.T and back.t == m.t
    assert_allclose(back.body.alphas, m.body.alphas)
    assert_allclose(back.shapes, m.shapes)


@pytest.mark.parametrize("T", [math.inf, 20.0])
def test_sampler_matches_cdf(T):
    m = _model(T)
    x = sample(m, 20000, 7)
    assert np.all((x >= m.t_lower) & (x <= T))
    d = stats.kstest(x, lambda v: splice_cdf(v, m)).statistic
    assert d < 0.015


def test_sampler_is_seeded():
    m = _model()
    assert_allclose(sample(m, 50, 3), sample(m, 50, 3))
    assert sample(m, 0, 1).shape == (0,)
