"""EM fitting of the spliced mixed Erlang / Pareto model to censored, truncated data.

Observations fall into five cases relative to the splicing point (see
:class:`~splice_em.data.Case`).  The E-step computes component posteriors for
body observations, conditional means of censored body observations,
conditional mean log-excesses of censored tail observations, and for
observations straddling ``t`` the probability that the loss lies in the body.
The M-step then updates ``pi`` and ``betas`` in closed form and ``theta`` and
``gamma`` by solving their score equations.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from ._roots import safeguarded_newton
from .data import Case, CensoredData, as_data, case_counts, classify_cases, turnbull_fit
from .evt import truncated_gamma_residual, truncated_pareto_gamma
from .exceptions import ConvergenceError, DataError
from .model import (
    INF,
    MEParams,
    ParetoParams,
    SplicedModel,
    erlang_logpdf,
    erlang_mass,
    pareto_trunc_cdf,
    truncated_me_pdf,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitConfig:
    """Structural points and controls for a single EM fit.

    ``em_tol`` is compared with the change in observed-data log-likelihood
    between iterations; ``tol_mode`` selects whether that change is taken as
    is (``"absolute"``) or divided by ``|loglik| + 1`` (``"relative"``).
    """

    t_lower: float
    t: float
    T: float = INF
    M_init: int = 10
    spread_factors: tuple = tuple(range(1, 11))
    em_tol: float = 1e-3
    tol_mode: str = "absolute"
    newton_tol: float = 1e-10
    max_em_iter: int = 2000
    ic: str = "aic"

    def __post_init__(self):
        if not 0.0 <= self.t_lower < self.t < self.T:
            raise ValueError("need 0 <= t_lower < t < T")
        if self.M_init < 1:
            raise ValueError("M_init must be at least 1")
        if not self.spread_factors or min(self.spread_factors) < 1:
            raise ValueError("spread factors must be >= 1")
        if self.ic.lower() not in ("aic", "bic"):
            raise ValueError("ic must be 'aic' or 'bic'")
        if self.tol_mode not in ("absolute", "relative"):
            raise ValueError("tol_mode must be 'absolute' or 'relative'")
        object.__setattr__(self, "ic", self.ic.lower())


# ---------------------------------------------------------------------------
# Data preparation
# ---------------------------------------------------------------------------

@dataclass
class _Prepared:
    n: int
    x1: np.ndarray          # case I exact values
    x2: np.ndarray          # case II exact values
    l3: np.ndarray
    u3: np.ndarray
    l4: np.ndarray
    u4: np.ndarray
    l5: np.ndarray
    u5: np.ndarray
    cases: np.ndarray
    data: CensoredData

    @property
    def censored(self) -> bool:
        return (self.l3.size + self.l4.size + self.l5.size) > 0


def _prepare(obs, t_lower, t, T) -> _Prepared:
    if isinstance(obs, _Prepared):
        return obs
    from .data import clip_to_support

    data = clip_to_support(obs, t_lower, T)
    cases = classify_cases(data, t_lower, t, T)
    lo, up = data.lower, data.upper
    sel = {c: cases == c for c in Case}
    return _Prepared(
        n=len(data),
        x1=lo[sel[Case.I]], x2=lo[sel[Case.II]],
        l3=lo[sel[Case.III]], u3=up[sel[Case.III]],
        l4=lo[sel[Case.IV]], u4=up[sel[Case.IV]],
        l5=lo[sel[Case.V]], u5=up[sel[Case.V]],
        cases=cases, data=data,
    )


def _prep_for(obs, model: SplicedModel) -> _Prepared:
    return _prepare(obs, model.t_lower, model.t, model.T)


# ---------------------------------------------------------------------------
# Closed-form conditional expectations
# ---------------------------------------------------------------------------

def erlang_conditional_mean(lower, upper, r, theta):
    """``E(X | lower < X <= upper)`` for an Erlang(r, theta) variable.

    Uses ``r * theta * mass(r + 1) / mass(r)``.  Broadcasts bounds against
    ``r``; entries with no mass return the interval midpoint.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    r = np.asarray(r, dtype=float)
    num = erlang_mass(lower, upper, r + 1.0, theta)
    den = erlang_mass(lower, upper, r, theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = r * theta * num / den
    mid = np.broadcast_to(0.5 * (lower + upper), out.shape)
    return np.where(den > 0, np.clip(out, lower, upper), mid)


def pareto_conditional_log_excess(lower, upper, t, gamma):
    """``E(ln(X/t) | lower < X <= upper)`` for a Pareto(t, gamma) variable, ``lower >= t``.

    Written as ``ln(lower/t) + gamma - d / expm1(d / gamma)`` with
    ``d = ln(upper/lower)``, which reduces to ``ln(lower/t) + gamma`` for an
    unbounded interval.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    base = np.log(lower / t) + gamma
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        d = np.log(upper / lower)
        corr = np.where(np.isinf(upper), 0.0, d / np.expm1(d / gamma))
    return base - corr


# ---------------------------------------------------------------------------
# Likelihood
# ---------------------------------------------------------------------------

def _body_masses(model: SplicedModel):
    return erlang_mass(model.t_lower, model.t, model.shapes, model.theta)


def _body_interval_prob(lower, upper, model: SplicedModel):
    """``F_1(upper) - F_1(lower)`` for body bounds inside ``[t_lower, t]``."""
    den = _body_masses(model)
    num = erlang_mass(np.asarray(lower)[:, None], np.asarray(upper)[:, None], model.shapes,
                      model.theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        comp = np.where(den > 0, num / den, 0.0)
    return comp @ model.body.betas


def _tail_interval_prob(lower, upper, model: SplicedModel):
    """``F_2(upper) - F_2(lower)`` for tail bounds inside ``[t, T]``."""
    g, t = model.gamma, model.t
    with np.errstate(divide="ignore"):
        a = np.power(np.asarray(lower, dtype=float) / t, -1.0 / g)
        b = np.where(np.isinf(upper), 0.0, np.power(np.asarray(upper, dtype=float) / t, -1.0 / g))
    norm = 1.0 if math.isinf(model.T) else -math.expm1(-math.log(model.T / t) / g)
    return (a - b) / norm


def _log_terms(prep: _Prepared, model: SplicedModel) -> list[np.ndarray]:
    pi = model.pi
    lp, lq = math.log(pi), math.log1p(-pi)
    terms = []
    with np.errstate(divide="ignore"):
        terms.append(lp + np.log(truncated_me_pdf(prep.x1, model.body, model.t_lower, model.t)))
        f2 = (1.0 / (model.gamma * model.t)) * np.power(prep.x2 / model.t, -1.0 / model.gamma - 1.0)
        if not math.isinf(model.T):
            f2 = f2 / (-math.expm1(-math.log(model.T / model.t) / model.gamma))
        terms.append(lq + np.log(f2))
        terms.append(lp + np.log(_body_interval_prob(prep.l3, prep.u3, model)))
        terms.append(lq + np.log(_tail_interval_prob(prep.l4, prep.u4, model)))
        body_part = pi * _body_interval_prob(prep.l5, np.full(prep.l5.shape, model.t), model)
        tail_part = (1.0 - pi) * pareto_trunc_cdf(prep.u5, model.tail, model.T)
        terms.append(np.log(body_part + tail_part))
    return terms


def loglik(obs, model: SplicedModel) -> float:
    """Observed-data log-likelihood summed over the five observation cases.

    Raises
    ------
    DataError
        If some observation has zero probability under ``model``.
    """
    prep = _prep_for(obs, model)
    terms = _log_terms(prep, model)
    total = 0.0
    for case, arr in zip(Case, terms):
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            idx = np.flatnonzero(prep.cases == case)[bad[0]]
            raise DataError(f"observation {idx} (case {case.name}) has zero likelihood")
        total += float(arr.sum())
    return total


def information_criteria(ll: float, M: int, n: int) -> tuple[float, float, int]:
    """AIC and BIC with ``df = 2M + 2`` (M-1 weights, M shapes, theta, gamma, pi)."""
    df = 2 * M + 2
    nll = -ll
    return 2 * nll + 2 * df, 2 * nll + math.log(n) * df, df


# ---------------------------------------------------------------------------
# E-step
# ---------------------------------------------------------------------------

def prob_below_t(lower, upper, model: SplicedModel):
    """``P(X <= t | lower < X <= upper)`` for intervals straddling ``t``.

    Raises
    ------
    DataError
        If the interval has zero probability under ``model``.
    """
    scalar = np.ndim(lower) == 0 and np.ndim(upper) == 0
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    if not math.isinf(model.T):
        upper = np.where(np.isinf(upper), model.T, upper)
    body = model.pi * _body_interval_prob(np.maximum(lower, model.t_lower),
                                         np.full(lower.shape, model.t), model)
    tail = (1.0 - model.pi) * pareto_trunc_cdf(upper, model.tail, model.T)
    den = body + tail
    if np.any(~(den > 0)):
        raise DataError(f"straddling interval {int(np.argmin(den))} has zero probability")
    p = np.clip(body / den, 0.0, 1.0)
    return float(p[0]) if scalar else p


@dataclass
class EStepCache:
    """Per-observation E-step quantities for one EM iteration.

    Posterior arrays have one row per observation of the corresponding case
    and one column per mixture component.
    """

    n: int
    x1: np.ndarray
    z1: np.ndarray
    z3: np.ndarray
    ex3: np.ndarray
    z5: np.ndarray
    ex5: np.ndarray
    p1: np.ndarray
    logexc2: np.ndarray
    elog4: np.ndarray
    elog5: np.ndarray

    @property
    def p2(self) -> np.ndarray:
        return 1.0 - self.p1

    @property
    def n1(self) -> float:
        return self.z1.shape[0] + self.z3.shape[0] + float(self.p1.sum())

    @property
    def n2(self) -> float:
        return self.logexc2.size + self.elog4.size + float(self.p2.sum())

    @property
    def body_weights(self) -> np.ndarray:
        """Expected component counts, the numerator of the beta update."""
        return self.z1.sum(axis=0) + self.z3.sum(axis=0) + self.p1 @ self.z5

    @property
    def body_sum(self) -> float:
        """Expected sum of body losses with censored values replaced by conditional means."""
        s = self.x1.sum()
        s += float(np.sum(self.z3 * self.ex3))
        s += float(self.p1 @ np.sum(self.z5 * self.ex5, axis=1))
        return float(s)

    @property
    def tail_log_sum(self) -> float:
        return float(self.logexc2.sum() + self.elog4.sum() + self.p2 @ self.elog5)


def _interval_posteriors(lower, upper, model, case_name, offset_idx):
    if lower.size == 0:
        return np.zeros((0, model.M)), np.zeros((0, model.M))
    mass = erlang_mass(lower[:, None], upper[:, None], model.shapes, model.theta)
    w = model.body.alphas * mass
    tot = w.sum(axis=1, keepdims=True)
    bad = np.flatnonzero(tot[:, 0] <= 0)
    if bad.size:
        raise DataError(f"case {case_name} observation {offset_idx[bad[0]]}: "
                        "zero posterior denominator")
    z = w / tot
    ex = erlang_conditional_mean(lower[:, None], upper[:, None], model.shapes, model.theta)
    return z, ex


def _e_step(prep: _Prepared, model: SplicedModel) -> EStepCache:
    M = model.M
    idx = {c: np.flatnonzero(prep.cases == c) for c in Case}
    if prep.x1.size:
        with np.errstate(divide="ignore"):
            logw = np.log(model.body.alphas) + erlang_logpdf(prep.x1[:, None], model.shapes,
                                                             model.theta)
        norm = logsumexp(logw, axis=1, keepdims=True)
        bad = np.flatnonzero(~np.isfinite(norm[:, 0]))
        if bad.size:
            raise DataError(f"case I observation {idx[Case.I][bad[0]]}: zero posterior denominator")
        z1 = np.exp(logw - norm)
    else:
        z1 = np.zeros((0, M))
    z3, ex3 = _interval_posteriors(prep.l3, prep.u3, model, "III", idx[Case.III])
    t5 = np.full(prep.l5.shape, model.t)
    z5, ex5 = _interval_posteriors(prep.l5, t5, model, "V", idx[Case.V])
    p1 = prob_below_t(prep.l5, prep.u5, model) if prep.l5.size else np.zeros(0)
    t, g = model.t, model.gamma
    return EStepCache(
        n=prep.n, x1=prep.x1, z1=z1, z3=z3, ex3=ex3, z5=z5, ex5=ex5, p1=np.atleast_1d(p1),
        logexc2=np.log(prep.x2 / t),
        elog4=pareto_conditional_log_excess(prep.l4, prep.u4, t, g),
        elog5=pareto_conditional_log_excess(t5, prep.u5, t, g),
    )


def e_step(obs, model_prev: SplicedModel) -> EStepCache:
    """Posterior quantities of the E-step under ``model_prev``."""
    return _e_step(_prep_for(obs, model_prev), model_prev)


# ---------------------------------------------------------------------------
# M-step
# ---------------------------------------------------------------------------

def m_step_pi(cache: EStepCache) -> float:
    """Expected fraction of losses at or below the splicing point."""
    return cache.n1 / cache.n


def m_step_beta(cache: EStepCache) -> np.ndarray:
    n1 = cache.n1
    if not n1 > 0:
        raise DataError("no expected observations in the body")
    return cache.body_weights / n1


def _theta_correction(theta, betas, shapes, t_lower, t):
    """Truncation correction ``C(theta)`` of the theta equation and its derivative.

    Per component ``theta * N / mass`` with ``N = t_l f(t_l) - t f(t)``.
    """
    r = np.asarray(shapes, dtype=float)
    f_l = np.exp(erlang_logpdf(t_lower, r, theta)) if t_lower > 0 else np.zeros_like(r)
    f_u = np.exp(erlang_logpdf(t, r, theta))
    N = t_lower * f_l - t * f_u
    dN = (t_lower * f_l * (t_lower / theta**2 - r / theta)
          - t * f_u * (t / theta**2 - r / theta))
    mass = erlang_mass(t_lower, t, r, theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(mass > 0, theta * N / mass, 0.0)
        dh = np.where(mass > 0, N / mass + theta * dN / mass - (N / mass) ** 2, 0.0)
    return float(betas @ h), float(betas @ dh)


def theta_equation_residual(theta, cache: EStepCache, betas, shapes, t_lower, t) -> float:
    """``theta - RHS(theta)`` of the theta score equation; zero at the M-step solution."""
    rbar = float(np.asarray(betas) @ np.asarray(shapes))
    c, _ = _theta_correction(theta, betas, shapes, t_lower, t)
    return theta - cache.body_sum / (cache.n1 * rbar) + c / rbar


def m_step_theta(cache: EStepCache, betas, shapes, theta_prev, t_lower, t, newton_tol=1e-10):
    """Solve the theta score equation by Newton from ``theta_prev``.

    Falls back to a bracketed solve on ``[theta_prev/100, 100*theta_prev]``.
    """
    n1 = cache.n1
    if not n1 > 0:
        raise DataError("no expected observations in the body")
    betas = np.asarray(betas, dtype=float)
    rbar = float(betas @ np.asarray(shapes))
    mean_part = cache.body_sum / (n1 * rbar)

    def fun(th):
        c, dc = _theta_correction(th, betas, shapes, t_lower, t)
        return th - mean_part + c / rbar, 1.0 + dc / rbar

    return safeguarded_newton(fun, theta_prev, theta_prev / 100.0, theta_prev * 100.0,
                              rtol=newton_tol)


def gamma_equation_residual(gamma, cache: EStepCache, t, T) -> float:
    H = cache.tail_log_sum / cache.n2
    if math.isinf(T):
        return gamma - H
    return truncated_gamma_residual(gamma, H, math.log(T / t))


def m_step_gamma(cache: EStepCache, gamma_prev, t, T=INF, newton_tol=1e-10) -> float:
    """Pareto shape update: mean expected log-excess plus upper-truncation correction."""
    n2 = cache.n2
    if not n2 > 0:
        raise DataError("no expected observations in the tail")
    H = cache.tail_log_sum / n2
    if math.isinf(T):
        return H
    return truncated_pareto_gamma(H, math.log(T / t), gamma0=gamma_prev, rtol=newton_tol)


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------

def pseudo_data(obs, t_lower, T=INF) -> np.ndarray:
    """Exact values, right-censored lower bounds, left-censored upper bounds, interval midpoints."""
    data = as_data(obs)
    lo, up = data.lower, data.upper
    right = ~(lo == up) & (np.isinf(up) | (up >= T))
    left = ~(lo == up) & ~right & (lo <= t_lower)
    return np.where(lo == up, lo, np.where(right, lo, np.where(left, up, 0.5 * (lo + up))))


def initial_shapes(d_body, theta0, M):
    """Ceiled empirical quantiles of the body pseudo-data in units of ``theta0``, deduplicated."""
    probs = np.linspace(0.0, 1.0, M) if M > 1 else np.array([1.0])
    q = np.quantile(d_body, probs)
    r = np.maximum(np.ceil(q / theta0 - 1e-12), 1).astype(int)
    return np.unique(r)


def initial_alphas(d_body, shapes, theta0):
    """Bin proportions of the pseudo-data over ``(r_{j-1} theta0, r_j theta0]``."""
    edges = np.concatenate([[0.0], np.asarray(shapes) * theta0])
    edges[-1] = max(edges[-1], d_body.max())
    counts = np.array([np.sum((d_body > a) & (d_body <= b)) for a, b in zip(edges[:-1], edges[1:])],
                      dtype=float)
    counts[0] += np.sum(d_body <= 0)
    return counts / d_body.size


def initialize(obs, cfg: FitConfig, s: Optional[float] = 1.0, shapes=None,
               M=None) -> SplicedModel:
    """Starting values for the EM algorithm.

    ``pi`` starts at the Turnbull CDF at ``t``, the ME part follows the
    quantile-based shape initialization on pseudo-data at or below ``t`` with
    ``theta0 = max / s``, and ``gamma`` starts at the Hill estimate over ``t``.
    Zero-weight components are dropped.  When ``shapes`` is given it is used
    as is; ``s=None`` then sets ``theta0`` so that the largest shape times
    ``theta0`` equals the body maximum, and empty bins get a small weight.
    """
    prep = _prepare(obs, cfg.t_lower, cfg.t, cfg.T)
    counts = case_counts(prep.cases)
    if counts["I"] + counts["III"] + counts["V"] == 0:
        raise DataError("no observations at or below the splicing point")
    if counts["II"] + counts["IV"] + counts["V"] == 0:
        raise DataError("no observations above the splicing point")
    n = prep.n
    if prep.censored:
        pi0 = float(turnbull_fit(prep.data, cfg.t_lower, cfg.T).cdf(cfg.t))
    else:
        pi0 = counts["I"] / n
    pi0 = min(max(pi0, 0.5 / n), 1.0 - 0.5 / n)

    d = pseudo_data(prep.data, cfg.t_lower, cfg.T)
    d_body = d[d <= cfg.t]
    if d_body.size == 0 or d_body.max() <= 0:
        d_body = np.array([0.5 * (cfg.t_lower + cfg.t)])
    if shapes is None:
        theta0 = float(d_body.max()) / s
        shapes = initial_shapes(d_body, theta0, cfg.M_init if M is None else M)
        alphas = initial_alphas(d_body, shapes, theta0)
        keep = alphas > 0
        shapes, alphas = shapes[keep], alphas[keep]
    else:
        # prescribed shapes: line the largest one up with the data maximum and
        # keep every component alive
        shapes = np.asarray(shapes, dtype=int)
        theta0 = float(d_body.max()) / (s if s is not None else shapes.max())
        alphas = np.maximum(initial_alphas(d_body, shapes, theta0), 0.5 / d_body.size)
        alphas = alphas / alphas.sum()
    d_tail = d[d > cfg.t]
    if d_tail.size:
        gamma0 = float(np.mean(np.log(d_tail / cfg.t)))
    else:
        finite_u = prep.u5[np.isfinite(prep.u5)]
        gamma0 = float(np.mean(np.log(finite_u / cfg.t))) if finite_u.size else 0.5
    if not math.isinf(cfg.T):
        try:
            gamma0 = truncated_pareto_gamma(gamma0, math.log(cfg.T / cfg.t))
        except ConvergenceError:
            pass
    gamma0 = max(gamma0, 1e-3)
    return SplicedModel.build(pi0, alphas, shapes, theta0, gamma0, cfg.t_lower, cfg.t, cfg.T)


# ---------------------------------------------------------------------------
# Fit driver
# ---------------------------------------------------------------------------

@dataclass
class FitReport:
    """Outcome of an EM fit (or of a shape search built from EM fits)."""

    model: SplicedModel
    loglik_trace: list
    iterations: int
    converged: bool
    n: int
    case_counts: dict
    spread: Optional[float] = None
    theta_residuals: list = field(default_factory=list)
    gamma_residuals: list = field(default_factory=list)
    history: Optional[list] = None
    candidates: Optional[dict] = None

    @property
    def loglik(self) -> float:
        return float(self.loglik_trace[-1])

    @property
    def nll(self) -> float:
        return -self.loglik

    @property
    def df(self) -> int:
        return information_criteria(self.loglik, self.model.M, self.n)[2]

    @property
    def aic(self) -> float:
        return information_criteria(self.loglik, self.model.M, self.n)[0]

    @property
    def bic(self) -> float:
        return information_criteria(self.loglik, self.model.M, self.n)[1]

    def ic(self, which: str = "aic") -> float:
        return self.aic if which.lower() == "aic" else self.bic

    @property
    def M(self) -> int:
        return self.model.M

    @property
    def shapes(self) -> np.ndarray:
        return self.model.shapes

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "loglik_trace": [float(v) for v in self.loglik_trace],
            "nll": self.nll,
            "aic": self.aic,
            "bic": self.bic,
            "df": self.df,
            "iterations": self.iterations,
            "converged": self.converged,
            "n": self.n,
            "M": self.M,
            "shapes": self.shapes.tolist(),
            "spread": self.spread,
            "case_counts": dict(self.case_counts),
            "candidates": (None if self.candidates is None
                           else {str(k): float(v) for k, v in self.candidates.items()}),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _changed_enough(ll_new, ll_old, cfg: FitConfig) -> bool:
    diff = abs(ll_new - ll_old)
    if cfg.tol_mode == "relative":
        diff /= abs(ll_old) + 1.0
    return diff >= cfg.em_tol


def _with_shapes(model: SplicedModel, shapes, alphas=None) -> SplicedModel:
    """Same splice and scale with different ME shapes (weights default to uniform)."""
    shapes = np.asarray(shapes, dtype=int)
    if alphas is None:
        alphas = np.full(shapes.size, 1.0 / shapes.size)
    return SplicedModel.build(model.pi, alphas, shapes, model.theta, model.gamma,
                              model.t_lower, model.t, model.T)


def fit(obs, cfg: FitConfig, fixed_shapes=None, start: Optional[SplicedModel] = None,
        spread: Optional[float] = None) -> FitReport:
    """Run the EM algorithm from ``start`` (or from :func:`initialize`).

    Shapes stay fixed during EM: they come from ``start``, ``fixed_shapes`` or
    the initialization.  Iteration stops when the log-likelihood change drops
    below ``cfg.em_tol`` or after ``cfg.max_em_iter`` iterations; hitting the
    limit is reported through ``converged`` rather than raised.
    """
    prep = _prepare(obs, cfg.t_lower, cfg.t, cfg.T)
    s = spread if spread is not None or fixed_shapes is not None else cfg.spread_factors[0]
    if start is None:
        model = initialize(prep, cfg, s, shapes=fixed_shapes)
    elif fixed_shapes is not None and not np.array_equal(start.shapes, fixed_shapes):
        model = _with_shapes(start, fixed_shapes)
    else:
        model = start
    if prep.censored:
        return _run_em(prep, cfg, model, s)
    return _run_em_uncensored(prep, cfg, model, s)


def _report(prep, model, trace, it, converged, s, th_res, g_res):
    return FitReport(model, trace, it, converged, prep.n, case_counts(prep.cases), s,
                     th_res, g_res)


def _run_em(prep: _Prepared, cfg: FitConfig, model: SplicedModel, s) -> FitReport:
    trace = [loglik(prep, model)]
    th_res, g_res = [], []
    converged = False
    it = 0
    for it in range(1, cfg.max_em_iter + 1):
        cache = _e_step(prep, model)
        pi = m_step_pi(cache)
        betas = m_step_beta(cache)
        theta = m_step_theta(cache, betas, model.shapes, model.theta, cfg.t_lower, cfg.t,
                             cfg.newton_tol)
        gamma = m_step_gamma(cache, model.gamma, cfg.t, cfg.T, cfg.newton_tol)
        th_res.append(theta_equation_residual(theta, cache, betas, model.shapes,
                                              cfg.t_lower, cfg.t))
        g_res.append(gamma_equation_residual(gamma, cache, cfg.t, cfg.T))
        model = _update(model, pi, betas, theta, gamma)
        trace.append(loglik(prep, model))
        if not _changed_enough(trace[-1], trace[-2], cfg):
            converged = True
            break
    if not converged:
        log.warning("EM stopped at max_em_iter=%d without meeting em_tol", cfg.max_em_iter)
    return _report(prep, model, trace, it, converged, s, th_res, g_res)


def _update(model, pi, betas, theta, gamma) -> SplicedModel:
    keep = betas > 0
    shapes = model.shapes
    if not np.all(keep):
        betas, shapes = betas[keep], shapes[keep]
    body = MEParams.from_betas(betas, shapes, theta, model.t_lower, model.t)
    return SplicedModel(float(pi), body, ParetoParams(float(gamma), model.t), model.t_lower,
                        model.t, model.T)


def _run_em_uncensored(prep: _Prepared, cfg: FitConfig, model: SplicedModel, s) -> FitReport:
    """Exact data only: ``pi`` and ``gamma`` are fixed in one step, EM runs on the body."""
    pi = prep.x1.size / prep.n
    H = float(np.mean(np.log(prep.x2 / cfg.t)))
    gamma = H if math.isinf(cfg.T) else truncated_pareto_gamma(H, math.log(cfg.T / cfg.t),
                                                                gamma0=model.gamma)
    model = _update(model, pi, model.body.betas, model.theta, gamma)
    trace = [loglik(prep, model)]
    th_res, g_res = [], []
    converged = False
    it = 0
    for it in range(1, cfg.max_em_iter + 1):
        cache = _e_step(prep, model)
        betas = m_step_beta(cache)
        theta = m_step_theta(cache, betas, model.shapes, model.theta, cfg.t_lower, cfg.t,
                             cfg.newton_tol)
        th_res.append(theta_equation_residual(theta, cache, betas, model.shapes,
                                              cfg.t_lower, cfg.t))
        g_res.append(gamma_equation_residual(gamma, cache, cfg.t, cfg.T))
        model = _update(model, pi, betas, theta, gamma)
        trace.append(loglik(prep, model))
        if not _changed_enough(trace[-1], trace[-2], cfg):
            converged = True
            break
    return _report(prep, model, trace, it, converged, s, th_res, g_res)
