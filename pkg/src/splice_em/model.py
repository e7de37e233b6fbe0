"""Erlang, mixed Erlang, truncated Pareto and spliced ME-Pareto distributions.

The spliced model puts weight ``pi`` on a mixed Erlang body truncated to
``(t_lower, t]`` and weight ``1 - pi`` on a Pareto tail with scale ``t``,
optionally upper truncated at ``T``.  ``T = math.inf`` means no upper
truncation; every formula branches on it explicitly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammainc, gammaincc, gammaincinv, gammainccinv, gammaln

from .exceptions import DegenerateWindowError

INF = math.inf


# ---------------------------------------------------------------------------
# Erlang building blocks
# ---------------------------------------------------------------------------

def _check_finite(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise ValueError("x must not contain NaN")
    return x


def erlang_cdf(x, r, theta):
    """Erlang CDF ``F_E(x; r, theta)`` via the regularized lower incomplete gamma.

    Parameters
    ----------
    x : array_like
        Evaluation points (``+inf`` allowed, NaN is rejected).
    r : int or array_like of int
        Shape(s), ``r >= 1``.
    theta : float
        Common scale, ``theta > 0``.
    """
    x = _check_finite(x)
    if np.any(np.isinf(x) & (x < 0)):
        raise ValueError("x must not be -inf")
    if theta <= 0:
        raise ValueError("theta must be positive")
    return gammainc(r, np.maximum(x, 0.0) / theta)


def erlang_sf(x, r, theta):
    """Erlang survival function ``1 - F_E``, accurate in the upper tail."""
    x = _check_finite(x)
    return gammaincc(r, np.maximum(x, 0.0) / theta)


def erlang_logpdf(x, r, theta):
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (r - 1.0) * np.log(x) - x / theta - r * math.log(theta) - gammaln(r)
    # x**0 is 1 at x = 0 for the exponential component
    out = np.where((x == 0) & (r == 1), -math.log(theta), out)
    return np.where(x < 0, -np.inf, out)


def erlang_pdf(x, r, theta):
    """Erlang density ``x^(r-1) exp(-x/theta) / (theta^r (r-1)!)``, log-space internally."""
    x = _check_finite(x)
    if theta <= 0:
        raise ValueError("theta must be positive")
    return np.exp(erlang_logpdf(x, r, theta))


def erlang_mass(lower, upper, r, theta):
    """``F_E(upper) - F_E(lower)`` without cancellation in either tail.

    Broadcasts ``lower``/``upper`` against ``r``.  Below the component mean the
    lower regularized gamma is differenced, above it the upper one.
    """
    lower = np.maximum(np.asarray(lower, dtype=float), 0.0) / theta
    upper = np.maximum(np.asarray(upper, dtype=float), 0.0) / theta
    r = np.asarray(r, dtype=float)
    use_sf = lower > r
    p = gammainc(r, upper) - gammainc(r, lower)
    q = gammaincc(r, lower) - gammaincc(r, upper)
    return np.maximum(np.where(use_sf, q, p), 0.0)


# ---------------------------------------------------------------------------
# Weight transforms
# ---------------------------------------------------------------------------

def _window_masses(shapes, theta, t_lower, t):
    masses = erlang_mass(t_lower, t, np.asarray(shapes), theta)
    if np.all(masses <= 0):
        raise DegenerateWindowError(
            f"no Erlang component has mass on ({t_lower}, {t}] with theta={theta}"
        )
    return masses


def alpha_to_beta(alphas, shapes, theta, t_lower, t):
    """Reweight untruncated mixing weights to the weights of the truncated mixture."""
    alphas = np.asarray(alphas, dtype=float)
    w = alphas * _window_masses(shapes, theta, t_lower, t)
    total = w.sum()
    if total <= 0:
        raise DegenerateWindowError("truncation window carries no mixture mass")
    return w / total


def beta_to_alpha(betas, shapes, theta, t_lower, t):
    """Inverse of :func:`alpha_to_beta`."""
    betas = np.asarray(betas, dtype=float)
    masses = _window_masses(shapes, theta, t_lower, t)
    if np.any(masses[betas > 0] <= 0):
        raise DegenerateWindowError("component with positive weight has zero window mass")
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(betas > 0, betas / masses, 0.0)
    return w / w.sum()


# ---------------------------------------------------------------------------
# Parameter containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MEParams:
    """Mixed Erlang parameters in both weight parametrizations.

    ``betas`` are the weights of the mixture truncated to the body window; they
    always match ``alphas`` through :func:`alpha_to_beta`.  Build instances with
    :meth:`from_alphas` or :meth:`from_betas` rather than by hand.
    """

    alphas: np.ndarray
    betas: np.ndarray
    shapes: np.ndarray
    theta: float

    def __post_init__(self):
        shapes = np.asarray(self.shapes)
        if shapes.ndim != 1 or shapes.size == 0:
            raise ValueError("shapes must be a non-empty vector")
        if np.any(shapes < 1) or np.any(np.diff(shapes) <= 0):
            raise ValueError("shapes must be strictly increasing positive integers")
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        for name in ("alphas", "betas"):
            w = np.asarray(getattr(self, name), dtype=float)
            if w.shape != shapes.shape:
                raise ValueError(f"{name} must have one entry per shape")
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
                raise ValueError(f"{name} must be a probability vector")
        object.__setattr__(self, "shapes", shapes.astype(int))
        object.__setattr__(self, "alphas", np.asarray(self.alphas, dtype=float))
        object.__setattr__(self, "betas", np.asarray(self.betas, dtype=float))
        object.__setattr__(self, "theta", float(self.theta))

    @property
    def M(self) -> int:
        return int(self.shapes.size)

    @classmethod
    def from_alphas(cls, alphas, shapes, theta, t_lower, t) -> "MEParams":
        alphas = np.asarray(alphas, dtype=float)
        alphas = alphas / alphas.sum()
        betas = alpha_to_beta(alphas, shapes, theta, t_lower, t)
        return cls(alphas, betas, np.asarray(shapes), theta)

    @classmethod
    def from_betas(cls, betas, shapes, theta, t_lower, t) -> "MEParams":
        betas = np.asarray(betas, dtype=float)
        betas = betas / betas.sum()
        alphas = beta_to_alpha(betas, shapes, theta, t_lower, t)
        return cls(alphas, betas, np.asarray(shapes), theta)


@dataclass(frozen=True)
class ParetoParams:
    gamma: float
    scale_t: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.scale_t > 0:
            raise ValueError("Pareto scale must be positive")


# ---------------------------------------------------------------------------
# Truncated components
# ---------------------------------------------------------------------------

def truncated_me_cdf(x, me: MEParams, t_lower, t):
    """CDF of the mixed Erlang truncated to ``(t_lower, t]``."""
    x = _check_finite(x)
    xc = np.clip(x, t_lower, t)
    num = erlang_mass(t_lower, xc[..., None], me.shapes, me.theta)
    den = erlang_mass(t_lower, t, me.shapes, me.theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        comp = np.where(den > 0, num / den, 0.0)
    out = comp @ me.betas
    out = np.where(x <= t_lower, 0.0, out)
    return np.clip(np.where(x >= t, 1.0, out), 0.0, 1.0)


def truncated_me_sf(x, me: MEParams, t_lower, t):
    """``1 - truncated_me_cdf`` computed from upper window masses."""
    x = _check_finite(x)
    xc = np.clip(x, t_lower, t)
    num = erlang_mass(xc[..., None], t, me.shapes, me.theta)
    den = erlang_mass(t_lower, t, me.shapes, me.theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        comp = np.where(den > 0, num / den, 0.0)
    out = comp @ me.betas
    out = np.where(x <= t_lower, 1.0, out)
    return np.clip(np.where(x >= t, 0.0, out), 0.0, 1.0)


def truncated_me_pdf(x, me: MEParams, t_lower, t):
    x = _check_finite(x)
    den = erlang_mass(t_lower, t, me.shapes, me.theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        comp = np.exp(erlang_logpdf(x[..., None], me.shapes, me.theta)) / den
    comp = np.where(den > 0, comp, 0.0)
    out = comp @ me.betas
    return np.where((x < t_lower) | (x > t), 0.0, out)


def _pareto_tail_ratio(x, t, gamma):
    """``(x/t)^(-1/gamma)``, equal to 0 at ``x = inf``."""
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(np.isinf(x), 0.0, np.power(np.asarray(x, dtype=float) / t, -1.0 / gamma))


def pareto_trunc_cdf(x, p: ParetoParams, T=INF):
    """CDF of the Pareto with scale ``t`` truncated at ``T``."""
    x = _check_finite(x)
    t, g = p.scale_t, p.gamma
    xc = np.maximum(x, t)
    num = -np.expm1(-np.log(xc / t) / g)
    if math.isinf(T):
        out = num
    else:
        out = num / (-math.expm1(-math.log(T / t) / g))
        out = np.where(x >= T, 1.0, out)
    return np.clip(np.where(x <= t, 0.0, out), 0.0, 1.0)


def pareto_trunc_sf(x, p: ParetoParams, T=INF):
    x = _check_finite(x)
    t, g = p.scale_t, p.gamma
    xc = np.maximum(x, t)
    upper = _pareto_tail_ratio(xc, t, g)
    if math.isinf(T):
        out = upper
    else:
        tT = (T / t) ** (-1.0 / g)
        out = (np.maximum(upper - tT, 0.0)) / (1.0 - tT)
        out = np.where(x >= T, 0.0, out)
    return np.clip(np.where(x <= t, 1.0, out), 0.0, 1.0)


def pareto_trunc_pdf(x, p: ParetoParams, T=INF):
    x = _check_finite(x)
    t, g = p.scale_t, p.gamma
    xc = np.maximum(x, t)
    with np.errstate(over="ignore"):
        dens = np.where(np.isinf(xc), 0.0, (xc / t) ** (-1.0 / g - 1.0) / (g * t))
    if not math.isinf(T):
        dens = dens / (-math.expm1(-math.log(T / t) / g))
    return np.where((x < t) | (x > T), 0.0, dens)


# ---------------------------------------------------------------------------
# Spliced model
# ---------------------------------------------------------------------------

def _fmt_bound(v: float):
    return "inf" if math.isinf(v) else v


def _parse_bound(v) -> float:
    if isinstance(v, str):
        if v.strip().lower() in ("inf", "+inf", "infinity"):
            return INF
        return float(v)
    return float(v)


@dataclass(frozen=True)
class SplicedModel:
    """Mixed Erlang body on ``(t_lower, t]`` spliced with a Pareto tail on ``(t, T)``."""

    pi: float
    body: MEParams
    tail: ParetoParams
    t_lower: float
    t: float
    T: float = INF

    def __post_init__(self):
        if not 0.0 < self.pi < 1.0:
            raise ValueError("pi must lie strictly between 0 and 1")
        if not 0.0 <= self.t_lower < self.t < self.T:
            raise ValueError("need 0 <= t_lower < t < T")
        if not math.isclose(self.tail.scale_t, self.t):
            raise ValueError("Pareto scale must equal the splicing point")
        expected = alpha_to_beta(self.body.alphas, self.body.shapes, self.body.theta,
                                 self.t_lower, self.t)
        if not np.allclose(expected, self.body.betas, rtol=1e-6, atol=1e-9):
            raise ValueError("betas do not match alphas for this truncation window")

    @classmethod
    def build(cls, pi, alphas, shapes, theta, gamma, t_lower, t, T=INF) -> "SplicedModel":
        """Convenience constructor from untruncated weights ``alphas``."""
        body = MEParams.from_alphas(alphas, shapes, theta, t_lower, t)
        return cls(float(pi), body, ParetoParams(float(gamma), float(t)), float(t_lower),
                   float(t), float(T))

    @classmethod
    def build_from_betas(cls, pi, betas, shapes, theta, gamma, t_lower, t, T=INF):
        body = MEParams.from_betas(betas, shapes, theta, t_lower, t)
        return cls(float(pi), body, ParetoParams(float(gamma), float(t)), float(t_lower),
                   float(t), float(T))

    @property
    def gamma(self) -> float:
        return self.tail.gamma

    @property
    def theta(self) -> float:
        return self.body.theta

    @property
    def shapes(self) -> np.ndarray:
        return self.body.shapes

    @property
    def M(self) -> int:
        return self.body.M

    def cdf(self, x):
        return splice_cdf(x, self)

    def sf(self, x):
        return splice_sf(x, self)

    def pdf(self, x):
        return splice_pdf(x, self)

    def ppf(self, p):
        return splice_quantile(p, self)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "pi": self.pi,
            "alphas": self.body.alphas.tolist(),
            "betas": self.body.betas.tolist(),
            "shapes": self.body.shapes.tolist(),
            "theta": self.body.theta,
            "gamma": self.tail.gamma,
            "t_lower": self.t_lower,
            "t": self.t,
            "T": _fmt_bound(self.T),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplicedModel":
        body = MEParams(np.asarray(d["alphas"], dtype=float), np.asarray(d["betas"], dtype=float),
                        np.asarray(d["shapes"], dtype=int), float(d["theta"]))
        t = float(d["t"])
        return cls(float(d["pi"]), body, ParetoParams(float(d["gamma"]), t),
                   float(d["t_lower"]), t, _parse_bound(d["T"]))

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "SplicedModel":
        return cls.from_dict(json.loads(text))


def splice_cdf(x, model: SplicedModel):
    x = _check_finite(x)
    body = model.pi * truncated_me_cdf(x, model.body, model.t_lower, model.t)
    tail = model.pi + (1.0 - model.pi) * pareto_trunc_cdf(x, model.tail, model.T)
    out = np.where(x <= model.t, body, tail)
    return np.where(x >= model.T, 1.0, out)


def splice_sf(x, model: SplicedModel):
    """``1 - splice_cdf`` without cancellation in the far tail."""
    x = _check_finite(x)
    body = (1.0 - model.pi) + model.pi * truncated_me_sf(x, model.body, model.t_lower, model.t)
    tail = (1.0 - model.pi) * pareto_trunc_sf(x, model.tail, model.T)
    out = np.where(x <= model.t, body, tail)
    return np.where(x >= model.T, 0.0, out)


def splice_pdf(x, model: SplicedModel):
    x = _check_finite(x)
    body = model.pi * truncated_me_pdf(x, model.body, model.t_lower, model.t)
    tail = (1.0 - model.pi) * pareto_trunc_pdf(x, model.tail, model.T)
    out = np.where(x <= model.t, body, tail)
    return np.where((x <= model.t_lower) | (x >= model.T), 0.0, out)


def pareto_trunc_quantile(q, p: ParetoParams, T=INF):
    """Closed-form quantile of the truncated Pareto."""
    q = np.asarray(q, dtype=float)
    t, g = p.scale_t, p.gamma
    tT = 0.0 if math.isinf(T) else (T / t) ** (-1.0 / g)
    with np.errstate(divide="ignore"):
        return np.clip(t * np.power(1.0 - q + q * tT, -g), t, T)


def _body_quantile(q, model: SplicedModel, rtol=1e-12, max_iter=200):
    """Invert the truncated ME CDF on ``[t_lower, t]``: bisection safeguarding Newton."""
    q = np.asarray(q, dtype=float)
    lo = np.full(q.shape, float(model.t_lower))
    hi = np.full(q.shape, float(model.t))
    x = 0.5 * (lo + hi)
    me, tl, t = model.body, model.t_lower, model.t
    done = (q <= 0) | (q >= 1)
    for _ in range(max_iter):
        f = truncated_me_cdf(x, me, tl, t) - q
        lo = np.where(f < 0, x, lo)
        hi = np.where(f > 0, x, hi)
        d = truncated_me_pdf(x, me, tl, t)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(d > 0, f / d, np.nan)
        x_new = x - step
        bad = ~np.isfinite(x_new) | (x_new <= lo) | (x_new >= hi)
        x_new = np.where(bad, 0.5 * (lo + hi), x_new)
        conv = np.abs(x_new - x) <= rtol * np.maximum(np.abs(x_new), 1e-300)
        conv |= (hi - lo) <= rtol * np.maximum(hi, 1e-300)
        conv |= f == 0
        x = np.where(done, x, x_new)
        done |= conv
        if np.all(done):
            break
    x = np.where(q <= 0, tl, x)
    return np.where(q >= 1, t, x)


def splice_quantile(p, model: SplicedModel):
    """Quantile function of the spliced distribution.

    The body is inverted numerically on ``[t_lower, t]``; the tail uses the
    closed-form truncated Pareto quantile.
    """
    p_arr = np.asarray(p, dtype=float)
    if np.any(np.isnan(p_arr)) or np.any((p_arr < 0) | (p_arr > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    pi = model.pi
    body = _body_quantile(np.minimum(p_arr / pi, 1.0), model)
    q = np.clip((p_arr - pi) / (1.0 - pi), 0.0, 1.0)
    tail = pareto_trunc_quantile(q, model.tail, model.T)
    out = np.where(p_arr <= pi, body, tail)
    if np.ndim(p) == 0:
        return float(out)
    return out


def _sample_truncated_erlang(rng, r, theta, lower, upper, size):
    """Inverse-CDF draws from an Erlang restricted to ``(lower, upper]``."""
    u = rng.random(size)
    a, b = lower / theta, upper / theta
    if a > r:
        qa, qb = gammaincc(r, a), gammaincc(r, b)
        x = gammainccinv(r, qa - u * (qa - qb))
    else:
        pa, pb = gammainc(r, a), gammainc(r, b)
        x = gammaincinv(r, pa + u * (pb - pa))
    return np.clip(x * theta, lower, upper)


def sample(model: SplicedModel, n: int, rng_seed=None) -> np.ndarray:
    """Draw ``n`` i.i.d. losses from the spliced model.

    ``rng_seed`` may be an int, ``None`` or a :class:`numpy.random.Generator`.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    out = np.empty(n)
    in_body = rng.random(n) < model.pi
    n_body = int(in_body.sum())
    comp = rng.choice(model.M, size=n_body, p=model.body.betas)
    body = np.empty(n_body)
    for j, r in enumerate(model.body.shapes):
        sel = comp == j
        body[sel] = _sample_truncated_erlang(rng, int(r), model.theta, model.t_lower, model.t,
                                             int(sel.sum()))
    out[in_body] = body
    n_tail = n - n_body
    out[~in_body] = pareto_trunc_quantile(rng.random(n_tail), model.tail, model.T)
    return out


def dense_alphas(alphas: Sequence[float], shapes: Sequence[int]) -> np.ndarray:
    """Expand weights on sparse shapes to a dense vector indexed by shape ``1..max(shapes)``."""
    shapes = np.asarray(shapes, dtype=int)
    dense = np.zeros(int(shapes.max()))
    dense[shapes - 1] = np.asarray(alphas, dtype=float)
    return dense
