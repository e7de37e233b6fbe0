"""Excess-loss premiums, VaR and TVaR of a fitted spliced model."""

from __future__ import annotations

import math

import numpy as np

from .exceptions import InfiniteMeanError
from .model import SplicedModel, dense_alphas, erlang_cdf, erlang_logpdf, splice_quantile


def premium_me_star(R, alphas, theta, shapes=None):
    """Stop-loss premium ``E(X - R)_+`` of an untruncated mixed Erlang distribution.

    Parameters
    ----------
    R : float or array_like
        Retention(s), non-negative.
    alphas : array_like
        Mixing weights.  Dense over shapes ``1..M`` unless ``shapes`` is given,
        in which case they are expanded with zeros first.
    theta : float
        Common scale.

    Notes
    -----
    The Erlang(k) survival function is ``theta * sum_{m<=k} f(x; m)``, so
    ``E(X - R)_+ = theta^2 * sum_m c_m f(R; m)`` with
    ``c_m = sum_{k=m}^{M} sum_{j=k}^{M} alpha_j``.
    """
    a = dense_alphas(alphas, shapes) if shapes is not None else np.asarray(alphas, dtype=float)
    tail = np.cumsum(a[::-1])[::-1]         # sum_{j>=k} alpha_j
    coef = np.cumsum(tail[::-1])[::-1]      # sum_{k>=m} of the above
    m = np.arange(1, a.size + 1)
    R = np.asarray(R, dtype=float)
    dens = np.exp(erlang_logpdf(R[..., None], m, theta))
    return theta**2 * (dens @ coef)


def premium_pareto_star(R, t, gamma):
    """``int_R^inf (z/t)^(-1/gamma) dz`` for ``R >= t``.

    Raises
    ------
    InfiniteMeanError
        If ``gamma >= 1``.
    """
    if gamma >= 1:
        raise InfiniteMeanError("infinite-mean tail: gamma >= 1 with no upper truncation")
    R = np.asarray(R, dtype=float)
    return np.power(R, 1.0 - 1.0 / gamma) * t ** (1.0 / gamma) / (1.0 / gamma - 1.0)


def _pareto_sf_integral(R, T, t, gamma):
    """``int_R^T (z/t)^(-1/gamma) dz`` for ``t <= R <= T < inf``, any ``gamma > 0``."""
    a = 1.0 - 1.0 / gamma
    R = np.asarray(R, dtype=float)
    lr = np.log(T / R)
    if abs(a) < 1e-12:
        return t * lr
    return t * np.power(R / t, a) * np.expm1(a * lr) / a


def _pareto_part(R, model: SplicedModel):
    """Premium of the truncated Pareto component for ``t <= R <= T``."""
    t, g, T = model.t, model.gamma, model.T
    if math.isinf(T):
        return premium_pareto_star(R, t, g)
    sf_T = (T / t) ** (-1.0 / g)
    F_T = -math.expm1(-math.log(T / t) / g)
    return (_pareto_sf_integral(R, T, t, g) - sf_T * (T - np.asarray(R))) / F_T


def _me_part(R, model: SplicedModel):
    """Premium of the truncated ME component for ``t_lower <= R <= t``."""
    me, tl, t = model.body, model.t_lower, model.t
    a = dense_alphas(me.alphas, me.shapes)
    m = np.arange(1, a.size + 1)
    F_t = float(a @ erlang_cdf(t, m, me.theta))
    F_tl = float(a @ erlang_cdf(tl, m, me.theta)) if tl > 0 else 0.0
    star_R = premium_me_star(R, a, me.theta)
    star_t = float(premium_me_star(t, a, me.theta))
    return ((F_t - 1.0) * (t - np.asarray(R)) + star_R - star_t) / (F_t - F_tl)


def premium(R, model: SplicedModel):
    """Net premium ``E(X - R)_+`` of an excess-loss contract with retention ``R``.

    Raises
    ------
    InfiniteMeanError
        If the tail has ``gamma >= 1`` and no upper truncation.
    """
    if math.isinf(model.T) and model.gamma >= 1:
        raise InfiniteMeanError("infinite-mean tail: gamma >= 1 with no upper truncation")
    scalar = np.ndim(R) == 0
    R = np.atleast_1d(np.asarray(R, dtype=float))
    if np.any(~np.isfinite(R)):
        raise ValueError("retention must be finite")
    pi, tl, t, T = model.pi, model.t_lower, model.t, model.T
    out = np.zeros(R.shape)
    tail = (R >= t) & (R < T)
    out[tail] = (1.0 - pi) * _pareto_part(R[tail], model)
    body = R < t
    if np.any(body):
        Rb = np.maximum(R[body], tl)
        at_t = float(_pareto_part(np.array([t]), model)[0])
        out[body] = ((1.0 - pi) * (t - Rb) + pi * _me_part(Rb, model)
                     + (1.0 - pi) * at_t + (Rb - R[body]))
    out = np.maximum(out, 0.0)
    return float(out[0]) if scalar else out


def var(p, model: SplicedModel):
    """Value-at-Risk at level ``1 - p``: the ``(1 - p)``-quantile."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("p must lie in (0, 1)")
    return splice_quantile(1.0 - p, model)


def tvar(p, model: SplicedModel):
    """Tail Value-at-Risk ``E(X | X > VaR_{1-p}) = VaR + premium(VaR) / p``."""
    v = var(p, model)
    return v + premium(v, model) / np.asarray(p, dtype=float)
