"""Extreme value tools: Hill estimator, mean excess values and endpoint estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._roots import safeguarded_newton
from .data import as_data, turnbull_fit, turnbull_quantile
from .exceptions import DataError


def hill(x, t: float) -> float:
    """Mean log-excess of the points strictly above ``t``."""
    x = np.asarray(x, dtype=float)
    exc = x[x > t]
    if exc.size == 0:
        raise DataError(f"no observations above threshold {t}")
    return float(np.mean(np.log(exc / t)))


def truncated_pareto_gamma(mean_log_excess: float, log_ratio: float, gamma0=None, rtol=1e-12):
    """Solve ``g = H + L / (exp(L/g) - 1)`` for the truncated Pareto shape.

    ``H`` is the mean log-excess over ``t`` and ``L = ln(T/t)``.  ``L = inf``
    gives ``g = H``.  A root exists only when ``H < L/2``.
    """
    H, L = float(mean_log_excess), float(log_ratio)
    if math.isinf(L):
        return H

    def fun(g):
        a = L / g
        ea = math.exp(-a)
        den = -math.expm1(-a)
        # L / (e^a - 1) and its derivative in g, written with e^-a to avoid overflow
        corr = L * ea / den
        dcorr = L * a / g * ea / den**2
        return g - H - corr, 1.0 - dcorr

    g0 = H if gamma0 is None else gamma0
    return safeguarded_newton(fun, g0, 1e-8, 100.0, rtol=rtol)


def truncated_gamma_residual(g, mean_log_excess, log_ratio):
    if math.isinf(log_ratio):
        return g - mean_log_excess
    a = log_ratio / g
    return g - mean_log_excess - log_ratio * math.exp(-a) / -math.expm1(-a)


@dataclass(frozen=True)
class MeanExcessPoints:
    k: np.ndarray
    thresholds: np.ndarray
    excess: np.ndarray

    def to_csv(self, stream) -> None:
        stream.write("k,v,e_hat\n")
        for k, v, e in zip(self.k, self.thresholds, self.excess):
            stream.write(f"{int(k)},{float(v)!r},{float(e)!r}\n")


def mean_excess_at(x, v) -> np.ndarray:
    """Empirical mean excess of exact data ``x`` at thresholds ``v`` (strict exceedances)."""
    xs = np.sort(np.asarray(x, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    csum = np.concatenate([[0.0], np.cumsum(xs)])
    idx = np.searchsorted(xs, v, side="right")
    cnt = xs.size - idx
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(cnt > 0, (csum[-1] - csum[idx]) / cnt - v, np.nan)


def _turnbull_mean_excess(est, v):
    """``int_v^inf (1 - F) / (1 - F(v))`` for the Turnbull step CDF.

    Mass sits at the left endpoints of the support intervals, so mass on an
    unbounded last interval counts as sitting at its left end.
    """
    pts, m = est.left, est.masses
    out = np.full(v.shape, np.nan)
    for i, vi in enumerate(v):
        above = pts > vi
        s = m[above].sum()
        if s <= 1e-14:
            continue
        out[i] = float(np.sum(m[above] * (pts[above] - vi)) / s)
    return out


def mean_excess(obs, use_turnbull: bool = False, t_lower=0.0) -> MeanExcessPoints:
    """Mean excess values at the empirical (or Turnbull) quantiles ``(n-k)/(n+1)``.

    Points where the estimated survival at the threshold is zero are omitted.
    """
    data = as_data(obs)
    n = len(data)
    if n < 3:
        raise DataError("mean excess needs at least three observations")
    k = np.arange(1, n)
    if not use_turnbull:
        xs = np.sort(data.exact_values())
        v = xs[n - k - 1]
        e = mean_excess_at(xs, v)
    else:
        est = turnbull_fit(data, t_lower=t_lower)
        v = turnbull_quantile(est, (n - k) / (n + 1))
        e = _turnbull_mean_excess(est, np.asarray(v, dtype=float))
    keep = np.isfinite(e)
    return MeanExcessPoints(k[keep], np.asarray(v)[keep], e[keep])


def _upper_order_stats(x, k):
    xs = np.sort(np.asarray(x, dtype=float))
    n = xs.size
    if not 1 <= k < n:
        raise DataError("need 1 <= k < n")
    return xs, n, xs[n - k - 1], xs[-1]


def endpoint_gamma(x, k: int) -> float:
    """Conditional MLE of the Pareto shape when the endpoint is the sample maximum.

    Solves ``g = H_{k,n} + ln(R) / (R^(1/g) - 1)`` with ``R = x_{n,n} / x_{n-k,n}``.
    """
    xs, n, thr, xmax = _upper_order_stats(x, k)
    if xmax == thr:
        raise DataError("largest observation equals the threshold order statistic")
    H = float(np.mean(np.log(xs[n - k:] / thr)))
    return truncated_pareto_gamma(H, math.log(xmax / thr))


def truncation_odds(x, k: int, gamma_hat: float) -> tuple[float, float]:
    """Truncation odds ``D_T`` and re-estimated endpoint ``T``.

    Returns ``(D_hat, T_hat)``; ``T_hat`` is the sample maximum whenever
    ``D_hat`` is clamped to zero.
    """
    xs, n, thr, xmax = _upper_order_stats(x, k)
    ratio = (thr / xmax) ** (1.0 / gamma_hat)
    if ratio >= 1.0:
        return 0.0, float(xmax)
    D = max((k / n) * (ratio - 1.0 / (k + 1)) / (1.0 - ratio), 0.0)
    if D == 0.0:
        return 0.0, float(xmax)
    T = thr * (1.0 + k / (n * D)) ** gamma_hat
    return float(D), float(max(T, xmax))
