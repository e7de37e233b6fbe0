"""Shared simulation utilities for the test suite."""

import math
from pathlib import Path

import numpy as np
from scipy import stats
from scipy.optimize import brentq

from splice_em.data import CensoredData, parse_observations
from splice_em.model import SplicedModel, sample

DATA_DIR = Path(__file__).parent / "data"
DANISH = DATA_DIR / "danish.csv"


def load_danish():
    return CensoredData.from_observations(parse_observations(str(DANISH)))


def me_quantile(p, alphas, shapes, theta):
    """Quantile of an untruncated mixed Erlang by root finding on scipy's gamma CDF."""
    f = lambda x: sum(a * stats.gamma.cdf(x, r, scale=theta) for a, r in zip(alphas, shapes)) - p
    return brentq(f, 1e-12, 1e4, xtol=1e-14)


def recovery_model():
    """pi=0.9, r=(1,4), theta=1, gamma=0.5, t at the 0.9 quantile of the ME."""
    t = me_quantile(0.9, [0.5, 0.5], [1, 4], 1.0)
    return SplicedModel.build(0.9, [0.5, 0.5], [1, 4], 1.0, 0.5, 0.0, t)


def grid_censor(x, rng, frac, t_lower=0.0, T=math.inf, width=(0.5, 3.0)):
    """Interval-censor ``round(frac * n)`` randomly chosen points of ``x`` on a shifted grid.

    Each censored point is replaced by the grid cell containing it; cell width
    and offset are drawn independently of ``x`` so the coarsening is
    non-informative.
    """
    n = x.size
    cens = np.zeros(n, dtype=bool)
    cens[rng.choice(n, size=round(frac * n), replace=False)] = True
    h = rng.uniform(*width, n)
    o = rng.uniform(0.0, h, n)
    cell = o + np.floor((x - o) / h) * h
    lo = np.maximum(cell, t_lower)
    up = np.minimum(cell + h, T)
    return CensoredData(np.where(cens, lo, x), np.where(cens, up, x))


def mixed_censor(x, rng, t_lower=0.0, T=math.inf):
    """Exact, interval, right- and left-censored observations in roughly equal shares."""
    n = x.size
    kind = rng.integers(0, 4, n)
    h = rng.uniform(0.5, 4.0, n)
    o = rng.uniform(0.0, h, n)
    cell = o + np.floor((x - o) / h) * h
    c = rng.uniform(t_lower, 3.0 * np.median(x), n)
    lo, up = x.copy(), x.copy()
    iv = kind == 1
    lo[iv] = np.maximum(cell[iv], t_lower)
    up[iv] = np.minimum(cell[iv] + h[iv], T)
    rc = (kind == 2) & (x > c)
    lo[rc], up[rc] = c[rc], math.inf
    lc = (kind == 3) & (x <= c) & (c > t_lower)
    lo[lc], up[lc] = t_lower, np.minimum(c[lc], T)
    return CensoredData(lo, up)


def mixed_model(seed):
    tl = (0.0, 0.5)[seed % 2]
    T = (math.inf, 80.0)[(seed // 2) % 2]
    return SplicedModel.build(0.85, [0.6, 0.4], [2, 6], 0.8, 0.6, tl, 6.0, T)


def censored_sample(model, n, seed, frac=0.3):
    rng = np.random.default_rng(seed)
    x = sample(model, n, rng)
    return grid_censor(x, rng, frac, model.t_lower, model.T)
