"""Goodness-of-fit statistics, bootstrap p-values and plot point sets."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .data import as_data, turnbull_fit, turnbull_quantile
from .em import FitConfig, FitReport, fit
from .exceptions import ConvergenceError, DataError, SpliceError
from .model import SplicedModel, splice_cdf, splice_quantile
from .shape_search import SearchConfig, search

log = logging.getLogger(__name__)

PLOT_KINDS = ("survival", "qq", "pp", "pp_minuslog")


def dkw_halfwidth(n: int, level: float = 0.05) -> float:
    """Half-width of the Dvoretzky-Kiefer-Wolfowitz confidence band."""
    return math.sqrt(math.log(2.0 / level) / (2.0 * n))


def _above_truncation(x, model, include_boundary):
    xs = np.sort(np.asarray(x, dtype=float))
    if not include_boundary:
        xs = xs[xs > model.t_lower]
    if xs.size == 0:
        raise DataError("no observations above the lower truncation point")
    return xs


def ks_stat(x, model: SplicedModel, include_boundary: bool = False) -> float:
    """Kolmogorov-Smirnov distance between the ECDF of ``x`` and the model CDF.

    The supremum is evaluated exactly at the jump points of the ECDF.
    Observations equal to the lower truncation point carry no model
    probability and are left out unless ``include_boundary`` is set.
    """
    xs = _above_truncation(x, model, include_boundary)
    n = xs.size
    F = splice_cdf(xs, model)
    # at a run of ties only the outermost ECDF levels matter
    hi = np.searchsorted(xs, xs, side="right") / n
    lo = np.searchsorted(xs, xs, side="left") / n
    return float(max(np.max(np.abs(hi - F)), np.max(np.abs(lo - F))))


def ad_stat(x, model: SplicedModel, include_boundary: bool = False) -> float:
    """Anderson-Darling statistic from the rank formula on ``U = F(x)``.

    ``U`` is clamped to ``[1e-12, 1 - 1e-12]``.  As in :func:`ks_stat`,
    observations at the lower truncation point are dropped by default.
    """
    xs = _above_truncation(x, model, include_boundary)
    n = xs.size
    u = np.clip(splice_cdf(xs, model), 1e-12, 1.0 - 1e-12)
    i = np.arange(1, n + 1)
    return float(-n - np.sum((2 * i - 1) * (np.log(u) + np.log1p(-u[::-1]))) / n)


@dataclass(frozen=True)
class PlotData:
    """Named columns of a diagnostic plot."""

    kind: str
    columns: dict

    def to_csv(self, stream) -> None:
        names = list(self.columns)
        stream.write(",".join(names) + "\n")
        for row in zip(*(self.columns[k] for k in names)):
            stream.write(",".join(repr(float(v)) for v in row) + "\n")


def _empirical(obs, model):
    """Support points, empirical CDF there, and the Turnbull estimate if censored."""
    data = as_data(obs)
    if data.fully_uncensored:
        xs = np.sort(data.lower)
        n = xs.size
        F_hat = np.searchsorted(xs, xs, side="right") / n
        return xs, F_hat, None
    est = turnbull_fit(data, model.t_lower, model.T)
    keep = np.isfinite(est.right)
    return est.right[keep], np.minimum(est._cumulative()[keep], 1.0), est


def plot_data(obs, model: SplicedModel, kind: str = "survival") -> PlotData:
    """Point sets for survival, QQ and PP plots.

    Censored data are summarized by the Turnbull estimator.  The survival
    plot carries a 95% DKW band only for uncensored data.
    """
    if kind not in PLOT_KINDS:
        raise ValueError(f"kind must be one of {PLOT_KINDS}")
    data = as_data(obs)
    n = len(data)
    x, F_hat, est = _empirical(data, model)
    if kind == "survival":
        cols = {"x": x, "empirical": 1.0 - F_hat, "fitted": 1.0 - splice_cdf(x, model)}
        if est is None:
            h = dkw_halfwidth(n)
            cols["lower"] = np.clip(cols["empirical"] - h, 0.0, 1.0)
            cols["upper"] = np.clip(cols["empirical"] + h, 0.0, 1.0)
        return PlotData(kind, cols)
    if kind == "qq":
        p = np.arange(1, n + 1) / (n + 1)
        emp = np.sort(data.lower) if est is None else turnbull_quantile(est, p)
        return PlotData(kind, {"empirical": np.asarray(emp, dtype=float),
                               "fitted": splice_quantile(p, model)})
    emp_s = 1.0 - F_hat
    fit_s = 1.0 - splice_cdf(x, model)
    if kind == "pp":
        return PlotData(kind, {"empirical": emp_s, "fitted": fit_s})
    keep = (emp_s > 0) & (fit_s > 0)
    return PlotData(kind, {"empirical": -np.log(emp_s[keep]), "fitted": -np.log(fit_s[keep])})


@dataclass(frozen=True)
class GofResult:
    ks_stat: float
    ad_stat: float
    ks_pvalue: float
    ad_pvalue: float
    n_bootstrap: int
    seed: Optional[int]
    failures: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _replicate(args):
    x, cfg, model, seed, reselect = args
    rng = np.random.default_rng(seed)
    xb = rng.choice(x, size=x.size, replace=True)
    try:
        if reselect:
            rep = search(xb, SearchConfig.from_fit_config(cfg, workers=1))
        else:
            rep = fit(xb, cfg, start=model)
    except (SpliceError, FloatingPointError) as exc:
        log.debug("bootstrap replicate failed: %s", exc)
        return None
    return ks_stat(xb, rep.model), ad_stat(xb, rep.model)


def bootstrap_gof(obs, cfg: FitConfig, fitted, n_boot: int = 1000, seed=None,
                  workers: int = 1, reselect: bool = False) -> GofResult:
    """KS and AD statistics of ``fitted`` with bootstrap p-values.

    Each replicate resamples the data with replacement and refits with the
    shapes of ``fitted`` held fixed, warm-started from it.  The p-value is the
    fraction of replicate statistics exceeding the original one.

    Parameters
    ----------
    fitted : SplicedModel or FitReport
        The fit to assess.
    reselect : bool
        Rerun the full shape search on every replicate (with the search
        settings in ``cfg``) instead of keeping the shapes fixed.  Much slower.

    Raises
    ------
    DataError
        If the data are censored.
    ConvergenceError
        If more than 10% of the replicate fits fail.
    """
    data = as_data(obs)
    if not data.fully_uncensored:
        raise DataError("bootstrap goodness-of-fit needs uncensored data")
    model = fitted.model if isinstance(fitted, FitReport) else fitted
    x = data.lower
    ks0, ad0 = ks_stat(x, model), ad_stat(x, model)
    seeds = np.random.SeedSequence(seed).generate_state(n_boot)
    jobs = [(x, cfg, model, int(s), reselect) for s in seeds]
    if workers > 1 and n_boot > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate, jobs, chunksize=max(1, n_boot // (4 * workers))))
    else:
        results = [_replicate(j) for j in jobs]
    ok = np.array([r for r in results if r is not None], dtype=float).reshape(-1, 2)
    failures = n_boot - ok.shape[0]
    if failures > 0.1 * n_boot:
        raise ConvergenceError(f"{failures} of {n_boot} bootstrap refits failed")
    m = max(ok.shape[0], 1)
    return GofResult(ks0, ad0, float(np.sum(ok[:, 0] > ks0) / m), float(np.sum(ok[:, 1] > ad0) / m),
                     n_boot, seed, failures)
