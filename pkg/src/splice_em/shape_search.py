"""Selection of the number of Erlang components and their shapes.

For each spread factor the search initializes and fits a model, deletes
smallest-shape components while the information criterion improves, and
hill-climbs the shapes in steps of one while the log-likelihood improves.
The best candidate over all spread factors is returned.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .em import FitConfig, FitReport, _prepare, _with_shapes, fit
from .exceptions import SpliceError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchConfig:
    """Search settings.  ``fit_config`` supplies the splice and EM controls for every candidate."""

    fit_config: FitConfig
    M_init: int = 10
    spread_factors: tuple = tuple(range(1, 11))
    ic: str = "aic"
    workers: Optional[int] = None

    def __post_init__(self):
        if len(self.spread_factors) == 0:
            raise ValueError("need at least one spread factor")
        if self.M_init < 1:
            raise ValueError("M_init must be at least 1")
        if self.ic.lower() not in ("aic", "bic"):
            raise ValueError("ic must be 'aic' or 'bic'")
        object.__setattr__(self, "ic", self.ic.lower())
        object.__setattr__(self, "spread_factors", tuple(self.spread_factors))

    @classmethod
    def from_fit_config(cls, cfg: FitConfig, workers=None) -> "SearchConfig":
        return cls(cfg, cfg.M_init, tuple(cfg.spread_factors), cfg.ic, workers)


def _cfg(cfg) -> FitConfig:
    return cfg.fit_config if isinstance(cfg, SearchConfig) else cfg


def _ic_name(cfg) -> str:
    return cfg.ic


def _refit(prep, cfg: FitConfig, current: FitReport, shapes, alphas) -> FitReport:
    start = _with_shapes(current.model, shapes, alphas)
    rep = fit(prep, cfg, start=start, spread=current.spread)
    rep.history = current.history
    return rep


def reduce_components(obs, cfg, start: FitReport) -> FitReport:
    """Backward deletion of the smallest-shape component while the IC strictly decreases."""
    fcfg, ic = _cfg(cfg), _ic_name(cfg)
    prep = _prepare(obs, fcfg.t_lower, fcfg.t, fcfg.T)
    cur = start
    while cur.M > 1:
        alphas = cur.model.body.alphas[1:]
        if alphas.sum() <= 0:
            break
        cand = _refit(prep, fcfg, cur, cur.shapes[1:], alphas / alphas.sum())
        _record(cand)
        if cand.ic(ic) < cur.ic(ic):
            cur = cand
        else:
            break
    return cur


def adjust_shapes(obs, cfg, report: FitReport) -> FitReport:
    """Hill-climb each shape by +-1 (ascending component order) while the log-likelihood rises.

    Passes repeat until one makes no accepted move.  Shapes stay strictly
    increasing positive integers.
    """
    fcfg = _cfg(cfg)
    prep = _prepare(obs, fcfg.t_lower, fcfg.t, fcfg.T)
    cur = report
    seen = {tuple(cur.shapes.tolist())}
    moved = True
    while moved:
        moved = False
        for j in range(cur.M):
            for step in (-1, 1):
                r = cur.shapes.copy()
                r[j] += step
                if r[j] < 1 or np.any(np.diff(r) <= 0) or tuple(r.tolist()) in seen:
                    continue
                seen.add(tuple(r.tolist()))
                cand = _refit(prep, fcfg, cur, r, cur.model.body.alphas)
                _record(cand)
                if cand.model.M == cur.M and cand.loglik > cur.loglik:
                    cur = cand
                    moved = True
                    break
    return cur


def _record(rep: FitReport) -> None:
    if rep.history is not None:
        rep.history.append({"spread": rep.spread, "shapes": rep.shapes.tolist(),
                            "loglik": rep.loglik, "aic": rep.aic, "bic": rep.bic})


def search_one(obs, scfg: SearchConfig, s) -> FitReport:
    """Full initialize / fit / reduce / adjust pipeline for one spread factor."""
    fcfg = replace(scfg.fit_config, M_init=scfg.M_init, ic=scfg.ic)
    prep = _prepare(obs, fcfg.t_lower, fcfg.t, fcfg.T)
    rep = fit(prep, fcfg, spread=s)
    rep.history = []
    _record(rep)
    rep = reduce_components(prep, scfg, rep)
    while True:
        rep = adjust_shapes(prep, scfg, rep)
        M_before = rep.M
        rep = reduce_components(prep, scfg, rep)
        if rep.M == M_before:
            return rep


def _search_one_safe(args):
    obs, scfg, s = args
    try:
        return s, search_one(obs, scfg, s), None
    except (SpliceError, ValueError, FloatingPointError) as exc:
        return s, None, exc


def default_workers() -> int:
    env = os.environ.get("SPLICE_EM_THREADS")
    if env:
        return max(1, int(env))
    return max(1, min(os.cpu_count() or 1, 8))


def search(obs, scfg: SearchConfig) -> FitReport:
    """Best model over all spread factors by the configured information criterion.

    Candidates run in parallel processes when ``scfg.workers`` (or the
    ``SPLICE_EM_THREADS`` environment variable) allows more than one.

    Raises
    ------
    SpliceError
        If every candidate fails; the message lists each failure.
    """
    fcfg = scfg.fit_config
    prep = _prepare(obs, fcfg.t_lower, fcfg.t, fcfg.T)
    jobs = [(prep, scfg, s) for s in scfg.spread_factors]
    workers = scfg.workers if scfg.workers is not None else default_workers()
    workers = min(workers, len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_search_one_safe, jobs))
    else:
        results = [_search_one_safe(j) for j in jobs]
    ok = [(s, r) for s, r, e in results if r is not None]
    if not ok:
        causes = "; ".join(f"s={s}: {e}" for s, _, e in results)
        kinds = {type(e) for _, _, e in results}
        # keep a shared cause type so callers can still tell data errors from convergence failures
        cls = kinds.pop() if len(kinds) == 1 and issubclass(next(iter(kinds)), SpliceError) else SpliceError
        raise cls(f"all shape-search candidates failed ({causes})")
    for s, _, e in results:
        if e is not None:
            log.warning("spread factor %s failed: %s", s, e)
    best = min(ok, key=lambda sr: sr[1].ic(scfg.ic))[1]
    history = [h for _, r in ok for h in r.history]
    best = replace(best, history=history)
    best.candidates = {s: r.ic(scfg.ic) for s, r in ok}
    return best
