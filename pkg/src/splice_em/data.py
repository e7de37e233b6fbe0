"""Censored loss observations, case classification and the Turnbull estimator."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Optional, TextIO

import numpy as np

from .exceptions import ConvergenceError, DataError

INF = math.inf


@dataclass(frozen=True)
class CensoredObservation:
    """A loss known to lie in ``(lower, upper]``; ``lower == upper`` if observed exactly."""

    lower: float
    upper: float

    def __post_init__(self):
        if math.isnan(self.lower) or math.isnan(self.upper):
            raise DataError("bounds must not be NaN")
        if self.lower < 0:
            raise DataError("bounds must be non-negative")
        if self.lower > self.upper:
            raise DataError("lower exceeds upper")

    @property
    def censored(self) -> bool:
        return self.lower != self.upper


class CensoredData:
    """Column-oriented container of censored observations.

    Every public function that takes ``obs`` accepts an instance of this class,
    a sequence of :class:`CensoredObservation`, or a plain 1-D array of exact
    observations.
    """

    def __init__(self, lower, upper=None):
        lower = np.asarray(lower, dtype=float).ravel()
        upper = lower.copy() if upper is None else np.asarray(upper, dtype=float).ravel()
        if lower.shape != upper.shape:
            raise DataError("lower and upper must have the same length")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise DataError("bounds must not be NaN")
        if np.any(lower < 0):
            raise DataError("bounds must be non-negative")
        bad = np.flatnonzero(lower > upper)
        if bad.size:
            raise DataError(f"observation {bad[0]}: lower exceeds upper")
        self.lower = lower
        self.upper = upper

    @classmethod
    def from_observations(cls, obs: Iterable[CensoredObservation]) -> "CensoredData":
        obs = list(obs)
        return cls([o.lower for o in obs], [o.upper for o in obs])

    def __len__(self):
        return self.lower.size

    def __iter__(self):
        for lo, up in zip(self.lower, self.upper):
            yield CensoredObservation(float(lo), float(up))

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return CensoredObservation(float(self.lower[idx]), float(self.upper[idx]))
        return CensoredData(self.lower[idx], self.upper[idx])

    @property
    def uncensored(self) -> np.ndarray:
        """Boolean mask of exactly observed points."""
        return self.lower == self.upper

    @property
    def fully_uncensored(self) -> bool:
        return bool(np.all(self.uncensored))

    def exact_values(self) -> np.ndarray:
        if not self.fully_uncensored:
            raise DataError("data contain censored observations")
        return self.lower.copy()

    def __repr__(self):
        return f"CensoredData(n={len(self)}, censored={int((~self.uncensored).sum())})"


def as_data(obs) -> CensoredData:
    if isinstance(obs, CensoredData):
        return obs
    if isinstance(obs, np.ndarray) and obs.ndim == 1:
        return CensoredData(obs)
    obs = list(obs)
    if obs and isinstance(obs[0], CensoredObservation):
        return CensoredData.from_observations(obs)
    return CensoredData(np.asarray(obs, dtype=float))


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def _parse_value(text: str, allow_inf: bool) -> float:
    s = text.strip()
    if allow_inf and s.lower() in ("", "inf", "+inf", "infinity"):
        return INF
    v = float(s)
    if math.isnan(v):
        raise ValueError("NaN")
    return v


def parse_observations(source) -> list[CensoredObservation]:
    """Read ``lower,upper`` CSV rows into observations.

    ``source`` is a path, an open text stream or a string holding the CSV.
    An empty or ``inf`` upper bound marks a right-censored loss.  Errors name
    the data row (1-based, header excluded).
    """
    if isinstance(source, str) and "\n" not in source and not source.lstrip().startswith("lower"):
        with open(source, newline="") as fh:
            return parse_observations(fh)
    stream: TextIO = io.StringIO(source) if isinstance(source, str) else source
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or [h.strip().lower() for h in header[:2]] != ["lower", "upper"]:
        raise DataError("expected a CSV header 'lower,upper'")
    out = []
    for k, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < 2:
            raise DataError(f"row {k}: expected two columns")
        try:
            lower = _parse_value(row[0], allow_inf=False)
            upper = _parse_value(row[1], allow_inf=True)
        except ValueError:
            raise DataError(f"row {k}: cannot parse {row[:2]!r}") from None
        if lower < 0 or upper < 0:
            raise DataError(f"row {k}: negative value")
        if lower > upper:
            raise DataError(f"row {k}: lower exceeds upper")
        out.append(CensoredObservation(lower, upper))
    return out


def write_observations(obs, stream: TextIO) -> None:
    data = as_data(obs)
    stream.write("lower,upper\n")
    for lo, up in zip(data.lower, data.upper):
        stream.write(f"{float(lo)!r},{'inf' if math.isinf(up) else repr(float(up))}\n")


# ---------------------------------------------------------------------------
# Case classification
# ---------------------------------------------------------------------------

class Case(IntEnum):
    """Position of an observation relative to the splicing point ``t``.

    I/II: exact at or below / above ``t``.  III: censored within the body,
    IV: censored within the tail, V: censoring interval straddles ``t``.
    """

    I = 1
    II = 2
    III = 3
    IV = 4
    V = 5


def clip_to_support(obs, t_lower, T=INF) -> CensoredData:
    """Map unbounded upper limits to ``T`` and validate against ``[t_lower, T]``."""
    data = as_data(obs)
    upper = data.upper
    if not math.isinf(T):
        upper = np.where(np.isinf(upper), T, upper)
    bad = np.flatnonzero((data.lower < t_lower) | (upper > T))
    if bad.size:
        i = bad[0]
        raise DataError(
            f"observation {i} ({data.lower[i]}, {data.upper[i]}) lies outside [{t_lower}, {T}]"
        )
    return CensoredData(data.lower, upper)


def classify_cases(obs, t_lower, t, T=INF) -> np.ndarray:
    """Vectorized :func:`classify_case`; returns an int array of :class:`Case` values."""
    data = clip_to_support(obs, t_lower, T)
    lo, up = data.lower, data.upper
    exact = lo == up
    cases = np.where(
        exact,
        np.where(lo <= t, Case.I, Case.II),
        np.where(up <= t, Case.III, np.where(lo >= t, Case.IV, Case.V)),
    )
    return cases.astype(int)


def classify_case(obs: CensoredObservation, t_lower, t, T=INF) -> Case:
    return Case(int(classify_cases([obs], t_lower, t, T)[0]))


def case_counts(cases) -> dict[str, int]:
    cases = np.asarray(cases)
    return {c.name: int(np.sum(cases == c)) for c in Case}


# ---------------------------------------------------------------------------
# Turnbull estimator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TurnbullEstimate:
    """Self-consistent NPMLE of a CDF from interval-censored data.

    Mass ``masses[j]`` sits on the innermost interval with left end ``left[j]``
    and right end ``right[j]``.  The CDF places each mass at its interval's
    right endpoint.  That is the smallest right-continuous CDF consistent with
    the estimate, and it matches Kaplan-Meier under right censoring: mass on
    ``(c, inf)`` never enters at a finite point.  :meth:`quantile` returns the
    left endpoint of the first interval whose cumulative mass reaches ``p``.
    """

    left: np.ndarray
    right: np.ndarray
    left_open: np.ndarray
    masses: np.ndarray
    iterations: int = 0
    loglik_trace: tuple = ()
    counts: Optional[np.ndarray] = None

    def _cumulative(self):
        # exact-data estimates keep integer counts so the CDF is the ECDF bit for bit
        if self.counts is not None:
            return np.cumsum(self.counts) / self.counts.sum()
        return np.cumsum(self.masses)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        cum = np.concatenate([[0.0], self._cumulative()])
        idx = np.searchsorted(self.right, x, side="right")
        return np.minimum(cum[idx], 1.0)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        tail = np.concatenate([np.cumsum(self.masses[::-1])[::-1], [0.0]])
        idx = np.searchsorted(self.right, x, side="right")
        return np.maximum(tail[idx], 0.0)

    def quantile(self, p):
        return turnbull_quantile(self, p)

    def to_csv(self, stream: TextIO) -> None:
        """Write the step CDF at each finite jump point as ``x,cdf``."""
        stream.write("x,cdf\n")
        for x, c in zip(self.right, self._cumulative()):
            if math.isfinite(x):
                stream.write(f"{float(x)!r},{float(min(c, 1.0))!r}\n")


def _innermost_intervals(lo, up, exact):
    """Innermost (Turnbull) intervals.

    Censored observations are ``(l, u]``; exact ones are ``[x, x]``.  Returns
    left/right values, a left-open flag and, per observation, the contiguous
    index range ``[start, stop)`` of innermost intervals it contains.
    """
    values, inv = np.unique(np.concatenate([lo, up]), return_inverse=True)
    n = lo.size
    lo_rank, up_rank = inv[:n], inv[n:]
    # left keys: closed start sorts before a right end at the same value,
    # open start after it
    left_key = 3 * lo_rank + np.where(exact, 0, 2)
    right_key = 3 * up_rank + 1
    keys = np.concatenate([left_key, right_key])
    is_left = np.concatenate([np.ones(n, bool), np.zeros(n, bool)])
    order = np.lexsort((~is_left, keys))
    k_sorted = keys[order]
    left_sorted = is_left[order]
    pick = np.flatnonzero(left_sorted[:-1] & ~left_sorted[1:])
    il_key = k_sorted[pick]
    ir_key = k_sorted[pick + 1]
    start = np.searchsorted(il_key, left_key, side="left")
    stop = np.searchsorted(ir_key, right_key, side="right")
    left = values[il_key // 3]
    right = values[ir_key // 3]
    left_open = (il_key % 3) == 2
    return left, right, left_open, start, stop


def _self_consistency(p, start, stop, n):
    """One self-consistency update and the log-likelihood at ``p``."""
    m = p.size
    cs = np.concatenate([[0.0], np.cumsum(p)])
    denom = cs[stop] - cs[start]
    acc = np.zeros(m + 1)
    np.add.at(acc, start, 1.0 / denom)
    np.add.at(acc, stop, -1.0 / denom)
    p_new = p * np.cumsum(acc)[:m] / n
    return p_new / p_new.sum(), float(np.sum(np.log(denom)))


def _loglik_at(p, start, stop):
    cs = np.concatenate([[0.0], np.cumsum(p)])
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(cs[stop] - cs[start])))


def turnbull_fit(obs, t_lower=0.0, T=INF, tol=1e-8, max_iter=10000) -> TurnbullEstimate:
    """Turnbull self-consistency estimator restricted to ``[t_lower, T]``.

    Fully uncensored input short-cuts to the empirical distribution.  Each
    iteration applies the self-consistency map twice and then tries a
    squared extrapolation of the two steps (SQUAREM); the extrapolated point
    is kept only when it does not lower the log-likelihood, so the recorded
    trace stays nondecreasing and positive masses stay positive.

    Raises
    ------
    ConvergenceError
        If the largest mass change is still above ``tol`` after ``max_iter``
        iterations.
    """
    data = clip_to_support(obs, t_lower, T)
    n = len(data)
    if n == 0:
        raise DataError("Turnbull estimator needs at least one observation")
    lo, up = data.lower, data.upper
    exact = lo == up
    if np.all(exact):
        vals, counts = np.unique(lo, return_counts=True)
        return TurnbullEstimate(vals, vals.copy(), np.zeros(vals.size, bool), counts / n, 1,
                                counts=counts)

    left, right, left_open, start, stop = _innermost_intervals(lo, up, exact)
    m = left.size
    if np.any(stop <= start):
        raise DataError("an observation contains no innermost interval")
    p = np.full(m, 1.0 / m)
    trace = []
    for it in range(1, max_iter + 1):
        p1, ll0 = _self_consistency(p, start, stop, n)
        p2, ll1 = _self_consistency(p1, start, stop, n)
        trace.append(ll0)
        r = p1 - p
        v = p2 - p1 - r
        nv = np.linalg.norm(v)
        p_next = p2
        if nv > 0:
            alpha = min(-np.linalg.norm(r) / nv, -1.0)
            cand = p - 2.0 * alpha * r + alpha * alpha * v
            cand = np.where(cand > 0, cand, p2)
            cand, _ = _self_consistency(cand / cand.sum(), start, stop, n)
            if _loglik_at(cand, start, stop) >= _loglik_at(p2, start, stop):
                p_next = cand
        delta = np.max(np.abs(p_next - p))
        p = p_next
        if delta < tol:
            trace.append(_loglik_at(p, start, stop))
            return TurnbullEstimate(left, right, left_open, p, it, tuple(trace))
    raise ConvergenceError(f"Turnbull iteration did not converge in {max_iter} iterations",
                           iterations=max_iter)


def turnbull_quantile(est: TurnbullEstimate, p):
    """Left endpoint of the first support interval where the CDF reaches ``p``."""
    p_arr = np.asarray(p, dtype=float)
    cum = est._cumulative()
    # absorb round-off so that p = cumulative mass hits its own support point
    idx = np.searchsorted(cum, p_arr - 1e-12, side="left")
    idx = np.clip(idx, 0, est.left.size - 1)
    out = est.left[idx]
    return float(out) if np.ndim(p) == 0 else out
