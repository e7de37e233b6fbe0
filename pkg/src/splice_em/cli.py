"""Command-line interface: ``splice-em {fit,simulate,risk,diagnose,evt}``.

Exit codes: 0 success, 1 usage error, 2 invalid data or arguments (and any
other model error), 3 convergence failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .data import CensoredData, parse_observations, write_observations
from .diagnostics import PLOT_KINDS, bootstrap_gof, plot_data
from .em import FitConfig, fit
from .evt import endpoint_gamma, mean_excess, truncation_odds
from .exceptions import ConvergenceError, DataError, SpliceError
from .model import SplicedModel, sample
from .risk import premium, tvar, var
from .shape_search import SearchConfig, default_workers, search

EXIT_USAGE, EXIT_DATA, EXIT_CONVERGENCE = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float(text: str) -> float:
    if text.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    return float(text)


def _float_list(text: str) -> list[float]:
    return [_float(v) for v in text.split(",") if v.strip()]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _spread(text: str) -> tuple:
    """``a:b`` for the integer range a..b, or a comma list."""
    if ":" in text:
        a, b = text.split(":")
        return tuple(range(int(a), int(b) + 1))
    return tuple(_float_list(text))


def _threads(args) -> int:
    return args.threads if args.threads is not None else default_workers()


def _load_data(path) -> CensoredData:
    if not Path(path).is_file():
        raise DataError(f"cannot read data file {path}")
    return CensoredData.from_observations(parse_observations(path))


def _load_model(path) -> SplicedModel:
    try:
        return SplicedModel.from_json(Path(path).read_text())
    except FileNotFoundError:
        raise DataError(f"cannot read model file {path}") from None
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise DataError(f"invalid model file {path}: {exc}") from None


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="")


def _close(fh):
    if fh is not sys.stdout:
        fh.close()


# ---------------------------------------------------------------------------

def cmd_fit(args) -> int:
    if not args.tl < args.t < args.T:
        raise DataError("need --tl < --t < --T")
    data = _load_data(args.data)
    cfg = FitConfig(t_lower=args.tl, t=args.t, T=args.T, M_init=args.m_init,
                    spread_factors=args.spread, em_tol=args.em_tol,
                    max_em_iter=args.max_iter, ic=args.ic)
    if args.shapes:
        spread = args.spread[0] if args.spread_given else None
        rep = fit(data, cfg, fixed_shapes=args.shapes, spread=spread)
    else:
        rep = search(data, SearchConfig.from_fit_config(cfg, workers=_threads(args)))
    m = rep.model
    if args.model_out:
        Path(args.model_out).write_text(m.to_json(indent=2) + "\n")
    if args.report_out:
        Path(args.report_out).write_text(rep.to_json(indent=2) + "\n")
    lines = [
        f"n = {rep.n}  cases = {rep.case_counts}",
        f"M = {m.M}  r = {m.shapes.tolist()}  spread = {rep.spread}",
        f"pi = {m.pi:.6f}",
        f"alpha = {np.round(m.body.alphas, 6).tolist()}",
        f"theta = {m.theta:.6f}",
        f"gamma = {m.gamma:.6f}",
        f"NLL = {rep.nll:.3f}  AIC = {rep.aic:.3f}  BIC = {rep.bic:.3f}  (df = {rep.df})",
        f"iterations = {rep.iterations}  converged = {rep.converged}",
    ]
    print("\n".join(lines))
    return 0


def cmd_simulate(args) -> int:
    if args.n < 0:
        raise DataError("--n must be non-negative")
    model = _load_model(args.model)
    rng = np.random.default_rng(args.seed)
    x = sample(model, args.n, rng)
    lo, up = x.copy(), x.copy()
    if args.widen > 0:
        lo = np.maximum(x - args.widen, model.t_lower)
        up = np.minimum(x + args.widen, model.T)
    if args.censor_mean > 0:
        c = model.t_lower + rng.exponential(args.censor_mean, args.n)
        rc = x > c
        lo = np.where(rc, c, lo)
        up = np.where(rc, math.inf, up)
    fh = _open_out(args.out)
    try:
        write_observations(CensoredData(lo, up), fh)
    finally:
        _close(fh)
    return 0


def _level_key(level: float) -> str:
    return repr(float(level))


def cmd_risk(args) -> int:
    levels = (args.var or []) + (args.tvar or [])
    if args.retentions and levels:
        raise DataError("--retentions cannot be combined with --var/--tvar")
    if not args.retentions and not levels:
        raise DataError("give --retentions or --var/--tvar")
    if any(not 0 < q < 1 for q in levels):
        raise DataError("confidence levels must lie in (0, 1)")
    model = _load_model(args.model)
    fh = _open_out(args.out)
    try:
        if args.retentions:
            fh.write("R,premium\n")
            for R, p in zip(args.retentions, np.atleast_1d(premium(args.retentions, model))):
                fh.write(f"{R!r},{float(p)!r}\n")
        else:
            doc = {}
            if args.var:
                doc["VaR"] = {_level_key(q): float(var(1.0 - q, model)) for q in args.var}
            if args.tvar:
                doc["TVaR"] = {_level_key(q): float(tvar(1.0 - q, model)) for q in args.tvar}
            fh.write(json.dumps(doc, indent=2) + "\n")
    finally:
        _close(fh)
    return 0


def cmd_diagnose(args) -> int:
    model = _load_model(args.model)
    data = _load_data(args.data)
    if args.plots:
        out = Path(args.plots)
        out.mkdir(parents=True, exist_ok=True)
        for kind in PLOT_KINDS:
            with open(out / f"{kind}.csv", "w", newline="") as fh:
                plot_data(data, model, kind).to_csv(fh)
    if args.bootstrap > 0:
        cfg = FitConfig(t_lower=model.t_lower, t=model.t, T=model.T)
        res = bootstrap_gof(data, cfg, model, n_boot=args.bootstrap, seed=args.seed,
                            workers=_threads(args), reselect=args.reselect)
        text = res.to_json(indent=2)
        if args.out:
            Path(args.out).write_text(text + "\n")
        print(text)
    return 0


def cmd_evt(args) -> int:
    data = _load_data(args.data)
    fh = _open_out(args.out)
    try:
        if args.evt_cmd == "meplot":
            mean_excess(data, use_turnbull=args.turnbull, t_lower=args.tl).to_csv(fh)
        else:
            x = data.exact_values()
            ks = args.k if args.k else list(range(2, x.size))
            rows = []
            for k in ks:
                try:
                    g = endpoint_gamma(x, k)
                    D, T = truncation_odds(x, k, g)
                except (DataError, ConvergenceError):
                    if args.k:
                        raise
                    continue
                rows.append({"k": k, "gamma_hat": g, "D_hat": D,
                             "T_hat": "inf" if math.isinf(T) else T})
            doc = rows[0] if args.k and len(args.k) == 1 else rows
            fh.write(json.dumps(doc, indent=2) + "\n")
    finally:
        _close(fh)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="splice-em", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (default: $SPLICE_EM_THREADS or CPU count)")
    sub = p.add_subparsers(dest="cmd", parser_class=_Parser)

    f = sub.add_parser("fit", help="fit a spliced model by EM with shape search")
    f.add_argument("--data", required=True)
    f.add_argument("--tl", type=_float, default=0.0, help="lower truncation point")
    f.add_argument("--t", type=_float, required=True, help="splicing point")
    f.add_argument("--T", type=_float, default=math.inf, help="upper truncation point")
    f.add_argument("--m-init", type=int, default=10)
    f.add_argument("--spread", type=_spread, default=None, help="e.g. 1:10 or 2,5")
    f.add_argument("--ic", choices=("aic", "bic"), default="aic")
    f.add_argument("--shapes", type=_int_list, default=None,
                   help="fixed shapes, skips the search (e.g. 1,6,16)")
    f.add_argument("--em-tol", type=float, default=1e-3)
    f.add_argument("--max-iter", type=int, default=2000)
    f.add_argument("--model-out", default="model.json")
    f.add_argument("--report-out", default="report.json")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="draw a sample from a fitted model")
    s.add_argument("--model", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--censor-mean", type=float, default=0.0,
                   help="mean of an exponential right-censoring time (0 disables)")
    s.add_argument("--widen", type=float, default=0.0,
                   help="half-width of symmetric censoring intervals (0 disables)")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("risk", help="excess-loss premiums, VaR and TVaR")
    r.add_argument("--model", required=True)
    r.add_argument("--retentions", type=_float_list, default=None)
    r.add_argument("--var", type=_float_list, default=None,
                   help="confidence levels for VaR, e.g. 0.99,0.995 (JSON output)")
    r.add_argument("--tvar", type=_float_list, default=None,
                   help="confidence levels for TVaR (JSON output)")
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_risk)

    d = sub.add_parser("diagnose", help="plot data and bootstrap goodness of fit")
    d.add_argument("--model", required=True)
    d.add_argument("--data", required=True)
    d.add_argument("--plots", default=None, help="directory for plot CSV files")
    d.add_argument("--bootstrap", type=int, default=0)
    d.add_argument("--seed", type=int, default=None)
    d.add_argument("--reselect", action="store_true",
                   help="rerun the shape search on every bootstrap replicate")
    d.add_argument("--out", default=None)
    d.set_defaults(func=cmd_diagnose)

    e = sub.add_parser("evt", help="mean excess and endpoint estimation")
    esub = e.add_subparsers(dest="evt_cmd", parser_class=_Parser)
    me = esub.add_parser("meplot", help="mean excess values")
    me.add_argument("--data", required=True)
    me.add_argument("--turnbull", action="store_true")
    me.add_argument("--tl", type=_float, default=0.0)
    me.add_argument("--out", default=None)
    ep = esub.add_parser("endpoint", help="truncated Pareto shape and endpoint per k")
    ep.add_argument("--data", required=True)
    ep.add_argument("--k", type=_int_list, default=None,
                    help="numbers of top order statistics (default: all)")
    ep.add_argument("--out", default=None)
    e.set_defaults(func=cmd_evt)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.cmd is None or (args.cmd == "evt" and args.evt_cmd is None):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    if args.cmd == "fit":
        args.spread_given = args.spread is not None
        if args.spread is None:
            args.spread = tuple(range(1, 11))
    if args.threads is not None:
        os.environ["SPLICE_EM_THREADS"] = str(args.threads)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (SpliceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
