"""Spliced mixed Erlang / Pareto models for censored and truncated losses."""

from .data import (
    Case,
    CensoredData,
    CensoredObservation,
    TurnbullEstimate,
    classify_case,
    classify_cases,
    parse_observations,
    turnbull_fit,
    turnbull_quantile,
    write_observations,
)
from .diagnostics import GofResult, ad_stat, bootstrap_gof, ks_stat, plot_data
from .em import FitConfig, FitReport, e_step, fit, initialize, loglik
from .evt import endpoint_gamma, hill, mean_excess, truncation_odds
from .exceptions import (
    ConvergenceError,
    DataError,
    DegenerateWindowError,
    InfiniteMeanError,
    SpliceError,
)
from .model import (
    MEParams,
    ParetoParams,
    SplicedModel,
    alpha_to_beta,
    beta_to_alpha,
    erlang_cdf,
    erlang_pdf,
    sample,
    splice_cdf,
    splice_pdf,
    splice_quantile,
)
from .risk import premium, premium_me_star, premium_pareto_star, tvar, var
from .shape_search import SearchConfig, adjust_shapes, reduce_components, search

__all__ = [
    "Case",
    "CensoredData",
    "CensoredObservation",
    "ConvergenceError",
    "DataError",
    "DegenerateWindowError",
    "FitConfig",
    "FitReport",
    "GofResult",
    "InfiniteMeanError",
    "MEParams",
    "ParetoParams",
    "SearchConfig",
    "SplicedModel",
    "SpliceError",
    "TurnbullEstimate",
    "ad_stat",
    "adjust_shapes",
    "alpha_to_beta",
    "beta_to_alpha",
    "bootstrap_gof",
    "classify_case",
    "classify_cases",
    "e_step",
    "endpoint_gamma",
    "erlang_cdf",
    "erlang_pdf",
    "fit",
    "hill",
    "initialize",
    "ks_stat",
    "loglik",
    "mean_excess",
    "parse_observations",
    "plot_data",
    "premium",
    "premium_me_star",
    "premium_pareto_star",
    "reduce_components",
    "sample",
    "search",
    "splice_cdf",
    "splice_pdf",
    "splice_quantile",
    "truncation_odds",
    "turnbull_fit",
    "turnbull_quantile",
    "tvar",
    "var",
    "write_observations",
]

__version__ = "0.1.0"
