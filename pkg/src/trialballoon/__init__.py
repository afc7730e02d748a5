"""Discovery rules for a principal proposing correlated Gaussian projects."""

from .errors import AccuracyError, DomainError, PremiseError, UnsupportedError
from .gaussian import (
    NormalParams,
    PriorSpec,
    bivariate_rect_prob,
    conditional_posterior,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
    sum_distribution,
)
from .proposal import Proposal, Weights, approval_breakpoints, best_proposal
from .payoffs import (
    DiscoveryRule,
    PayoffReport,
    payoff_report,
    perfect_correlation_policy,
    pi_closed_form,
    ratio_rule_pick,
    utility,
    utility_at_least_one,
    utility_discover_both,
    utility_discover_one,
    utility_grand_bundle,
    utility_no_discovery,
)
from .cutoffs import (
    CutoffResult,
    c_ell,
    c_h,
    c_no_curve,
    c_star,
    c_star_star,
    cutoff_derivative,
    cutoff_vs_no_discovery,
)
from .regions import (
    RegionLabel,
    RegionMap,
    RegionParams,
    classify,
    connected_components,
    dominance_measure_trace,
    region_map,
    single_crossing_scan,
)
from .extensions import (
    NoisySignalSpec,
    SequentialPolicy,
    n_best_single,
    n_project_utility,
    noisy_effective_prior,
    sequential_value,
    utility_noisy,
)
from .oracle import McEstimate, mc_conditional_check, mc_utility

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "CutoffResult",
    "DiscoveryRule",
    "DomainError",
    "McEstimate",
    "NoisySignalSpec",
    "NormalParams",
    "PayoffReport",
    "PremiseError",
    "PriorSpec",
    "Proposal",
    "RegionLabel",
    "RegionMap",
    "RegionParams",
    "SequentialPolicy",
    "UnsupportedError",
    "Weights",
    "approval_breakpoints",
    "best_proposal",
    "bivariate_rect_prob",
    "c_ell",
    "c_h",
    "c_no_curve",
    "c_star",
    "c_star_star",
    "classify",
    "conditional_posterior",
    "connected_components",
    "cutoff_derivative",
    "cutoff_vs_no_discovery",
    "dominance_measure_trace",
    "mc_conditional_check",
    "mc_utility",
    "n_best_single",
    "n_project_utility",
    "noisy_effective_prior",
    "payoff_report",
    "perfect_correlation_policy",
    "pi_closed_form",
    "ratio_rule_pick",
    "region_map",
    "sequential_value",
    "single_crossing_scan",
    "std_normal_cdf",
    "std_normal_pdf",
    "std_normal_quantile",
    "sum_distribution",
    "utility",
    "utility_at_least_one",
    "utility_discover_both",
    "utility_discover_one",
    "utility_grand_bundle",
    "utility_no_discovery",
    "utility_noisy",
]
