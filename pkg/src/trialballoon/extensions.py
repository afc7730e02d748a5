"""Noisy discovery, many projects, and two-stage sequential discovery."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import AccuracyError, DomainError, PremiseError, UnsupportedError
from .gaussian import PriorSpec
from .proposal import MAX_PROJECTS, Weights, belief_steps, discovery_beliefs
from .payoffs import (
    DiscoveryRule,
    LogGain,
    payoff_report,
    rule_gain_terms,
    utility_discover_both,
    utility_discover_one,
    utility_no_discovery,
)

# -- noisy discovery ---------------------------------------------------


@dataclass(frozen=True)
class NoisySignalSpec:
    project: int
    tau: float

    def __post_init__(self):
        if self.project < 0:
            raise DomainError("project index must be nonnegative")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise DomainError("tau must be positive and finite")


@dataclass(frozen=True)
class EffectivePrior:
    """Distribution of the discovered project's posterior mean ``q`` and the
    affine maps from ``q`` to every project's posterior mean."""

    mean: float
    sd: float
    intercepts: tuple
    slopes: tuple
    residual_sds: tuple


def noisy_effective_prior(prior: PriorSpec, spec: NoisySignalSpec) -> EffectivePrior:
    """Substitute problem after observing ``s = v_i + noise``, noise ~ N(0, tau^2).

    With ``k = s_i^2 / (s_i^2 + tau^2)`` the posterior mean of ``v_i`` is
    ``q = mu_i + k (s - mu_i)`` with variance ``s_i^4 / (s_i^2 + tau^2)``.
    For ``j != i`` the posterior mean is ``mu_j + rho (s_j / s_i)(q - mu_i)``,
    the same map as exact discovery, and the residual variance of ``v_j``
    is ``s_j^2 (1 - rho^2 k)``.
    """
    i = spec.project
    if not i < prior.n:
        raise DomainError(f"project index {i} out of range for n={prior.n}")
    si = prior.sds[i]
    k = si * si / (si * si + spec.tau * spec.tau)
    sd_q = si * math.sqrt(k)
    intercepts, slopes = discovery_beliefs(prior, i)
    resid = []
    for j in range(prior.n):
        if j == i:
            resid.append(si * math.sqrt(1.0 - k))
        else:
            resid.append(prior.sds[j] * math.sqrt(1.0 - prior.rho ** 2 * k))
    return EffectivePrior(prior.means[i], sd_q, tuple(intercepts), tuple(slopes), tuple(resid))


def utility_noisy(prior: PriorSpec, weights: Weights, spec: NoisySignalSpec) -> float:
    prior.require_rho(0.0, 1.0)
    if prior.n != len(weights):
        raise DomainError("prior and weights differ in length")
    eff = noisy_effective_prior(prior, spec)
    return belief_steps(eff.intercepts, eff.slopes, weights).expected(eff.mean, eff.sd)


# -- many projects -------------------------------------------------------


def n_project_utility(prior: PriorSpec, weights: Weights, i: int) -> float:
    """Exact expected payoff from discovering project ``i`` among ``n <= 16``."""
    if prior.n > MAX_PROJECTS:
        raise UnsupportedError(f"at most {MAX_PROJECTS} projects are supported")
    return utility_discover_one(prior, weights, i)


def _single_negative(prior: PriorSpec) -> int:
    neg = [k for k, m in enumerate(prior.means) if m < 0]
    if len(neg) != 1:
        raise PremiseError("exactly one project must have a negative mean")
    return neg[0]


def n_best_single(prior: PriorSpec, weights: Weights) -> tuple:
    """Best of NoDiscovery and each single discovery; ties go to the earlier rule.

    Returns ``(index or None, PayoffReport)``.
    """
    _single_negative(prior)
    rules = [DiscoveryRule.none()] + [DiscoveryRule.one(k) for k in range(prior.n)]
    report = payoff_report(prior, weights, rules)
    best = report.best_rule
    return (None if best.kind == "none" else best.index), report


@dataclass(frozen=True)
class NCutoff:
    c: float
    case: str  # "always", "never" or "interior"


def n_discovery_cutoff(mu: float, cs: Sequence[float], sds: Sequence[float], rho: float,
                       weights: Weights, j: int, k: int, tol: float = 1e-12) -> NCutoff:
    """Cutoff in ``c_j`` above which discovering ``k`` beats no discovery.

    Means are ``(-mu, c_2 mu, ..., c_n mu)``; ``cs`` lists ``c_2..c_n`` and
    ``j >= 1`` picks which of them varies over ``[0, 1 - sum of the others)``.
    """
    if not mu > 0:
        raise DomainError("mu must be positive")
    n = len(cs) + 1
    if not 1 <= j < n or not 0 <= k < n:
        raise DomainError("project index out of range")
    others = math.fsum(c for idx, c in enumerate(cs, start=1) if idx != j)
    top = 1.0 - others
    if top < 0:
        raise PremiseError("the remaining c values already sum above 1")
    rule = DiscoveryRule.one(k)

    def gain(cj):
        means = [-mu] + [mu * (cj if idx == j else c) for idx, c in enumerate(cs, start=1)]
        prior = PriorSpec(tuple(means), tuple(sds), rho)
        return LogGain.from_terms(rule_gain_terms(prior, weights, rule)).sign

    # at c_j = top the bundle mean is zero and passes undisclosed, so the
    # range is half-open and the never test uses a point just below it
    edge = top * (1.0 - 1e-12)
    if gain(0.0) > 0:
        return NCutoff(0.0, "always")
    if gain(edge) <= 0:
        return NCutoff(top, "never")
    lo, hi = 0.0, edge
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if gain(mid) > 0:
            hi = mid
        else:
            lo = mid
    return NCutoff(0.5 * (lo + hi), "interior")


# -- sequential discovery ----------------------------------------------

Z_SPAN = 10.0
QUAD_NODES = 101
QUAD_TOL = 1e-8


@lru_cache(maxsize=None)
def _legendre(n: int) -> tuple:
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


@dataclass
class SequentialPolicy:
    """First move and, for a single first discovery, the realisations of the
    first value (in value units) after which the second project is discovered."""

    first: DiscoveryRule
    continue_intervals: list = field(default_factory=list)
    first_move_values: dict = field(default_factory=dict)

    def discovers_second(self, v: float) -> bool:
        return any(lo <= v < hi for lo, hi in self.continue_intervals)


class _Stage:
    """Stop and continue values after observing project ``i`` in two-project play."""

    def __init__(self, prior: PriorSpec, weights: Weights, i: int):
        self.i, self.j = i, 1 - i
        self.prior, self.weights = prior, weights
        self.mu, self.sd = prior.means[i], prior.sds[i]
        self.stop = belief_steps(*discovery_beliefs(prior, i), weights)
        sj = prior.sds[self.j]
        self.slope = prior.rho * sj / self.sd
        self.cond_sd = sj * math.sqrt(1.0 - prior.rho ** 2)

    def cont(self, v: float) -> float:
        mean_j = self.prior.means[self.j] + self.slope * (v - self.mu)
        intercepts = [0.0, 0.0]
        slopes = [0.0, 0.0]
        intercepts[self.i] = v
        slopes[self.j] = 1.0
        return belief_steps(intercepts, slopes, self.weights).expected(mean_j, self.cond_sd)

    def excess(self, v: float) -> float:
        return self.cont(v) - self.stop(v)


def _panels(stage: _Stage) -> list:
    lo, hi = stage.mu - Z_SPAN * stage.sd, stage.mu + Z_SPAN * stage.sd
    cuts = {lo, hi}
    for t in stage.stop.thresholds[1:]:
        if lo < t < hi:
            cuts.add(t)
    if lo < 0.0 < hi:
        cuts.add(0.0)
    cuts = sorted(cuts)
    # split further where the excess changes sign, so max(0, .) is smooth per panel
    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        grid = np.linspace(a, b, 33)
        # values just inside the panel; the integrand may jump at the ends
        eps = 1e-12 * max(1.0, abs(a), abs(b))
        grid[0], grid[-1] = a + eps, b - eps
        vals = [stage.excess(float(x)) for x in grid]
        pieces = [a]
        for x0, x1, f0, f1 in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
            if (f0 > 0) != (f1 > 0):
                pieces.append(_bisect_sign(stage.excess, float(x0), float(x1), f0 > 0))
        pieces.append(b)
        out.extend(zip(pieces[:-1], pieces[1:]))
    return out


def _bisect_sign(f, a: float, b: float, left_positive: bool) -> float:
    for _ in range(200):
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        if (f(m) > 0) == left_positive:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def _integrate_excess(stage: _Stage, panels: list, nodes: int) -> float:
    x, w = _legendre(nodes)
    total = []
    for a, b in panels:
        half, mid = 0.5 * (b - a), 0.5 * (a + b)
        pts = mid + half * x
        z = (pts - stage.mu) / stage.sd
        dens = np.exp(-0.5 * z * z) / (stage.sd * math.sqrt(2.0 * math.pi))
        vals = np.array([max(0.0, stage.excess(float(p))) for p in pts])
        total.append(half * float(np.dot(w, vals * dens)))
    return math.fsum(total)


def sequential_first_value(prior: PriorSpec, weights: Weights, i: int) -> tuple:
    """Value of discovering ``i`` first and then optionally the other project.

    Returns ``(value, continue_intervals)``.  The value is the exact stop
    value plus the integral of ``max(0, cont - stop)``, computed panel-wise
    with Gauss-Legendre at ``QUAD_NODES`` and checked against twice as many.
    """
    stage = _Stage(prior, weights, i)
    base = stage.stop.expected(stage.mu, stage.sd)
    panels = _panels(stage)
    coarse = _integrate_excess(stage, panels, QUAD_NODES)
    fine = _integrate_excess(stage, panels, 2 * QUAD_NODES)
    if abs(fine - coarse) > QUAD_TOL:
        raise AccuracyError(f"sequential quadrature unstable: {coarse!r} vs {fine!r}")
    intervals = []
    for a, b in panels:
        if stage.excess(0.5 * (a + b)) > 0.0:
            if intervals and intervals[-1][1] == a:
                intervals[-1] = (intervals[-1][0], b)
            else:
                intervals.append((a, b))
    # open up the tails that were truncated at Z_SPAN
    lo_edge, hi_edge = stage.mu - Z_SPAN * stage.sd, stage.mu + Z_SPAN * stage.sd
    intervals = [(-math.inf if a == lo_edge else a, math.inf if b == hi_edge else b) for a, b in intervals]
    return base + fine, intervals


def sequential_value(prior: PriorSpec, weights: Weights) -> tuple:
    """Best first move of the two-stage game and its value.

    First moves are NoDiscovery, Both, and each single project followed by
    an optional second discovery.  Ties go to the earlier move in the order
    NoDiscovery, One(0), One(1), Both.
    """
    if prior.n != 2:
        raise UnsupportedError("sequential discovery is implemented for two projects")
    prior.require_rho(0.0, 1.0)
    values = {DiscoveryRule.none(): utility_no_discovery(prior, weights)}
    conts = {}
    for i in range(2):
        v, iv = sequential_first_value(prior, weights, i)
        values[DiscoveryRule.one(i)] = v
        conts[i] = iv
    values[DiscoveryRule.both()] = utility_discover_both(prior, weights)
    order = sorted(values, key=DiscoveryRule.sort_key)
    best = order[0]
    for r in order[1:]:
        if values[r] > values[best] + 1e-12:
            best = r
    intervals = conts[best.index] if best.kind == "one" else []
    return values[best], SequentialPolicy(best, intervals, values)
