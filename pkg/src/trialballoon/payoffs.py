"""Expected principal utility for each one-shot discovery rule.

Every single-project rule is evaluated by integrating the best-proposal
step function against the marginal of the discovered value.  The closed
forms for the two-project sign patterns are kept separately so the two
routes can be cross-checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import DomainError, PremiseError, UnsupportedError
from .gaussian import (
    PriorSpec,
    bivariate_rect_prob,
    log_bivariate_rect_prob,
    log_std_normal_cdf,
    std_normal_cdf,
    sum_distribution,
)
from .proposal import Weights, belief_steps, best_proposal, discovery_beliefs

TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class DiscoveryRule:
    """Which project values are revealed before the proposal.

    ``kind`` is one of ``"none"``, ``"one"``, ``"both"``, ``"noisy"`` and
    ``"sequential"``.  Project indices are zero-based.
    """

    kind: str
    index: Optional[int] = None
    tau: Optional[float] = None

    def __post_init__(self):
        if self.kind not in _KIND_ORDER:
            raise DomainError(f"unknown discovery rule {self.kind!r}")
        if self.kind in ("one", "noisy"):
            if self.index is None or self.index < 0:
                raise DomainError(f"{self.kind} discovery needs a nonnegative project index")
        elif self.index is not None:
            raise DomainError(f"{self.kind} discovery takes no project index")
        if self.kind == "noisy":
            if self.tau is None or not self.tau > 0 or not math.isfinite(self.tau):
                raise DomainError("noisy discovery needs a positive finite tau")
        elif self.tau is not None:
            raise DomainError(f"{self.kind} discovery takes no tau")

    @classmethod
    def none(cls) -> "DiscoveryRule":
        return cls("none")

    @classmethod
    def one(cls, i: int) -> "DiscoveryRule":
        return cls("one", i)

    @classmethod
    def both(cls) -> "DiscoveryRule":
        return cls("both")

    @classmethod
    def noisy(cls, i: int, tau: float) -> "DiscoveryRule":
        return cls("noisy", i, tau)

    @classmethod
    def sequential(cls) -> "DiscoveryRule":
        return cls("sequential")

    @property
    def label(self) -> str:
        if self.kind == "none":
            return "NoDiscovery"
        if self.kind == "one":
            return f"DiscoverP{self.index + 1}"
        if self.kind == "both":
            return "DiscoverBoth"
        if self.kind == "noisy":
            return f"NoisyP{self.index + 1}(tau={self.tau:g})"
        return "Sequential"

    @classmethod
    def parse(cls, text: str) -> "DiscoveryRule":
        """Inverse of :attr:`label` for the labels a scenario file may use."""
        t = text.strip()
        low = t.lower()
        if low in ("nodiscovery", "none"):
            return cls.none()
        if low in ("discoverboth", "both"):
            return cls.both()
        if low == "sequential":
            return cls.sequential()
        if low.startswith("discoverp"):
            return cls.one(int(t[len("discoverp"):]) - 1)
        if low.startswith("noisyp") and "(tau=" in low:
            head, rest = t[len("noisyp"):].split("(", 1)
            return cls.noisy(int(head) - 1, float(rest.split("=", 1)[1].rstrip(")")))
        raise DomainError(f"cannot parse discovery rule {text!r}")

    def sort_key(self) -> tuple:
        return (_KIND_ORDER[self.kind], self.index if self.index is not None else -1, self.tau or 0.0)


_KIND_ORDER = {"none": 0, "one": 1, "both": 2, "noisy": 3, "sequential": 4}


def one_shot_rules(n: int = 2) -> list:
    return [DiscoveryRule.none()] + [DiscoveryRule.one(i) for i in range(n)] + [DiscoveryRule.both()]


def _check_weights(prior: PriorSpec, weights: Weights) -> None:
    if prior.n != len(weights):
        raise DomainError(f"prior has {prior.n} projects but {len(weights)} weights were given")


def utility_no_discovery(prior: PriorSpec, weights: Weights) -> float:
    _check_weights(prior, weights)
    return best_proposal(prior.means, weights).payoff


def discovery_steps(prior: PriorSpec, weights: Weights, i: int):
    _check_weights(prior, weights)
    return belief_steps(*discovery_beliefs(prior, i), weights)


def utility_discover_one(prior: PriorSpec, weights: Weights, i: int) -> float:
    """Expected payoff from revealing project ``i`` exactly."""
    prior.require_rho(0.0, 1.0)
    return discovery_steps(prior, weights, i).expected(prior.means[i], prior.sds[i])


def pi_closed_form(prior: PriorSpec, weights: Weights, i: int) -> float:
    """Closed form for one-project discovery with one disfavored, one favored project.

    With ``d`` the negative-mean project and ``f`` the other (``mu_d < 0 <= mu_f``)
    the payoff is ``w_d P(grand bundle) + w_f P(belief about v_f >= 0)``.
    """
    if prior.n != 2:
        raise UnsupportedError("the closed form covers two projects")
    prior.require_rho(0.0, 1.0)
    _check_weights(prior, weights)
    (m1, m2), rho = prior.means, prior.rho
    if m1 < 0 <= m2:
        d, f = 0, 1
    elif m2 < 0 <= m1:
        d, f = 1, 0
    else:
        raise PremiseError("closed form needs exactly one negative mean")
    md, mf, sd_, sf = prior.means[d], prior.means[f], prior.sds[d], prior.sds[f]
    total = md + mf
    if i == d:
        grand = std_normal_cdf(total / (sd_ + rho * sf))
        fav = std_normal_cdf(mf / (rho * sf))
    elif i == f:
        grand = std_normal_cdf(total / (sf + rho * sd_))
        fav = std_normal_cdf(mf / sf)
    else:
        raise DomainError(f"project index {i} out of range")
    return weights[d] * grand + weights[f] * fav


def _both_regions(prior: PriorSpec) -> dict:
    """Probabilities of the four outcome regions when both values are revealed."""
    (m1, m2), (s1, s2), rho = prior.means, prior.sds, prior.rho
    total = sum_distribution(prior, (0, 1))
    r1 = (s1 + rho * s2) / total.sd
    r2 = (s2 + rho * s1) / total.sd
    zs = total.mean / total.sd
    return {
        "bundle": std_normal_cdf(zs),
        # v1 >= 0 and v1 + v2 < 0, as a lower orthant of (-v1, v1 + v2)
        "only1": bivariate_rect_prob(m1 / s1, -zs, -r1),
        "only2": bivariate_rect_prob(m2 / s2, -zs, -r2),
        "neither": bivariate_rect_prob(-m1 / s1, -m2 / s2, rho),
    }


def _both_log_regions(prior: PriorSpec) -> dict:
    """Logs of the :func:`_both_regions` probabilities, valid after they underflow."""
    (m1, m2), (s1, s2), rho = prior.means, prior.sds, prior.rho
    total = sum_distribution(prior, (0, 1))
    r1 = (s1 + rho * s2) / total.sd
    r2 = (s2 + rho * s1) / total.sd
    zs = total.mean / total.sd
    return {
        "bundle": log_std_normal_cdf(zs),
        "only1": log_bivariate_rect_prob(m1 / s1, -zs, -r1),
        "only2": log_bivariate_rect_prob(m2 / s2, -zs, -r2),
        "neither": log_bivariate_rect_prob(-m1 / s1, -m2 / s2, rho),
    }


def utility_discover_both(prior: PriorSpec, weights: Weights) -> float:
    """P(v1+v2 >= 0) + w1 P(v1 >= 0, v1+v2 < 0) + w2 P(v2 >= 0, v1+v2 < 0)."""
    if prior.n != 2:
        raise UnsupportedError("full discovery of n > 2 projects lives in the N-project extension")
    prior.require_rho(-1.0, 1.0)
    _check_weights(prior, weights)
    p = _both_regions(prior)
    return p["bundle"] + weights[0] * p["only1"] + weights[1] * p["only2"]


def utility_grand_bundle(prior: PriorSpec, rule: DiscoveryRule) -> float:
    """Probability the grand bundle is approvable under ``rule``."""
    total = math.fsum(prior.means)
    if rule.kind == "none":
        return 1.0 if total >= 0 else 0.0
    if rule.kind == "one":
        prior.require_rho(0.0, 1.0, closed=True)
        i = rule.index
        spread = prior.sds[i] + prior.rho * math.fsum(s for j, s in enumerate(prior.sds) if j != i)
        return std_normal_cdf(total / spread)
    if rule.kind == "both":
        if prior.n != 2:
            raise UnsupportedError("Both is a two-project rule")
        dist = sum_distribution(prior, range(prior.n))
        return std_normal_cdf(dist.mean / dist.sd)
    raise UnsupportedError(f"no grand-bundle form for {rule.label}")


def utility_at_least_one(prior: PriorSpec, rule: DiscoveryRule) -> float:
    """Probability that some project is approvable on its own under ``rule``.

    Premise: every prior mean is negative, so nothing passes without discovery.
    """
    if any(m >= 0 for m in prior.means):
        raise PremiseError("at-least-one payoff needs every prior mean negative")
    if rule.kind == "none":
        return 0.0
    if rule.kind == "one":
        prior.require_rho(0.0, 1.0)
        i = rule.index
        # union of threshold events in v_i is the event with the lowest threshold
        best = std_normal_cdf(prior.means[i] / prior.sds[i])
        for j in range(prior.n):
            if j != i:
                best = max(best, std_normal_cdf(prior.means[j] / (prior.rho * prior.sds[j])))
        return best
    if rule.kind == "both":
        if prior.n != 2:
            raise UnsupportedError("Both is a two-project rule")
        prior.require_rho(-1.0, 1.0)
        (m1, m2), (s1, s2) = prior.means, prior.sds
        # P(v1 >= 0) + P(v1 < 0, v2 >= 0); avoids cancellation in 1 - P(both < 0)
        return std_normal_cdf(m1 / s1) + bivariate_rect_prob(-m1 / s1, m2 / s2, -prior.rho)
    raise UnsupportedError(f"no at-least-one form for {rule.label}")


def log_at_least_one_both_gap(prior: PriorSpec) -> float:
    """Log of the at-least-one payoff of Both minus the best One.

    With negative means and ``0 < rho < 1`` every One event is contained in
    a single-project event ``{v_k >= 0}``, and the best One is the ``k``
    with the larger ``P(v_k >= 0)``.  The gap is then ``P(v_k < 0, v_l >= 0)``,
    evaluated directly so it stays positive when it is far below one ulp of
    the payoffs themselves.
    """
    if prior.n != 2:
        raise UnsupportedError("Both is a two-project rule")
    if any(m >= 0 for m in prior.means):
        raise PremiseError("at-least-one payoff needs every prior mean negative")
    prior.require_rho(0.0, 1.0)
    (m1, m2), (s1, s2) = prior.means, prior.sds
    z = (m1 / s1, m2 / s2)
    k = 0 if z[0] >= z[1] else 1
    return log_bivariate_rect_prob(-z[k], z[1 - k], -prior.rho)


def ratio_rule_pick(prior: PriorSpec) -> int:
    """Project minimising sd/mean among negative-mean projects (lowest index on ties)."""
    if any(m >= 0 for m in prior.means):
        raise PremiseError("ratio rule needs every prior mean negative")
    ratios = [s / m for s, m in zip(prior.sds, prior.means)]
    return min(range(prior.n), key=lambda k: (ratios[k], k))


# -- perfect correlation ---------------------------------------------------


@dataclass(frozen=True)
class CutoffInfo:
    """Cutoff in ``c`` above which full discovery beats no discovery."""

    cutoff: float
    case: str  # "always", "never" or "interior"
    closed_form: bool


def perfect_correlation_gap(mu: float, c: float, sd_i: float, sd_j: float, w_j: float) -> float:
    """Payoff of revealing the common shock minus no discovery, ``rho = 1``.

    Means ``(-mu, c mu)`` for the disfavored ``i`` and favored ``j``.  With
    shock ``z`` the bundle passes for ``z >= (1 - c) mu / (sd_i + sd_j)`` and
    ``j`` alone for ``z >= -c mu / sd_j``, so the difference is
    ``(1 - w_j) Phi(-(1 - c) mu / (sd_i + sd_j)) - w_j Phi(-c mu / sd_j)``.
    """
    return (1.0 - w_j) * std_normal_cdf(-(1.0 - c) * mu / (sd_i + sd_j)) - w_j * std_normal_cdf(-c * mu / sd_j)


def perfect_correlation_policy(mu: float, c: float, sd_i: float, sd_j: float, w_j: float,
                               tol: float = 1e-14) -> tuple:
    """Optimal rule with ``rho = 1`` and means ``(-mu, c mu)``, ``mu > 0``, ``c in [0, 1)``.

    Returns ``(rule, CutoffInfo)``; one discovery reveals both values, so the
    rule is either NoDiscovery or DiscoverBoth.
    """
    if not mu > 0:
        raise DomainError("mu must be positive")
    if not 0.0 <= c < 1.0:
        raise DomainError("c must lie in [0, 1)")
    if not (sd_i > 0 and sd_j > 0):
        raise DomainError("sds must be positive")
    if not 0.0 <= w_j <= 1.0:
        raise DomainError("w_j must lie in [0, 1]")

    def gap(cc):
        return perfect_correlation_gap(mu, cc, sd_i, sd_j, w_j)

    if w_j == 0.5:
        info = CutoffInfo(sd_j / (sd_i + 2.0 * sd_j), "interior", True)
    elif gap(0.0) >= 0.0:
        info = CutoffInfo(0.0, "always", False)
    elif gap(1.0) <= 0.0:
        info = CutoffInfo(1.0, "never", False)
    else:
        lo, hi = 0.0, 1.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if gap(mid) < 0.0:
                lo = mid
            else:
                hi = mid
        info = CutoffInfo(0.5 * (lo + hi), "interior", False)
    discover = gap(c) > 0.0 if info.case != "always" else True
    rule = DiscoveryRule.both() if discover else DiscoveryRule.none()
    return rule, info


def perfect_correlation_rule(prior: PriorSpec, weights: Weights) -> DiscoveryRule:
    """Three-case classification for perfectly correlated projects."""
    if prior.n != 2 or prior.rho != 1.0:
        raise UnsupportedError("perfect-correlation path needs two projects with rho = 1")
    m1, m2 = prior.means
    if m1 + m2 >= 0:
        return DiscoveryRule.none()
    if m1 < 0 and m2 < 0:
        return DiscoveryRule.both()
    i, j = (0, 1) if m1 < 0 else (1, 0)
    mu = -prior.means[i]
    c = prior.means[j] / mu
    rule, _ = perfect_correlation_policy(mu, c, prior.sds[i], prior.sds[j], weights[j])
    return rule


# -- gains relative to no discovery ---------------------------------------


def rule_gain_terms(prior: PriorSpec, weights: Weights, rule: DiscoveryRule) -> list:
    """``U(rule) - U(NoDiscovery)`` as signed terms ``(coef, log prob)``.

    Comparing rules through these terms in log space keeps the ranking
    exact when every probability underflows.
    """
    if rule.kind == "none":
        return []
    if rule.kind == "one":
        prior.require_rho(0.0, 1.0)
        i = rule.index
        return discovery_steps(prior, weights, i).gain_terms(prior.means[i], prior.sds[i])
    if rule.kind == "both":
        if prior.n != 2:
            raise UnsupportedError("Both is a two-project rule")
        base = utility_no_discovery(prior, weights)
        levels = {"bundle": 1.0, "only1": weights[0], "only2": weights[1], "neither": 0.0}
        terms = []
        for key, logp in _both_log_regions(prior).items():
            coef = levels[key] - base
            if coef != 0.0:
                terms.append((coef, logp))
        return terms
    if rule.kind == "noisy":
        from .extensions import NoisySignalSpec, noisy_effective_prior

        eff = noisy_effective_prior(prior, NoisySignalSpec(rule.index, rule.tau))
        steps = belief_steps(eff.intercepts, eff.slopes, weights)
        return steps.gain_terms(eff.mean, eff.sd)
    if rule.kind == "sequential":
        from .extensions import sequential_value

        value, _ = sequential_value(prior, weights)
        return [(value - utility_no_discovery(prior, weights), 0.0)]
    raise UnsupportedError(rule.label)


def gain_value(terms: Iterable) -> float:
    return math.fsum(c * math.exp(lp) for c, lp in terms if lp > -math.inf)


def utility(prior: PriorSpec, weights: Weights, rule: DiscoveryRule) -> float:
    """Expected principal payoff under ``rule`` (dispatches on the rule kind)."""
    if rule.kind == "none":
        return utility_no_discovery(prior, weights)
    if rule.kind == "one":
        if not 0 <= rule.index < prior.n:
            raise DomainError(f"project index {rule.index} out of range")
        return utility_discover_one(prior, weights, rule.index)
    if rule.kind == "both":
        return utility_discover_both(prior, weights)
    if rule.kind == "noisy":
        from .extensions import NoisySignalSpec, utility_noisy

        return utility_noisy(prior, weights, NoisySignalSpec(rule.index, rule.tau))
    from .extensions import sequential_value

    return sequential_value(prior, weights)[0]


@dataclass
class PayoffReport:
    per_rule: dict
    best_rule: DiscoveryRule
    margins: dict = field(default_factory=dict)
    gains: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "per_rule": {r.label: v for r, v in self.per_rule.items()},
            "best_rule": self.best_rule.label,
            "margins": {f"{a.label}-{b.label}": v for (a, b), v in self.margins.items()},
        }


@dataclass(frozen=True, order=False)
class LogGain:
    """A signed quantity stored as ``sign * exp(log_abs)``."""

    sign: int
    log_abs: float

    @classmethod
    def from_terms(cls, terms: Iterable) -> "LogGain":
        live = [(c, lp) for c, lp in terms if c != 0.0 and lp > -math.inf]
        if not live:
            return cls(0, -math.inf)
        top = max(lp for _, lp in live)
        s = math.fsum(c * math.exp(lp - top) for c, lp in live)
        if s == 0.0:
            return cls(0, -math.inf)
        return cls(1 if s > 0 else -1, top + math.log(abs(s)))

    @property
    def value(self) -> float:
        return self.sign * math.exp(self.log_abs) if self.sign else 0.0

    def exceeds(self, other: "LogGain", rtol: float = TIE_TOLERANCE) -> bool:
        """``self > other`` by more than ``rtol`` relative to the larger magnitude."""
        if self.sign != other.sign:
            if self.sign == 0:
                return other.sign < 0
            if other.sign == 0:
                return self.sign > 0
            return self.sign > other.sign
        if self.sign == 0:
            return False
        gap = self.log_abs - other.log_abs
        # same sign: compare magnitudes, relative gap exp(gap) - 1
        if self.sign > 0:
            return gap > math.log1p(rtol)
        return gap < -math.log1p(rtol)


def rank_rules(prior: PriorSpec, weights: Weights, rules: Sequence[DiscoveryRule]) -> tuple:
    """Argmax rule by gain over no discovery, compared in log space.

    Gains closer than ``TIE_TOLERANCE`` in relative terms count as ties and
    go to the earlier rule in :meth:`DiscoveryRule.sort_key` order.  Returns
    ``(best rule, margin to the runner-up, {rule: LogGain})``; the margin is
    in utility units and may underflow to 0 for well separated tiny gains.
    """
    ordered = sorted(set(rules), key=DiscoveryRule.sort_key)
    gains = [LogGain.from_terms(rule_gain_terms(prior, weights, r)) for r in ordered]
    best = 0
    for k in range(1, len(ordered)):
        if gains[k].exceeds(gains[best]):
            best = k
    others = [g for k, g in enumerate(gains) if k != best]
    if others:
        runner = others[0]
        for g in others[1:]:
            if g.exceeds(runner):
                runner = g
        margin = max(gains[best].value - runner.value, 0.0)
    else:
        margin = 0.0
    return ordered[best], margin, dict(zip(ordered, gains))


def payoff_report(prior: PriorSpec, weights: Weights, allowed: Sequence[DiscoveryRule]) -> PayoffReport:
    if not allowed:
        raise DomainError("at least one rule must be allowed")
    ordered = sorted(set(allowed), key=DiscoveryRule.sort_key)
    per_rule = {r: utility(prior, weights, r) for r in ordered}
    best, _, gains = rank_rules(prior, weights, ordered)
    margins = {}
    for a in ordered:
        for b in ordered:
            if a.sort_key() < b.sort_key():
                margins[(a, b)] = per_rule[a] - per_rule[b]
    return PayoffReport(per_rule, best, margins, gains)
