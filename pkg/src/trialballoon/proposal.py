"""The proposal/approval endgame.

After discovery the agent holds posterior mean beliefs; the principal
proposes the subset with the largest total weight among those whose
posterior mean sum is nonnegative.  When every posterior mean is an
increasing affine function of one discovered quantity, the principal's
best payoff is a nondecreasing step function of that quantity, which
:func:`belief_steps` builds exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DomainError, UnsupportedError
from .gaussian import SQRT2, PriorSpec, erfc, log_std_normal_cdf

MAX_PROJECTS = 16


@dataclass(frozen=True)
class Weights:
    w: tuple

    def __post_init__(self):
        w = tuple(float(x) for x in self.w)
        object.__setattr__(self, "w", w)
        if any(not math.isfinite(x) or x < 0 or x > 1 for x in w):
            raise DomainError("weights must lie in [0, 1]")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise DomainError(f"weights must sum to 1, got {math.fsum(w)!r}")

    @classmethod
    def two(cls, w1: float) -> "Weights":
        return cls((w1, 1.0 - w1))

    def __len__(self):
        return len(self.w)

    def __getitem__(self, k):
        return self.w[k]

    def permuted(self, order: Sequence[int]) -> "Weights":
        return Weights(tuple(self.w[k] for k in order))


@dataclass(frozen=True)
class Proposal:
    subset: tuple
    payoff: float


@lru_cache(maxsize=None)
def subsets(n: int) -> tuple:
    """All subsets of range(n), ordered by size and then lexicographically.

    The order is the tie-break: among subsets of equal weight the first one
    in this order wins.
    """
    if not 0 < n <= MAX_PROJECTS:
        raise UnsupportedError(f"number of projects must be in 1..{MAX_PROJECTS}, got {n}")
    out = []
    for mask in range(1 << n):
        out.append(tuple(k for k in range(n) if mask >> k & 1))
    out.sort(key=lambda s: (len(s), s))
    return tuple(out)


@lru_cache(maxsize=None)
def _membership(n: int) -> np.ndarray:
    subs = subsets(n)
    mat = np.zeros((len(subs), n))
    for r, s in enumerate(subs):
        mat[r, list(s)] = 1.0
    return mat


def _subset_weight(subset, weights: Weights) -> float:
    return math.fsum(weights[k] for k in subset)


def best_proposal(posterior_means: Sequence[float], weights: Weights) -> Proposal:
    """Highest-weight subset the agent approves (mean sum >= 0)."""
    n = len(posterior_means)
    if n != len(weights):
        raise DomainError("posterior_means and weights differ in length")
    best, best_w = (), 0.0
    for s in subsets(n):
        if not s:
            continue
        if math.fsum(posterior_means[k] for k in s) >= 0.0:
            ws = _subset_weight(s, weights)
            if ws > best_w:
                best, best_w = s, ws
    return Proposal(best, best_w)


def best_payoff_array(means: np.ndarray, weights: Weights, objective: str = "weighted") -> np.ndarray:
    """Row-wise principal payoff for a matrix of posterior means (samples x projects).

    ``objective`` is ``"weighted"`` (the model's payoff), ``"grand_bundle"``
    (1 iff the bundle of all projects passes) or ``"at_least_one"`` (1 iff
    some project passes alone).
    """
    means = np.asarray(means, dtype=np.float64)
    n = means.shape[1]
    if objective == "grand_bundle":
        return (means.sum(axis=1) >= 0.0).astype(np.float64)
    if objective == "at_least_one":
        return (means.max(axis=1) >= 0.0).astype(np.float64)
    if objective != "weighted":
        raise DomainError(f"unknown objective {objective!r}")
    if n != len(weights):
        raise DomainError("means and weights differ in length")
    member = _membership(n)
    sums = means @ member.T
    subset_w = member @ np.asarray(weights.w)
    feasible = sums >= 0.0
    return np.max(np.where(feasible, subset_w[None, :], 0.0), axis=1)


@dataclass(frozen=True)
class StepPayoff:
    """Right-continuous nondecreasing step function of a discovered quantity.

    ``thresholds[0]`` is ``-inf``; the payoff equals ``levels[k]`` on
    ``[thresholds[k], thresholds[k + 1])``.
    """

    thresholds: tuple
    levels: tuple

    def __call__(self, x: float) -> float:
        level = self.levels[0]
        for t, lv in zip(self.thresholds, self.levels):
            if x >= t:
                level = lv
            else:
                break
        return level

    def breakpoints(self) -> list:
        return list(zip(self.thresholds, self.levels))

    def expected(self, mean: float, sd: float) -> float:
        """E[payoff(X)] for X ~ N(mean, sd^2): sum of level jumps times tail masses."""
        total = self.levels[0]
        for k in range(1, len(self.levels)):
            jump = self.levels[k] - self.levels[k - 1]
            total += jump * 0.5 * erfc((self.thresholds[k] - mean) / (sd * SQRT2))
        return total

    def gain_terms(self, mean: float, sd: float) -> list:
        """``E[payoff(X)] - payoff(mean)`` as signed tail terms ``(coef, log prob)``.

        Jumps above the mean contribute ``+jump * P(X >= t)``; jumps at or below
        it contribute ``-jump * P(X < t)``.  Every probability is a lower tail,
        so its logarithm stays accurate when the probability underflows.
        """
        terms = []
        for k in range(1, len(self.levels)):
            jump = self.levels[k] - self.levels[k - 1]
            t = self.thresholds[k]
            if t > mean:
                terms.append((jump, log_std_normal_cdf((mean - t) / sd)))
            else:
                terms.append((-jump, log_std_normal_cdf((t - mean) / sd)))
        return terms


def belief_steps(intercepts: Sequence[float], slopes: Sequence[float], weights: Weights) -> StepPayoff:
    """Best-proposal payoff when posterior mean k equals ``intercepts[k] + slopes[k] * x``.

    Each subset S passes iff ``x >= -a_S / b_S`` (with ``a_S``, ``b_S`` the
    summed intercepts and slopes), so the best payoff at ``x`` is the running
    maximum of subset weights over subsets ordered by threshold.
    """
    n = len(intercepts)
    if len(slopes) != n or len(weights) != n:
        raise DomainError("intercepts, slopes and weights differ in length")
    if any(b < 0 for b in slopes):
        raise UnsupportedError("belief slopes must be nonnegative (rho > 0)")
    entries = []
    for s in subsets(n):
        if not s:
            continue
        a = math.fsum(intercepts[k] for k in s)
        b = math.fsum(slopes[k] for k in s)
        if b > 0:
            t = -a / b
        else:
            t = -math.inf if a >= 0 else math.inf
        if t < math.inf:
            entries.append((t, _subset_weight(s, weights)))
    entries.sort(key=lambda e: e[0])
    thresholds, levels = [-math.inf], [0.0]
    for t, w in entries:
        if w > levels[-1]:
            if t == thresholds[-1]:
                levels[-1] = w
            else:
                thresholds.append(t)
                levels.append(w)
    return StepPayoff(tuple(thresholds), tuple(levels))


def discovery_beliefs(prior: PriorSpec, discovered: int) -> tuple:
    """Affine maps from the discovered value to every posterior mean."""
    i = discovered
    if not 0 <= i < prior.n:
        raise DomainError(f"project index {i} out of range for n={prior.n}")
    intercepts, slopes = [], []
    for j in range(prior.n):
        if j == i:
            intercepts.append(0.0)
            slopes.append(1.0)
        else:
            k = prior.rho * prior.sds[j] / prior.sds[i]
            intercepts.append(prior.means[j] - k * prior.means[i])
            slopes.append(k)
    return intercepts, slopes


def approval_breakpoints(prior: PriorSpec, weights: Weights, discovered: int) -> list:
    """Breakpoints ``(threshold, payoff level)`` of the best payoff in the discovered value."""
    if not prior.rho > 0:
        raise UnsupportedError("approval breakpoints need rho > 0 (monotone beliefs)")
    if prior.n != len(weights):
        raise DomainError("prior and weights differ in length")
    return belief_steps(*discovery_beliefs(prior, discovered), weights).breakpoints()
