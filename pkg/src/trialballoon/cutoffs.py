"""Cutoff curves in c separating single discovery from no discovery.

Parametrisation throughout: project 1 has mean ``-mu`` and project 2 has
mean ``c * mu`` with ``mu > 0`` and ``c`` in ``[0, 1)``.  Discovering
project ``k`` beats no discovery iff

    w1 * Phi(-(1 - c) mu / B) > w2 * Phi(-c mu / A)

with ``(A, B) = (rho s2, s1 + rho s2)`` for ``k = 1`` and
``(s2, s2 + rho s1)`` for ``k = 2``.  The left side rises and the right
side falls in ``c``, so the root is unique.  Both sides are compared in
log space so the sign survives when the probabilities underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import DomainError
from .gaussian import LOG_SQRT_2PI, PriorSpec, log_std_normal_cdf
from .payoffs import DiscoveryRule, LogGain, rule_gain_terms
from .proposal import Weights

C_TOL = 0.0  # bisect down to adjacent floats


def _check(s1: float, s2: float, rho: float) -> None:
    if not (s1 > 0 and s2 > 0 and math.isfinite(s1) and math.isfinite(s2)):
        raise DomainError("sds must be positive and finite")
    if not 0.0 < rho < 1.0:
        raise DomainError("rho must lie in (0,1)")


def c_star(s1: float, s2: float, rho: float) -> float:
    _check(s1, s2, rho)
    return rho * s2 / (s1 + 2.0 * rho * s2)


def c_star_star(s1: float, s2: float, rho: float) -> float:
    _check(s1, s2, rho)
    return s2 / (rho * s1 + 2.0 * s2)


def c_ell(s1: float, s2: float, rho: float) -> float:
    _check(s1, s2, rho)
    total = math.sqrt(s1 * s1 + s2 * s2 + 2.0 * rho * s1 * s2)
    return rho * s2 / (rho * s2 + total)


def c_h(s1: float, s2: float, rho: float) -> float:
    _check(s1, s2, rho)
    return s2 / (s1 + (1.0 + rho) * s2)


def _scales(project: int, s1: float, s2: float, rho: float) -> tuple:
    if project == 0:
        return rho * s2, s1 + rho * s2
    if project == 1:
        return s2, s2 + rho * s1
    raise DomainError(f"project must be 0 or 1, got {project}")


def indifference_log_gap(mu: float, c: float, s1: float, s2: float, rho: float, w1: float,
                         project: int = 0) -> float:
    """log(w1 Phi(-(1-c)mu/B)) - log(w2 Phi(-c mu/A)); positive means discover ``project``."""
    a, b = _scales(project, s1, s2, rho)
    return (math.log(w1) + log_std_normal_cdf(-(1.0 - c) * mu / b)
            - math.log(1.0 - w1) - log_std_normal_cdf(-c * mu / a))


@dataclass(frozen=True)
class CutoffResult:
    """``c_bar`` is the cutoff above which discovery wins.

    ``case`` is ``"always"`` (``c_bar = 0``), ``"never"`` (``c_bar = 1``)
    or ``"interior"``.
    """

    c_bar: float
    case: str
    bracket_width: float
    iterations: int
    residual: float = 0.0

    @property
    def always_discover(self) -> bool:
        return self.case == "always"

    @property
    def never_discover(self) -> bool:
        return self.case == "never"


def cutoff_vs_no_discovery(mu: float, s1: float, s2: float, rho: float, w1: float,
                           project: int = 0, tol: float = C_TOL) -> CutoffResult:
    """Cutoff in c above which discovering ``project`` (0 or 1) beats no discovery."""
    _check(s1, s2, rho)
    if mu == 0:
        raise DomainError("mu = 0 is degenerate: both sides are constant in c")
    if not mu > 0 or not math.isfinite(mu):
        raise DomainError("mu must be positive and finite")
    if not 0.0 < w1 < 1.0:
        raise DomainError("w1 must lie in (0,1)")

    def g(c):
        return indifference_log_gap(mu, c, s1, s2, rho, w1, project)

    if g(0.0) >= 0.0:
        return CutoffResult(0.0, "always", 0.0, 0, g(0.0))
    if g(1.0) <= 0.0:
        return CutoffResult(1.0, "never", 0.0, 0, g(1.0))
    lo, hi, it = 0.0, 1.0, 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        it += 1
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    g_lo, g_hi = g(lo), g(hi)
    root, res = (lo, g_lo) if abs(g_lo) <= abs(g_hi) else (hi, g_hi)
    return CutoffResult(root, "interior", hi - lo, it, res)


def _log_mills(x: float) -> float:
    """log(phi(x) / Phi(x))."""
    return -0.5 * x * x - LOG_SQRT_2PI - log_std_normal_cdf(x)


def cutoff_derivative(mu: float, c: float, s1: float, s2: float, rho: float, w1: float,
                      project: int = 0) -> float:
    """Slope dc/dmu of the indifference curve through ``(mu, c)``.

    Implicit differentiation of the log gap; with ``lambda`` the inverse
    Mills ratio at each Phi argument the slope is
    ``[l1 (1-c)/B - l2 c/A] / [mu (l1/B + l2/A)]``.  Working with the ratio
    ``phi/Phi`` keeps it finite where both densities underflow.
    """
    _check(s1, s2, rho)
    if not mu > 0:
        raise DomainError("mu must be positive")
    a, b = _scales(project, s1, s2, rho)
    x1 = -(1.0 - c) * mu / b
    x2 = -c * mu / a
    l1 = math.exp(_log_mills(x1))
    l2 = math.exp(_log_mills(x2))
    return (l1 * (1.0 - c) / b - l2 * c / a) / (mu * (l1 / b + l2 / a))


def trace_cutoff(mus: Sequence[float], s1: float, s2: float, rho: float, w1: float,
                 project: int = 0) -> list:
    """CutoffResult for each mu (mu grid must be positive)."""
    return [cutoff_vs_no_discovery(m, s1, s2, rho, w1, project) for m in mus]


# -- full discovery vs none, w = (1/2, 1/2) ------------------------------


def both_vs_none_gain(mu: float, c: float, s1: float, s2: float, rho: float) -> LogGain:
    """U(Both) - U(NoDiscovery) at w = (1/2, 1/2), kept in log space."""
    prior = PriorSpec.disfavored(mu, c, s1, s2, rho)
    return LogGain.from_terms(rule_gain_terms(prior, Weights.two(0.5), DiscoveryRule.both()))


@dataclass(frozen=True)
class CNoPoint:
    mu: float
    c: Optional[float]
    flag: str  # "interior", "always" (Both wins on all of [0,1)) or "never"


def c_no_curve(s1: float, s2: float, rho: float, mus: Sequence[float], tol: float = 1e-12) -> tuple:
    """Indifference points between Both and NoDiscovery at equal weights.

    Returns ``(points, c_no)`` where ``c_no`` is the largest interior root on
    the grid, the numerical stand-in for the large-mu limit.  The gain is
    increasing in c, so each mu has at most one root.
    """
    _check(s1, s2, rho)
    c_top = 1.0 - 1e-9
    points = []
    for mu in mus:
        if not mu > 0:
            raise DomainError("mu grid must be positive")
        lo_val = both_vs_none_gain(mu, 0.0, s1, s2, rho)
        if lo_val.sign > 0:
            points.append(CNoPoint(mu, 0.0, "always"))
            continue
        if both_vs_none_gain(mu, c_top, s1, s2, rho).sign <= 0:
            points.append(CNoPoint(mu, None, "never"))
            continue
        lo, hi = 0.0, c_top
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if both_vs_none_gain(mu, mid, s1, s2, rho).sign > 0:
                hi = mid
            else:
                lo = mid
        points.append(CNoPoint(mu, 0.5 * (lo + hi), "interior"))
    interior = [p.c for p in points if p.flag == "interior"]
    return points, (max(interior) if interior else None)
