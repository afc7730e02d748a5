"""Optimal-rule maps over the (mu, c) plane and the single-crossing sweep."""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .errors import DomainError
from .gaussian import PriorSpec
from .payoffs import DiscoveryRule, rank_rules, utility_discover_one
from .proposal import Weights

THREADS_ENV = "BALLOON_THREADS"

SINGLE_RULES = (DiscoveryRule.none(), DiscoveryRule.one(0), DiscoveryRule.one(1))
ONE_SHOT_RULES = SINGLE_RULES + (DiscoveryRule.both(),)


@dataclass(frozen=True)
class RegionParams:
    s1: float
    s2: float
    rho: float
    w1: float

    def __post_init__(self):
        if not (self.s1 > 0 and self.s2 > 0):
            raise DomainError("sds must be positive")
        if not 0.0 < self.rho < 1.0:
            raise DomainError("rho must lie in (0,1)")
        if not 0.0 <= self.w1 <= 1.0:
            raise DomainError("w1 must lie in [0,1]")

    def prior(self, mu: float, c: float) -> PriorSpec:
        return PriorSpec.disfavored(mu, c, self.s1, self.s2, self.rho)

    @property
    def weights(self) -> Weights:
        return Weights.two(self.w1)


BASE_PARAMS = RegionParams(1 / 20, 1 / 5, 1 / 4, 2 / 3)


@dataclass(frozen=True)
class RegionLabel:
    rule: DiscoveryRule
    margin: float

    @property
    def name(self) -> str:
        return self.rule.label


def classify(mu: float, c: float, params: RegionParams, allowed: Sequence[DiscoveryRule] = SINGLE_RULES) -> RegionLabel:
    """Optimal rule at means ``(-mu, c mu)``."""
    if not mu > 0:
        raise DomainError("mu must be positive")
    if not 0.0 <= c < 1.0:
        raise DomainError("c must lie in [0, 1)")
    if not allowed:
        raise DomainError("at least one rule must be allowed")
    rule, margin, _ = rank_rules(params.prior(mu, c), params.weights, allowed)
    return RegionLabel(rule, margin)


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise DomainError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise DomainError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def default_grid(n_mu: int = 200, n_c: int = 200, mu_max: float = 1.0) -> tuple:
    """mu = mu_max * k / n_mu for k = 1..n_mu and c = k / n_c for k = 0..n_c - 1."""
    if n_mu < 1 or n_c < 1:
        raise DomainError("grid sizes must be positive")
    mus = [mu_max * k / n_mu for k in range(1, n_mu + 1)]
    cs = [k / n_c for k in range(n_c)]
    return mus, cs


@dataclass
class RegionMap:
    grid_mu: list
    grid_c: list
    rules: list  # rows over mu, columns over c, DiscoveryRule per cell
    margins: np.ndarray
    params: RegionParams
    allowed: tuple

    def __post_init__(self):
        if len(self.rules) != len(self.grid_mu) or any(len(r) != len(self.grid_c) for r in self.rules):
            raise DomainError("cell matrix does not match the grid")

    def label_names(self) -> list:
        return [[r.label for r in row] for row in self.rules]

    def mask(self, label) -> np.ndarray:
        target = label.label if isinstance(label, DiscoveryRule) else str(label)
        return np.array([[r.label == target for r in row] for row in self.rules], dtype=bool)

    def labels_present(self) -> list:
        seen = {r for row in self.rules for r in row}
        return [r.label for r in sorted(seen, key=DiscoveryRule.sort_key)]

    def boundary_trace(self) -> list:
        """Per mu row, the c positions where the label changes (midpoint of the two cells)."""
        out = []
        for mu, row in zip(self.grid_mu, self.rules):
            changes = []
            for k in range(1, len(row)):
                if row[k] != row[k - 1]:
                    changes.append({
                        "c": 0.5 * (self.grid_c[k - 1] + self.grid_c[k]),
                        "from": row[k - 1].label,
                        "to": row[k].label,
                    })
            out.append({"mu": mu, "changes": changes})
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["mu", "c", "label", "margin"])
        for a, mu in enumerate(self.grid_mu):
            for b, c in enumerate(self.grid_c):
                writer.writerow([repr(float(mu)), repr(float(c)), self.rules[a][b].label,
                                 repr(float(self.margins[a, b]))])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "params": {"sigma1": self.params.s1, "sigma2": self.params.s2,
                       "rho": self.params.rho, "w1": self.params.w1},
            "allowed_rules": [r.label for r in self.allowed],
            "grid": {"n_mu": len(self.grid_mu), "n_c": len(self.grid_c),
                     "mu_min": self.grid_mu[0], "mu_max": self.grid_mu[-1],
                     "c_min": self.grid_c[0], "c_max": self.grid_c[-1]},
            "components": {name: connected_components(self, name) for name in self.labels_present()},
            "cell_counts": {name: int(self.mask(name).sum()) for name in self.labels_present()},
            "boundaries": self.boundary_trace(),
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"


def _row(args) -> tuple:
    mu, cs, params, allowed = args
    labels = [classify(mu, c, params, allowed) for c in cs]
    return [lab.rule for lab in labels], [lab.margin for lab in labels]


def region_map(params: RegionParams, grid_mu: Sequence[float], grid_c: Sequence[float],
               allowed: Sequence[DiscoveryRule] = SINGLE_RULES, threads: Optional[int] = None) -> RegionMap:
    """Classify every cell; rows run in worker processes when ``threads > 1``."""
    grid_mu = sorted(float(m) for m in grid_mu)
    grid_c = sorted(float(c) for c in grid_c)
    if not grid_mu or not grid_c:
        raise DomainError("grids must be nonempty")
    allowed = tuple(sorted(set(allowed), key=DiscoveryRule.sort_key))
    threads = default_threads() if threads is None else threads
    jobs = [(mu, grid_c, params, allowed) for mu in grid_mu]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_row, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        rows = [_row(j) for j in jobs]
    rules = [r for r, _ in rows]
    margins = np.array([m for _, m in rows], dtype=float)
    return RegionMap(grid_mu, grid_c, rules, margins, params, allowed)


def connected_components(region: RegionMap, label) -> int:
    """Number of 4-connected groups of cells carrying ``label``."""
    _, count = ndimage.label(region.mask(label))
    return int(count)


def dominance_measure_trace(params: RegionParams, grid_mu: Sequence[float], n_c: int = 1000,
                            label: DiscoveryRule = DiscoveryRule.one(0),
                            allowed: Sequence[DiscoveryRule] = SINGLE_RULES) -> list:
    """``(mu, measure)`` where measure is cell width times the number of c-cells labelled ``label``."""
    cs = [k / n_c for k in range(n_c)]
    out = []
    for mu in grid_mu:
        hits = sum(1 for c in cs if classify(mu, c, params, allowed).rule == label)
        out.append((float(mu), hits / n_c))
    return out


# -- single crossing in sigma1 ---------------------------------------------


@dataclass(frozen=True)
class Crossing:
    rho: float
    w1: float
    mean_ratio: float
    sigma1: float
    inside_bracket: Optional[bool]  # None when no bracket is claimed (w1 != 1/2)


@dataclass
class ScanResult:
    violations: list = field(default_factory=list)  # (rho, w1, ratio, number of sign changes)
    crossings: list = field(default_factory=list)
    no_crossing: list = field(default_factory=list)

    @property
    def bracket_failures(self) -> list:
        return [x for x in self.crossings if x.inside_bracket is False]


def _pi_gap(s1: float, mu1: float, mu2: float, s2: float, rho: float, w: Weights) -> float:
    prior = PriorSpec((mu1, mu2), (s1, s2), rho)
    return utility_discover_one(prior, w, 0) - utility_discover_one(prior, w, 1)


def single_crossing_scan(rhos: Sequence[float], w1s: Sequence[float], mean_ratios: Sequence[float],
                         n_sigma: int = 20, mu2: float = -1.0, s2: float = 1.0,
                         sigma_lo: float = 0.5, sigma_hi_factor: float = 1.5, tol: float = 1e-10) -> ScanResult:
    """Count sign changes of the payoff gap from discovering project 1 over project 2 as s1 varies.

    Means are ``(R mu2, mu2)`` with ``mu2 < 0`` and ``R = mean_ratio > 1``.
    ``s1 / s2`` runs over ``n_sigma`` points on ``[sigma_lo, sigma_hi_factor * R]``.
    Each sign change is bisected; at ``w1 = 1/2`` the root must lie in
    ``(s2, R s2)``.
    """
    if not mu2 < 0:
        raise DomainError("mu2 must be negative")
    if n_sigma < 2:
        raise DomainError("need at least two sigma points")
    result = ScanResult()
    for rho in rhos:
        for w1 in w1s:
            w = Weights.two(w1)
            for ratio in mean_ratios:
                if not ratio > 1:
                    raise DomainError("mean ratio mu1/mu2 must exceed 1")
                mu1 = ratio * mu2
                xs = np.linspace(sigma_lo, sigma_hi_factor * ratio, n_sigma) * s2
                gaps = [_pi_gap(float(x), mu1, mu2, s2, rho, w) for x in xs]
                signed = [(float(x), g) for x, g in zip(xs, gaps) if g != 0.0]
                changes = []
                for (x0, g0), (x1, g1) in zip(signed[:-1], signed[1:]):
                    if (g0 > 0) != (g1 > 0):
                        changes.append((x0, x1, g0 > 0))
                if len(changes) > 1:
                    result.violations.append((rho, w1, ratio, len(changes)))
                if not changes:
                    result.no_crossing.append((rho, w1, ratio))
                for x0, x1, left_pos in changes:
                    a, b = x0, x1
                    while b - a > tol * s2:
                        m = 0.5 * (a + b)
                        if (_pi_gap(m, mu1, mu2, s2, rho, w) > 0) == left_pos:
                            a = m
                        else:
                            b = m
                    root = 0.5 * (a + b)
                    inside = (s2 < root < ratio * s2) if w1 == 0.5 else None
                    result.crossings.append(Crossing(rho, w1, ratio, root, inside))
    return result


def violations_csv(result: ScanResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rho", "w1", "mean_ratio", "sign_changes"])
    for rho, w1, ratio, n in result.violations:
        writer.writerow([repr(float(rho)), repr(float(w1)), repr(float(ratio)), n])
    return buf.getvalue()


def gnuplot_script(csv_name: str, params: RegionParams) -> str:
    """Companion gnuplot script for a region-map CSV."""
    return (
        "set datafile separator ','\n"
        f"set title 'sigma1={params.s1:g} sigma2={params.s2:g} rho={params.rho:g} w1={params.w1:g}'\n"
        "set xlabel 'mu'\nset ylabel 'c'\nset key outside\n"
        "lab(s) = s eq 'NoDiscovery' ? 0 : s eq 'DiscoverP1' ? 1 : s eq 'DiscoverP2' ? 2 : 3\n"
        f"plot '{csv_name}' every ::1 using 1:2:(lab(strcol(3))) with points pt 5 ps 0.3 lc variable notitle\n"
    )
