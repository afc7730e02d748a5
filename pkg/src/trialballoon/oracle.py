"""Monte Carlo ground truth.

Values are simulated literally: draw the project values, reveal what the
rule reveals, form the agent's posterior means by conditioning on the
revealed draw, and let the principal pick the best approvable subset.

Randomness comes from Philox, a counter-based generator, keyed by
``(seed, batch)`` so every batch is reproducible on its own.  Normals are
produced by inverse transform through :func:`std_normal_quantile_array`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, UnsupportedError
from .gaussian import PriorSpec, std_normal_quantile_array
from .payoffs import DiscoveryRule
from .proposal import Weights, best_payoff_array

BATCH = 1 << 16
MIN_SAMPLES = 10_000
_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed: int

    def agrees(self, exact: float, k: float = 4.0) -> bool:
        """``|mean - exact| <= k * max(SE, 1/n)``; the floor covers zero-variance payoffs."""
        return abs(self.mean - exact) <= k * max(self.std_error, 1.0 / self.n_samples)

    def z_score(self, exact: float) -> float:
        return (self.mean - exact) / max(self.std_error, 1.0 / self.n_samples)


def _uniforms(seed: int, batch: int, count: int) -> np.ndarray:
    bits = np.random.Philox(key=np.array([seed & _SEED_MASK, batch], dtype=np.uint64))
    raw = bits.random_raw(count)
    # top 53 bits, centred in their cell so 0 and 1 never occur
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


@lru_cache(maxsize=4)
def standard_normals(seed: int, n_samples: int, dim: int) -> np.ndarray:
    """``n_samples x dim`` independent standard normals; read-only, cached."""
    if n_samples < 1 or dim < 1:
        raise DomainError("sample count and dimension must be positive")
    chunks = []
    total = n_samples * dim
    for b, start in enumerate(range(0, total, BATCH)):
        chunks.append(std_normal_quantile_array(_uniforms(seed, b, min(BATCH, total - start))))
    out = np.concatenate(chunks).reshape(n_samples, dim)
    out.setflags(write=False)
    return out


def sample_values(prior: PriorSpec, n_samples: int, seed: int) -> np.ndarray:
    """Draws of the value vector with equal pairwise correlation.

    For ``rho >= 0`` a common factor: ``v_k = mu_k + s_k (sqrt(rho) z_0 + sqrt(1 - rho) z_k)``.
    Negative correlations go through a Cholesky factor instead.
    """
    n = prior.n
    mu = np.asarray(prior.means)
    sd = np.asarray(prior.sds)
    if prior.rho >= 0:
        z = standard_normals(seed, n_samples, n + 1)
        x = math.sqrt(prior.rho) * z[:, :1] + math.sqrt(1.0 - prior.rho) * z[:, 1:]
    else:
        z = standard_normals(seed, n_samples, n)
        corr = np.full((n, n), prior.rho)
        np.fill_diagonal(corr, 1.0)
        x = z @ np.linalg.cholesky(corr).T
    return mu + x * sd


def _posterior_means(prior: PriorSpec, v: np.ndarray, rule: DiscoveryRule, seed: int) -> np.ndarray:
    mu = np.asarray(prior.means)
    sd = np.asarray(prior.sds)
    if rule.kind == "none":
        return np.broadcast_to(mu, v.shape)
    if rule.kind == "both":
        return v
    if rule.kind not in ("one", "noisy"):
        raise UnsupportedError(f"no Monte Carlo path for {rule.label}")
    i = rule.index
    if not 0 <= i < prior.n:
        raise DomainError(f"project index {i} out of range")
    cov = prior.rho * sd * sd[i]
    cov[i] = sd[i] ** 2
    if rule.kind == "one":
        return mu + np.outer(v[:, i] - mu[i], cov / sd[i] ** 2)
    s = noisy_signal(v[:, i], rule.tau, seed)
    return mu + np.outer(s - mu[i], cov / (sd[i] ** 2 + rule.tau ** 2))


def noisy_signal(v: np.ndarray, tau: float, seed: int) -> np.ndarray:
    """Signal ``v + tau * e`` with noise from a stream independent of the value draws."""
    e = standard_normals(seed ^ 0x5EED5EED, v.shape[0], 1)[:, 0]
    return v + tau * e


def _estimate(payoff: np.ndarray, seed: int) -> McEstimate:
    n = payoff.shape[0]
    mean = float(payoff.mean())
    var = float(payoff.var(ddof=1)) if n > 1 else 0.0
    return McEstimate(mean, math.sqrt(var / n), n, seed)


def mc_utilities(prior: PriorSpec, weights: Optional[Weights], rules: Sequence[DiscoveryRule],
                 n_samples: int, seed: int, objective: str = "weighted") -> dict:
    """Estimates for several rules from one set of value draws."""
    if n_samples < MIN_SAMPLES:
        raise DomainError(f"need at least {MIN_SAMPLES} samples")
    if objective == "weighted":
        if weights is None or len(weights) != prior.n:
            raise DomainError("weights must match the number of projects")
    v = sample_values(prior, n_samples, seed)
    out = {}
    for rule in rules:
        if rule.kind == "none":
            payoff = best_payoff_array(np.asarray(prior.means)[None, :], weights, objective)
            out[rule] = McEstimate(float(payoff[0]), 0.0, n_samples, seed)
            continue
        means = _posterior_means(prior, v, rule, seed)
        out[rule] = _estimate(best_payoff_array(means, weights, objective), seed)
    return out


def mc_utility(prior: PriorSpec, weights: Optional[Weights], rule: DiscoveryRule, n_samples: int,
               seed: int, objective: str = "weighted") -> McEstimate:
    return mc_utilities(prior, weights, [rule], n_samples, seed, objective)[rule]


@dataclass(frozen=True)
class RegressionCheck:
    name: str
    estimate: float
    std_error: float
    expected: float

    @property
    def z(self) -> float:
        return (self.estimate - self.expected) / self.std_error if self.std_error > 0 else math.inf

    @property
    def passed(self) -> bool:
        return abs(self.estimate - self.expected) <= 4.0 * self.std_error


def _regress(x: np.ndarray, y: np.ndarray) -> tuple:
    """OLS of y on (1, x) with standard errors for slope, intercept and residual variance."""
    n = x.shape[0]
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    sxx = float(dx @ dx)
    slope = float(dx @ (y - ym)) / sxx
    intercept = ym - slope * xm
    resid = y - intercept - slope * x
    rv = float(resid @ resid) / (n - 2)
    se_slope = math.sqrt(rv / sxx)
    se_int = math.sqrt(rv * (1.0 / n + xm * xm / sxx))
    r2 = resid * resid
    se_rv = float(r2.std(ddof=1)) / math.sqrt(n)
    return slope, se_slope, float(intercept), se_int, rv, se_rv


def mc_conditional_check(prior: PriorSpec, i: int, n_samples: int, seed: int,
                         tau: Optional[float] = None) -> list:
    """Regression checks of the conditional-normal formulas after observing project ``i``.

    Exact discovery: for every ``j != i`` regress ``v_j`` on ``v_i``; slope
    ``rho s_j / s_i``, intercept ``mu_j - slope mu_i``, residual variance
    ``(1 - rho^2) s_j^2``.  With ``tau`` the values are drawn first and the
    signal ``s = v_i + tau e`` second; then the variance of the posterior
    mean of ``v_i`` should be ``s_i^4 / (s_i^2 + tau^2)`` and ``v_j`` on ``s``
    has slope ``rho s_i s_j / (s_i^2 + tau^2)`` and residual variance
    ``s_j^2 (1 - rho^2 s_i^2 / (s_i^2 + tau^2))``.
    """
    if n_samples < 100_000:
        raise DomainError("need at least 100000 samples")
    if not 0 <= i < prior.n:
        raise DomainError(f"project index {i} out of range")
    v = sample_values(prior, n_samples, seed)
    mu, sd, rho = prior.means, prior.sds, prior.rho
    checks = []
    for j in range(prior.n):
        if j == i:
            continue
        slope, ses, icpt, sei, rv, serv = _regress(v[:, i], v[:, j])
        k = rho * sd[j] / sd[i]
        checks += [
            RegressionCheck(f"slope v{j + 1}|v{i + 1}", slope, ses, k),
            RegressionCheck(f"intercept v{j + 1}|v{i + 1}", icpt, sei, mu[j] - k * mu[i]),
            RegressionCheck(f"residual variance v{j + 1}|v{i + 1}", rv, serv, (1.0 - rho * rho) * sd[j] ** 2),
        ]
    if tau is None:
        return checks
    if not tau > 0:
        raise DomainError("tau must be positive")
    s = noisy_signal(v[:, i], tau, seed)
    gain = sd[i] ** 2 / (sd[i] ** 2 + tau * tau)
    q = mu[i] + gain * (s - mu[i])
    qc = q - q.mean()
    qvar = float(qc @ qc) / (n_samples - 1)
    se_qvar = float((qc * qc).std(ddof=1)) / math.sqrt(n_samples)
    checks.append(RegressionCheck(f"posterior-mean variance q{i + 1}", qvar, se_qvar,
                                  sd[i] ** 4 / (sd[i] ** 2 + tau * tau)))
    for j in range(prior.n):
        if j == i:
            continue
        slope, ses, _, _, rv, serv = _regress(s, v[:, j])
        checks += [
            RegressionCheck(f"slope v{j + 1}|s{i + 1}", slope, ses, rho * sd[i] * sd[j] / (sd[i] ** 2 + tau * tau)),
            RegressionCheck(f"residual variance v{j + 1}|s{i + 1}", rv, serv, sd[j] ** 2 * (1.0 - rho * rho * gain)),
        ]
    return checks
