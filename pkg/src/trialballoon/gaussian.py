"""Univariate and bivariate normal primitives.

The complementary error function follows the rational approximations of
the FreeBSD/fdlibm ``s_erf.c`` implementation (Sun Microsystems, 1993),
coded here for both Python floats and numpy arrays.  Everything downstream
(payoffs, cutoffs, the Monte Carlo sampler) goes through these routines.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, UnsupportedError

__all__ = [
    "NormalParams",
    "PriorSpec",
    "erfc",
    "erfc_array",
    "std_normal_cdf",
    "std_normal_cdf_array",
    "std_normal_pdf",
    "log_std_normal_cdf",
    "log_std_normal_cdf_array",
    "std_normal_quantile",
    "std_normal_quantile_array",
    "conditional_posterior",
    "sum_distribution",
    "bivariate_rect_prob",
]

SQRT2 = math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# fdlibm coefficients
_ERX = 8.45062911510467529297e-01
_PP = (1.28379167095512558561e-01, -3.25042107247001499370e-01, -2.84817495755985104766e-02,
       -5.77027029648944159157e-03, -2.37630166566501626084e-05)
_QQ = (1.0, 3.97917223959155352819e-01, 6.50222499887672944485e-02, 5.08130628187576562776e-03,
       1.32494738004321644526e-04, -3.96022827877536812320e-06)
_PA = (-2.36211856075265944077e-03, 4.14856118683748331666e-01, -3.72207876035701323847e-01,
       3.18346619901161753674e-01, -1.10894694282396677476e-01, 3.54783043256182359371e-02,
       -2.16637559486879084300e-03)
_QA = (1.0, 1.06420880400844228286e-01, 5.40397917702171048937e-01, 7.18286544141962662868e-02,
       1.26171219808761642112e-01, 1.36370839120290507362e-02, 1.19844998467991074170e-02)
_RA = (-9.86494403484714822705e-03, -6.93858572707181764372e-01, -1.05586262253232909814e01,
       -6.23753324503260060396e01, -1.62396669462573470355e02, -1.84605092906711035994e02,
       -8.12874355063065934246e01, -9.81432934416914548592e00)
_SA = (1.0, 1.96512716674392571292e01, 1.37657754143519042600e02, 4.34565877475229228821e02,
       6.45387271733267880336e02, 4.29008140027567833386e02, 1.08635005541779435134e02,
       6.57024977031928170135e00, -6.04244152148580987438e-02)
_RB = (-9.86494292470009928597e-03, -7.99283237680523006574e-01, -1.77579549177547519889e01,
       -1.60636384855821916062e02, -6.37566443368389627722e02, -1.02509513161107724954e03,
       -4.83519191608651397019e02)
_SB = (1.0, 3.03380607434824582924e01, 3.25792512996573918826e02, 1.53672958608443695994e03,
       3.19985821950859553908e03, 2.55305040643316442583e03, 4.74528541206955367215e02,
       -2.24409524465858183362e01)


def _poly(coeffs: Sequence[float], x):
    acc = coeffs[-1]
    for c in reversed(coeffs[:-1]):
        acc = acc * x + c
    return acc


def _trunc32(x: float) -> float:
    bits = struct.unpack("<Q", struct.pack("<d", x))[0] & 0xFFFFFFFF00000000
    return struct.unpack("<d", struct.pack("<Q", bits))[0]


def _tail_parts(a: float) -> tuple:
    """Two exponents summing to log(a * erfc(a)) for a >= 1.25.

    The first is exact in floating point; exponentiating them separately
    keeps full relative accuracy far into the tail.
    """
    s = 1.0 / (a * a)
    if a < 1.0 / 0.35:
        rs = _poly(_RA, s) / _poly(_SA, s)
    else:
        rs = _poly(_RB, s) / _poly(_SB, s)
    z = _trunc32(a)
    return -z * z - 0.5625, (z - a) * (z + a) + rs


def _log_tail_scaled(a: float) -> float:
    """log(a * erfc(a)) for a >= 1.25, without forming erfc(a)."""
    big, small = _tail_parts(a)
    return big + small


def _tail(a: float) -> float:
    big, small = _tail_parts(a)
    return math.exp(big) * math.exp(small) / a


def erfc(x: float) -> float:
    """Complementary error function of a Python float."""
    if math.isnan(x):
        return math.nan
    if math.isinf(x):
        return 0.0 if x > 0 else 2.0
    a = abs(x)
    if a < 0.84375:
        if a < 2.0**-56:
            return 1.0 - x
        z = x * x
        y = _poly(_PP, z) / _poly(_QQ, z)
        if x < 0.25:
            return 1.0 - (x + x * y)
        return 0.5 - (x * y + (x - 0.5))
    if a < 1.25:
        pq = _poly(_PA, a - 1.0) / _poly(_QA, a - 1.0)
        if x >= 0:
            return (1.0 - _ERX) - pq
        return 1.0 + (_ERX + pq)
    if x < 0:
        if a >= 6.0:
            return 2.0
        return 2.0 - _tail(a)
    if a >= 28.0:
        return 0.0
    return _tail(a)


def _trunc32_array(a: np.ndarray) -> np.ndarray:
    bits = a.view(np.uint64) & np.uint64(0xFFFFFFFF00000000)
    return bits.view(np.float64)


def _tail_parts_array(a: np.ndarray) -> tuple:
    s = 1.0 / (a * a)
    near = a < 1.0 / 0.35
    rs = np.where(near, _poly(_RA, s) / _poly(_SA, s), _poly(_RB, s) / _poly(_SB, s))
    z = _trunc32_array(np.ascontiguousarray(a, dtype=np.float64))
    return -z * z - 0.5625, (z - a) * (z + a) + rs


def _log_tail_scaled_array(a: np.ndarray) -> np.ndarray:
    big, small = _tail_parts_array(a)
    return big + small


def erfc_array(x) -> np.ndarray:
    """Vectorised :func:`erfc`; agrees with the scalar version to a few ulps."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    a = np.abs(x)

    m = a < 0.84375
    if m.any():
        xs = x[m]
        z = xs * xs
        y = _poly(_PP, z) / _poly(_QQ, z)
        out[m] = np.where(xs < 0.25, 1.0 - (xs + xs * y), 0.5 - (xs * y + (xs - 0.5)))
    m = (a >= 0.84375) & (a < 1.25)
    if m.any():
        xs = x[m]
        s = np.abs(xs) - 1.0
        pq = _poly(_PA, s) / _poly(_QA, s)
        out[m] = np.where(xs >= 0, (1.0 - _ERX) - pq, 1.0 + (_ERX + pq))
    m = (a >= 1.25) & np.isfinite(a)
    if m.any():
        xs = x[m]
        ax = np.abs(xs)
        with np.errstate(under="ignore"):
            big, small = _tail_parts_array(ax)
            r = np.exp(big) * np.exp(small) / ax
        r = np.where(ax >= 28.0, 0.0, r)
        out[m] = np.where(xs > 0, r, np.where(ax >= 6.0, 2.0, 2.0 - r))
    out[np.isposinf(x)] = 0.0
    out[np.isneginf(x)] = 2.0
    out[np.isnan(x)] = np.nan
    return out


def _check_finite(x: float) -> None:
    if not math.isfinite(x):
        raise DomainError(f"argument must be finite, got {x!r}")


def std_normal_cdf(x: float) -> float:
    """P(X <= x) for a standard normal X."""
    _check_finite(x)
    return 0.5 * erfc(-x / SQRT2)


def std_normal_cdf_array(x) -> np.ndarray:
    return 0.5 * erfc_array(-np.asarray(x, dtype=np.float64) / SQRT2)


def std_normal_pdf(x: float) -> float:
    _check_finite(x)
    return INV_SQRT_2PI * math.exp(-0.5 * x * x)


def log_std_normal_cdf(x: float) -> float:
    """log P(X <= x), accurate far into the lower tail where the CDF underflows."""
    if math.isnan(x):
        raise DomainError("argument must not be NaN")
    if x == math.inf:
        return 0.0
    if x == -math.inf:
        return -math.inf
    t = -x / SQRT2
    if t >= 1.25:
        return math.log(0.5) + _log_tail_scaled(t) - math.log(t)
    if x > 0:
        return math.log1p(-0.5 * erfc(x / SQRT2))
    return math.log(0.5 * erfc(t))


def log_std_normal_cdf_array(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    t = -x / SQRT2
    out = np.empty_like(x)
    tail = t >= 1.25
    if tail.any():
        tt = t[tail]
        out[tail] = math.log(0.5) + _log_tail_scaled_array(tt) - np.log(tt)
    rest = ~tail
    if rest.any():
        xr = x[rest]
        with np.errstate(divide="ignore"):
            out[rest] = np.where(
                xr > 0,
                np.log1p(-0.5 * erfc_array(xr / SQRT2)),
                np.log(0.5 * erfc_array(-xr / SQRT2)),
            )
    return out


def std_normal_quantile(p: float) -> float:
    """Inverse of :func:`std_normal_cdf` by bisection on a guaranteed bracket."""
    if not (0.0 < p < 1.0):
        raise DomainError(f"p must lie in (0, 1), got {p!r}")
    if p > 0.5:
        # 1 - p is exact for p in [0.5, 1)
        return -std_normal_quantile(1.0 - p)
    if p == 0.5:
        return 0.0
    lo, hi = -40.0, 0.0
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if std_normal_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    # pick the endpoint whose CDF is closer to p
    return lo if abs(std_normal_cdf(lo) - p) < abs(std_normal_cdf(hi) - p) else hi


def std_normal_quantile_array(p, max_iter: int = 60) -> np.ndarray:
    """Vectorised quantile for the sampler.

    Works on ``q = min(p, 1 - p)`` and solves ``log Phi(x) = log q`` by Newton
    steps.  The start ``-sqrt(-2 log q)`` lies left of the root (Chernoff bound)
    and log Phi is concave, so the iterates increase monotonically to the root.
    """
    p = np.asarray(p, dtype=np.float64)
    if np.any(~((p > 0.0) & (p < 1.0))):
        raise DomainError("all probabilities must lie in (0, 1)")
    upper = p > 0.5
    q = np.where(upper, 1.0 - p, p)
    logq = np.log(q)
    x = -np.sqrt(-2.0 * logq)
    for _ in range(max_iter):
        lphi = log_std_normal_cdf_array(x)
        # d/dx log Phi(x) = phi(x) / Phi(x) = exp(log phi - log Phi)
        slope = np.exp(-0.5 * x * x - LOG_SQRT_2PI - lphi)
        step = (logq - lphi) / slope
        x = np.minimum(x + step, 0.0)
        if np.all(np.abs(step) <= 1e-15 * (1.0 + np.abs(x))):
            break
    return np.where(upper, -x, x)


@dataclass(frozen=True)
class NormalParams:
    """A normal marginal; ``known`` marks a degenerate, fully revealed value."""

    mean: float
    sd: float
    known: bool = False

    def __post_init__(self):
        if self.known:
            if self.sd != 0.0:
                raise DomainError("a known value must have sd 0")
        elif not (self.sd > 0 and math.isfinite(self.sd)):
            raise DomainError(f"sd must be positive and finite, got {self.sd!r}")
        if not math.isfinite(self.mean):
            raise DomainError(f"mean must be finite, got {self.mean!r}")

    @property
    def var(self) -> float:
        return self.sd * self.sd


@dataclass(frozen=True)
class PriorSpec:
    """Common prior over project values: equal pairwise correlation ``rho``.

    Validation only enforces a valid correlation matrix, i.e.
    ``-1/(n-1) <= rho <= 1``.  Each operation checks its own, usually
    narrower, range for ``rho``.
    """

    means: tuple
    sds: tuple
    rho: float

    def __post_init__(self):
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))
        object.__setattr__(self, "sds", tuple(float(s) for s in self.sds))
        n = len(self.means)
        if n < 2:
            raise DomainError("a prior needs at least two projects")
        if len(self.sds) != n:
            raise DomainError("means and sds must have equal length")
        if not all(math.isfinite(m) for m in self.means):
            raise DomainError("means must be finite")
        if not all(s > 0 and math.isfinite(s) for s in self.sds):
            raise DomainError("all sds must be positive")
        if not math.isfinite(self.rho) or not (-1.0 / (n - 1) <= self.rho <= 1.0):
            raise DomainError(f"rho={self.rho!r} does not give a valid correlation matrix for n={n}")

    @property
    def n(self) -> int:
        return len(self.means)

    @classmethod
    def disfavored(cls, mu: float, c: float, sd1: float, sd2: float, rho: float) -> "PriorSpec":
        """Two projects with means ``(-mu, c * mu)``."""
        return cls((-mu, c * mu), (sd1, sd2), rho)

    def marginal(self, i: int) -> NormalParams:
        return NormalParams(self.means[i], self.sds[i])

    def with_means(self, means: Iterable[float]) -> "PriorSpec":
        return PriorSpec(tuple(means), self.sds, self.rho)

    def permuted(self, order: Sequence[int]) -> "PriorSpec":
        return PriorSpec(tuple(self.means[k] for k in order), tuple(self.sds[k] for k in order), self.rho)

    def require_rho(self, lo: float, hi: float, *, closed: bool = False) -> None:
        """Raise UnsupportedError when the caller's formulas do not cover this rho."""
        ok = lo <= self.rho <= hi if closed else lo < self.rho < hi
        if not ok:
            bracket = "[{}, {}]" if closed else "({}, {})"
            raise UnsupportedError(f"rho must lie in {bracket.format(lo, hi)}, got {self.rho!r}")


def conditional_posterior(prior: PriorSpec, observed: int, value: float) -> list:
    """Posterior marginals after project ``observed`` is revealed to equal ``value``.

    For j != i: mean mu_j + rho (sd_j / sd_i)(v_i - mu_i), variance (1 - rho^2) sd_j^2.
    """
    if not 0 <= observed < prior.n:
        raise DomainError(f"observed index {observed} out of range for n={prior.n}")
    if not math.isfinite(value):
        raise DomainError("observed value must be finite")
    i = observed
    shift = (value - prior.means[i]) / prior.sds[i]
    resid = math.sqrt(max(0.0, 1.0 - prior.rho * prior.rho))
    out = []
    for j in range(prior.n):
        if j == i:
            out.append(NormalParams(value, 0.0, known=True))
        elif resid == 0.0:
            out.append(NormalParams(prior.means[j] + prior.rho * prior.sds[j] * shift, 0.0, known=True))
        else:
            out.append(NormalParams(prior.means[j] + prior.rho * prior.sds[j] * shift, resid * prior.sds[j]))
    return out


def sum_distribution(prior: PriorSpec, subset: Iterable[int]) -> NormalParams:
    """Distribution of the sum of the projects in ``subset``."""
    idx = sorted(set(subset))
    if not idx:
        raise DomainError("subset must be nonempty")
    if idx[0] < 0 or idx[-1] >= prior.n:
        raise DomainError("subset index out of range")
    sds = [prior.sds[k] for k in idx]
    total = math.fsum(sds)
    sq = math.fsum(s * s for s in sds)
    # sum_i s_i^2 + 2 rho sum_{i<j} s_i s_j == (1 - rho) sum s_i^2 + rho (sum s_i)^2
    var = (1.0 - prior.rho) * sq + prior.rho * total * total
    return NormalParams(math.fsum(prior.means[k] for k in idx), math.sqrt(var))


# -- bivariate rectangle probabilities -------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def _gl(f, a: float, b: float) -> float:
    half = 0.5 * (b - a)
    x = 0.5 * (a + b) + half * _GL_NODES
    return half * float(np.dot(_GL_WEIGHTS, f(x)))


def _adaptive(f, a: float, b: float, rtol: float, atol: float, depth: int = 0) -> float:
    whole = _gl(f, a, b)
    mid = 0.5 * (a + b)
    left = _gl(f, a, mid)
    right = _gl(f, mid, b)
    if abs(left + right - whole) <= max(atol, rtol * abs(left + right)) or depth > 40:
        return left + right
    return _adaptive(f, a, mid, rtol, atol, depth + 1) + _adaptive(f, mid, b, rtol, atol, depth + 1)


def bivariate_rect_prob(a: float, b: float, rho: float) -> float:
    """P(X <= a, Y <= b) for a standard bivariate normal with correlation ``rho``.

    Integrates ``Phi((M - rho x) / sqrt(1 - rho^2)) phi(x)`` over ``x <= m``,
    with ``m = min(a, b)`` and ``M = max(a, b)``, by panel-adaptive 20-point
    Gauss-Legendre quadrature.  Ordering the limits makes the result exactly
    symmetric in ``(a, b)``.  The tolerance is relative, so deep-tail
    probabilities keep their significant digits until they underflow.
    """
    if math.isnan(a) or math.isnan(b) or math.isnan(rho):
        raise DomainError("arguments must not be NaN")
    if not -1.0 < rho < 1.0:
        raise DomainError(f"rho must lie in (-1, 1), got {rho!r}")
    if a == -math.inf or b == -math.inf:
        return 0.0
    if a == math.inf:
        return 0.5 * erfc(-b / SQRT2)
    if b == math.inf:
        return 0.5 * erfc(-a / SQRT2)
    m, big = (a, b) if a <= b else (b, a)
    if rho == 0.0:
        return 0.5 * erfc(-m / SQRT2) * 0.5 * erfc(-big / SQRT2)
    scale = 1.0 / math.sqrt((1.0 - rho) * (1.0 + rho))

    def integrand(x):
        return INV_SQRT_2PI * np.exp(-0.5 * x * x) * 0.5 * erfc_array(-(big - rho * x) * scale / SQRT2)

    hi = min(m, 9.0)
    lo = min(hi, 0.0) - 12.0
    # panel edges: unit-ish widths plus the kink of the conditional CDF factor
    edges = {lo, hi}
    # the conditional factor steps from 0 to 1 over a width ~ sqrt(1 - rho^2) / |rho|
    width = 1.0 / (scale * abs(rho))
    for k in (-16, -8, -4, -2, -1, 0, 1, 2, 4, 8, 16):
        x = big / rho + k * width
        if lo < x < hi:
            edges.add(x)
    edges.update(np.linspace(lo, hi, int(math.ceil((hi - lo) / 2.0)) + 1).tolist())
    pts = sorted(edges)
    panels = [(left, right) for left, right in zip(pts[:-1], pts[1:]) if right > left]
    # panels far below the total need no relative accuracy of their own
    rough = sum(_gl(integrand, left, right) for left, right in panels)
    atol = max(1e-300, 1e-17 * rough)
    total = 0.0
    for left, right in panels:
        total += _adaptive(integrand, left, right, 1e-13, atol)
    if m > 9.0:
        # mass of X in (9, m] with Y <= M; Y <= M is nearly sure when both are large
        total += 0.5 * (erfc(-m / SQRT2) - erfc(-9.0 / SQRT2))
    return min(max(total, 0.0), 1.0)


# below this the plain quadrature is switched for a rescaled log-space one
_LOG_SWITCH = 1e-250


def log_bivariate_rect_prob(a: float, b: float, rho: float) -> float:
    """log P(X <= a, Y <= b), accurate after the probability itself underflows.

    The log integrand ``log phi(x) + log Phi((M - rho x) / sqrt(1 - rho^2))``
    is concave.  Its peak on ``x <= min(a, b)`` is found by ternary search,
    the window is widened until the integrand has fallen by ``exp(-45)`` on
    both sides, and ``exp(f - f_max)`` is integrated over that window.
    """
    p = bivariate_rect_prob(a, b, rho)
    if p > _LOG_SWITCH:
        return math.log(p)
    if a == -math.inf or b == -math.inf:
        return -math.inf
    m, big = (a, b) if a <= b else (b, a)
    scale = 1.0 / math.sqrt((1.0 - rho) * (1.0 + rho))

    def f(x):
        return -0.5 * x * x - LOG_SQRT_2PI + log_std_normal_cdf_array((big - rho * np.asarray(x)) * scale)

    lo, hi = m - 80.0 - abs(m), m
    while hi - lo > 1e-7:
        x1 = lo + (hi - lo) / 3.0
        x2 = hi - (hi - lo) / 3.0
        if f(x1) < f(x2):
            lo = x1
        else:
            hi = x2
    peak = 0.5 * (lo + hi)
    top = float(f(peak))
    drop = 45.0

    def reach(direction: float, limit: float) -> float:
        step = 1e-3
        while True:
            x = peak + direction * step
            if direction > 0 and x >= limit:
                return limit
            if float(f(x)) < top - drop:
                return x
            step *= 2.0

    left, right = reach(-1.0, -math.inf), reach(1.0, m)

    def shifted(x):
        return np.exp(f(x) - top)

    # f - top carries rounding noise of a few ulps of |top|
    rtol = max(1e-13, 8.0 * np.finfo(float).eps * abs(top))
    edges = np.linspace(left, right, 17)
    total = math.fsum(_adaptive(shifted, float(u), float(v), rtol, 1e-17) for u, v in zip(edges[:-1], edges[1:]))
    return top + math.log(total)
