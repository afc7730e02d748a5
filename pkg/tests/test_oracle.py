import math

import numpy as np
import pytest

from trialballoon.errors import DomainError, UnsupportedError
from trialballoon.gaussian import PriorSpec
from trialballoon.oracle import (
    MIN_SAMPLES,
    McEstimate,
    mc_conditional_check,
    mc_utilities,
    mc_utility,
    sample_values,
    standard_normals,
)
from trialballoon.payoffs import DiscoveryRule, utility_discover_one
from trialballoon.proposal import Weights

HALF = Weights.two(0.5)
PRIOR = PriorSpec((-1.0, 0.5), (1.0, 1.0), 0.5)
ONE0 = DiscoveryRule.one(0)


def test_seed_reproducibility():
    a = mc_utility(PRIOR, HALF, ONE0, 50_000, 7)
    b = mc_utility(PRIOR, HALF, ONE0, 50_000, 7)
    c = mc_utility(PRIOR, HALF, ONE0, 50_000, 8)
    assert a == b
    assert a.mean != c.mean


def test_normals_are_prefix_stable_per_batch():
    # batches are keyed independently, so a longer run extends a shorter one
    short = standard_normals(3, 1000, 1)
    long = standard_normals(3, 2000, 1)
    assert np.array_equal(short[:, 0], long[:1000, 0])
    assert not long.flags.writeable


def test_normals_moments():
    z = standard_normals(11, 400_000, 2)
    assert abs(z.mean()) < 4 / math.sqrt(z.size)
    assert abs(z.var() - 1) < 4 * math.sqrt(2 / z.size)
    assert abs(np.corrcoef(z[:, 0], z[:, 1])[0, 1]) < 4 / math.sqrt(z.shape[0])


def test_standard_error_scaling():
    small = mc_utility(PRIOR, HALF, ONE0, 100_000, 5)
    big = mc_utility(PRIOR, HALF, ONE0, 400_000, 5)
    assert big.std_error == pytest.approx(small.std_error / 2, rel=0.05)


def test_no_discovery_is_exact():
    est = mc_utility(PRIOR, HALF, DiscoveryRule.none(), MIN_SAMPLES, 1)
    assert est.std_error == 0.0
    assert est.mean == 0.5
    assert est.agrees(0.5)
    assert not est.agrees(0.5 + 5 / MIN_SAMPLES)


def test_independent_both_value():
    # half + half * (P(sum < 0) - P(both < 0)) = 1/2 + 1/2 (1/2 - 1/4)
    est = mc_utility(PriorSpec((0.0, 0.0), (1.0, 1.0), 0.0), HALF, DiscoveryRule.both(), 1_000_000, 2)
    assert est.agrees(0.625)
    assert not est.agrees(0.6)


def test_single_discovery_against_exact():
    exact = utility_discover_one(PRIOR, HALF, 0)
    assert exact == pytest.approx(0.6053930431251533, abs=1e-15)
    assert mc_utility(PRIOR, HALF, ONE0, 1_000_000, 2).agrees(exact)


def test_estimate_helpers():
    est = McEstimate(0.51, 0.01, 10_000, 0)
    assert est.z_score(0.5) == pytest.approx(1.0)
    assert est.agrees(0.48) and not est.agrees(0.46)


def test_sample_count_floor():
    with pytest.raises(DomainError):
        mc_utility(PRIOR, HALF, ONE0, MIN_SAMPLES - 1, 0)
    with pytest.raises(DomainError):
        mc_utility(PRIOR, Weights((0.2, 0.3, 0.5)), ONE0, MIN_SAMPLES, 0)


def test_sequential_has_no_sampling_path():
    with pytest.raises(UnsupportedError):
        mc_utility(PRIOR, HALF, DiscoveryRule.sequential(), MIN_SAMPLES, 0)


def test_sample_covariance():
    prior = PriorSpec((0.2, -0.4, 1.0), (1.0, 2.0, 0.5), 0.3)
    v = sample_values(prior, 400_000, 9)
    cov = np.cov(v.T)
    sd = np.asarray(prior.sds)
    want = prior.rho * np.outer(sd, sd)
    np.fill_diagonal(want, sd ** 2)
    assert np.allclose(cov, want, atol=0.03)
    assert np.allclose(v.mean(axis=0), prior.means, atol=0.02)


def test_negative_correlation_sampling():
    prior = PriorSpec((0.0, 0.0), (1.0, 1.0), -0.4)
    v = sample_values(prior, 200_000, 4)
    assert np.corrcoef(v.T)[0, 1] == pytest.approx(-0.4, abs=0.01)


def test_conditional_check_exact_discovery():
    prior = PriorSpec((0.0, 1.0), (1.0, 2.0), 0.5)
    checks = {c.name: c for c in mc_conditional_check(prior, 0, 400_000, 3)}
    assert checks["slope v2|v1"].expected == 1.0
    assert checks["residual variance v2|v1"].expected == pytest.approx(3.0)
    assert all(c.passed for c in checks.values())


def test_conditional_check_independent():
    prior = PriorSpec((0.0, 1.0), (1.0, 2.0), 1e-12)
    checks = {c.name: c for c in mc_conditional_check(prior, 0, 200_000, 6)}
    assert checks["slope v2|v1"].expected == pytest.approx(0.0, abs=1e-11)
    assert checks["slope v2|v1"].passed


def test_conditional_check_noisy_variance():
    prior = PriorSpec((-1.0, 0.4), (0.5, 0.8), 0.3)
    checks = {c.name: c for c in mc_conditional_check(prior, 0, 1_000_000, 21, tau=0.5)}
    q = checks["posterior-mean variance q1"]
    # s^4 / (s^2 + tau^2) with s = tau = 1/2
    assert q.expected == pytest.approx(0.125)
    assert q.passed
    assert checks["residual variance v2|s1"].passed
    # the (1 - rho)^2 reading of the variance is many standard errors away
    assert abs(q.estimate - 0.5 ** 2 * (1 - 0.3) ** 2) > 10 * q.std_error


def test_conditional_check_inputs():
    with pytest.raises(DomainError):
        mc_conditional_check(PRIOR, 0, 50_000, 0)
    with pytest.raises(DomainError):
        mc_conditional_check(PRIOR, 2, 200_000, 0)
    with pytest.raises(DomainError):
        mc_conditional_check(PRIOR, 0, 200_000, 0, tau=0.0)


def test_objectives_share_draws():
    prior = PriorSpec((-1.0, -0.5), (1.0, 1.0), 0.5)
    rules = [DiscoveryRule.one(0), DiscoveryRule.both()]
    gb = mc_utilities(prior, None, rules, 100_000, 2, objective="grand_bundle")
    alo = mc_utilities(prior, None, rules, 100_000, 2, objective="at_least_one")
    for r in rules:
        assert gb[r].mean <= alo[r].mean
