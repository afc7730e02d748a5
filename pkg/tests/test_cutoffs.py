import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trialballoon.cutoffs import (
    c_ell,
    c_h,
    c_no_curve,
    c_star,
    c_star_star,
    cutoff_derivative,
    cutoff_vs_no_discovery,
    indifference_log_gap,
    trace_cutoff,
)
from trialballoon.errors import DomainError
from trialballoon.gaussian import PriorSpec
from trialballoon.payoffs import utility_discover_both, utility_discover_one, utility_no_discovery
from trialballoon.proposal import Weights

S1, S2, RHO = 1 / 20, 1 / 5, 1 / 4

sd = st.floats(0.01, 10)
rho_st = st.floats(0.01, 0.99)


def test_limit_cutoff_values():
    assert c_star(S1, S2, RHO) == pytest.approx(1 / 3, abs=1e-15)
    assert c_star_star(S1, S2, RHO) == pytest.approx(0.2 / 0.4125, abs=1e-15)
    # exact value of rho s2 / (rho s2 + sqrt(0.0475))
    assert c_ell(S1, S2, RHO) == pytest.approx(0.18660549686337075, abs=1e-15)
    assert c_h(S1, S2, RHO) == pytest.approx(2 / 3, abs=1e-15)


def test_limit_cutoff_edges():
    assert c_star(1.0, 1.0, 1e-12) < 1e-11
    assert c_star(1.0, 1.0, 1 - 1e-12) == pytest.approx(1 / 3, abs=1e-11)
    assert c_star_star(1.0, 1.0, 1 - 1e-12) == pytest.approx(1 / 3, abs=1e-11)
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(DomainError):
            c_star(1.0, 1.0, bad)
    with pytest.raises(DomainError):
        c_h(0.0, 1.0, 0.5)


@settings(max_examples=500, deadline=None)
@given(sd, sd, rho_st)
def test_limit_cutoff_orderings(s1, s2, rho):
    cs, css, cl, ch = c_star(s1, s2, rho), c_star_star(s1, s2, rho), c_ell(s1, s2, rho), c_h(s1, s2, rho)
    assert 0 < cs < 0.5
    assert css > cs
    assert cl < cs
    assert ch > cs
    # c_h sits below c** exactly when project 1 has the larger sd
    if s1 > s2 * (1 + 1e-9):
        assert ch < css
    elif s1 < s2 * (1 - 1e-9):
        assert ch > css


def test_half_weight_cutoff_is_constant():
    for mu in (1e-3 * S2, 0.05, 0.5, 3.0, 50.0):
        r1 = cutoff_vs_no_discovery(mu, S1, S2, RHO, 0.5, project=0)
        r2 = cutoff_vs_no_discovery(mu, S1, S2, RHO, 0.5, project=1)
        assert r1.case == r2.case == "interior"
        assert abs(r1.c_bar - c_star(S1, S2, RHO)) <= 1e-9
        assert abs(r2.c_bar - c_star_star(S1, S2, RHO)) <= 1e-9


def test_root_residual_and_bracket():
    for w1 in (0.3, 0.6, 0.7):
        for mu in (0.1, 1.0, 10.0):
            r = cutoff_vs_no_discovery(mu, S1, S2, RHO, w1)
            if r.case == "interior":
                assert abs(r.residual) < 1e-12
                assert r.bracket_width <= 1e-10
                g_lo = indifference_log_gap(mu, r.c_bar - 1e-6, S1, S2, RHO, w1)
                g_hi = indifference_log_gap(mu, r.c_bar + 1e-6, S1, S2, RHO, w1)
                assert g_lo < 0 < g_hi


def test_root_is_payoff_indifference():
    # at the returned cutoff the exact discovery payoff equals the no-discovery payoff
    for w1, project in [(0.7, 0), (0.3, 0), (0.6, 1)]:
        mu = 0.4
        r = cutoff_vs_no_discovery(mu, S1, S2, RHO, w1, project=project)
        prior = PriorSpec.disfavored(mu, r.c_bar, S1, S2, RHO)
        w = Weights.two(w1)
        assert utility_discover_one(prior, w, project) == pytest.approx(utility_no_discovery(prior, w), abs=1e-12)


def test_limit_at_large_mu():
    r = cutoff_vs_no_discovery(50.0, S1, S2, RHO, 0.7)
    assert abs(r.c_bar - c_star(S1, S2, RHO)) < 1e-3


def test_boundary_cases():
    always = cutoff_vs_no_discovery(0.01, S1, S2, RHO, 0.9)
    assert always.always_discover and always.c_bar == 0.0
    assert indifference_log_gap(0.01, 0.0, S1, S2, RHO, 0.9) >= 0
    never = cutoff_vs_no_discovery(0.01, S1, S2, RHO, 0.1)
    assert never.never_discover and never.c_bar == 1.0
    assert indifference_log_gap(0.01, 1.0, S1, S2, RHO, 0.1) <= 0


def test_never_boundary_uses_the_favoured_sd():
    # as c -> 1 the favored project's belief after discovering project 1 has
    # sd rho * s2, so the boundary inequality is w1/w2 <= Phi(-mu/(rho s2))/(1/2)
    s1, s2, rho, mu = 0.3, 1.2, 0.4, 0.5
    c = 1 - 1e-9
    for w1 in np.linspace(0.05, 0.6, 23):
        w = Weights.two(float(w1))
        prior = PriorSpec.disfavored(mu, c, s1, s2, rho)
        gain = utility_discover_one(prior, w, 0) - utility_no_discovery(prior, w)
        gap = indifference_log_gap(mu, c, s1, s2, rho, float(w1))
        if abs(gain) > 1e-9:
            assert (gain > 0) == (gap > 0)


def test_mu_zero_is_degenerate():
    with pytest.raises(DomainError):
        cutoff_vs_no_discovery(0.0, S1, S2, RHO, 0.7)
    with pytest.raises(DomainError):
        cutoff_vs_no_discovery(-1.0, S1, S2, RHO, 0.7)


@pytest.mark.parametrize("w1, sign", [(0.7, 1), (0.3, -1)])
def test_traced_curve_monotone(w1, sign):
    mus = np.geomspace(1e-3 * S2, 20, 120)
    res = [r for r in trace_cutoff(mus, S1, S2, RHO, w1) ]
    pairs = [(m, r.c_bar) for m, r in zip(mus, res) if r.case == "interior"]
    assert len(pairs) > 50
    diffs = np.diff([c for _, c in pairs])
    assert np.all(sign * diffs > 0)
    for m, c in pairs:
        assert sign * cutoff_derivative(m, c, S1, S2, RHO, w1) > 0


def test_derivative_vanishes_at_half_weight():
    for mu in (0.05, 1.0, 20.0):
        c = cutoff_vs_no_discovery(mu, S1, S2, RHO, 0.5).c_bar
        assert abs(cutoff_derivative(mu, c, S1, S2, RHO, 0.5)) <= 1e-10


@pytest.mark.parametrize("project", [0, 1])
def test_derivative_matches_finite_difference(project):
    for mu in (0.05, 0.2, 1.0, 3.0):
        h = 1e-5 * mu
        up = cutoff_vs_no_discovery(mu + h, S1, S2, RHO, 0.7, project=project)
        dn = cutoff_vs_no_discovery(mu - h, S1, S2, RHO, 0.7, project=project)
        mid = cutoff_vs_no_discovery(mu, S1, S2, RHO, 0.7, project=project)
        if "interior" == up.case == dn.case == mid.case:
            fd = (up.c_bar - dn.c_bar) / (2 * h)
            assert cutoff_derivative(mu, mid.c_bar, S1, S2, RHO, 0.7, project=project) == pytest.approx(fd, abs=1e-5)


@pytest.mark.parametrize("w1", [0.3, 0.7])
@pytest.mark.parametrize("project, limit", [(0, c_star), (1, c_star_star)])
def test_convergence_to_limit(w1, project, limit):
    target = limit(S1, S2, RHO)
    mus = np.linspace(2.0, 60.0, 30)
    errs = []
    for m in mus:
        r = cutoff_vs_no_discovery(m, S1, S2, RHO, w1, project=project)
        assert r.case == "interior"
        errs.append(abs(r.c_bar - target))
    assert np.all(np.diff(errs) < 0)
    assert errs[-1] < 1e-3


# -- full discovery against none at equal weights ---------------------------


def test_c_no_curve_settles():
    mus = [0.01, 0.1, 0.5, 1, 2, 5, 10, 20, 50, 100]
    points, c_no = c_no_curve(S1, S2, RHO, mus)
    assert points[0].flag == "always"
    s = math.sqrt(S1 ** 2 + S2 ** 2 + 2 * RHO * S1 * S2)
    assert c_no == pytest.approx(S2 / (S2 + s), abs=1e-9)
    tail = [p.c for p in points if p.mu >= 0.5]
    assert max(tail) - min(tail) < 1e-9


def test_c_no_points_are_indifferent():
    points, _ = c_no_curve(S1, S2, RHO, [0.1, 0.5, 2.0])
    for p in points:
        prior = PriorSpec.disfavored(p.mu, p.c, S1, S2, RHO)
        assert utility_discover_both(prior, Weights.two(0.5)) == pytest.approx(0.5, abs=1e-10)


def test_both_wins_near_c_one_and_for_small_mu():
    w = Weights.two(0.5)
    for mu in (0.01, 0.5, 5.0):
        prior = PriorSpec.disfavored(mu, 0.999, S1, S2, RHO)
        assert utility_discover_both(prior, w) > utility_no_discovery(prior, w)
    for c in np.linspace(0, 0.99, 12):
        prior = PriorSpec.disfavored(0.05 * S2, float(c), S1, S2, RHO)
        assert utility_discover_both(prior, w) > utility_no_discovery(prior, w)
    neg = PriorSpec((-1.0, -2.0), (S1, S2), RHO)
    assert utility_discover_both(neg, w) >= utility_no_discovery(neg, w) == 0.0
