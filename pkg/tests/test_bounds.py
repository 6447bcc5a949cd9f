import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import comb

from mixlab import bounds, exact
from mixlab.graphs import cycle

E2 = 1 / (2 * math.e)


def zd_return_by_convolution(t, d, lazy):
    """Oracle: push the full distribution on a box of ``Z^d`` for ``t`` steps."""
    size = 2 * t + 1
    mu = np.zeros((size,) * d)
    mu[(t,) * d] = 1.0
    out = [1.0]
    for _ in range(t):
        new = 0.5 * mu if lazy else np.zeros_like(mu)
        w = (0.5 if lazy else 1.0) / (2 * d)
        for ax in range(d):
            new += w * (np.roll(mu, 1, axis=ax) + np.roll(mu, -1, axis=ax))
        mu = new
        out.append(mu[(t,) * d])
    return np.array(out)


def test_lazy_return_bound_fixture():
    assert bounds.lazy_return_bound(4, 1) == pytest.approx(math.sqrt(2) * math.sqrt(4 / math.pi) / 2
                                                           + math.exp(-0.5))
    assert bounds.lazy_return_bound(4, 1) == pytest.approx(1.4045, abs=1e-4)


def test_zd_return_fixtures():
    for d in (1, 2, 5):
        assert bounds.zd_return_exact(1, d)[1] == 0.5
    assert bounds.zd_return_exact(4, 1)[4] == pytest.approx(0.2734375)
    z = bounds.zd_return_exact(9, 2, lazy=False)
    assert np.all(z[1::2] == 0)
    assert bounds.zd_return_exact(4, 1, lazy=False)[4] == pytest.approx(0.375)
    assert bounds.zd_return_exact(2, 2, lazy=False)[2] == pytest.approx(0.25)


@pytest.mark.parametrize("d, t", [(1, 30), (2, 16), (3, 10)])
@pytest.mark.parametrize("lazy", [True, False])
def test_zd_return_matches_convolution(d, t, lazy):
    assert np.allclose(bounds.zd_return_exact(t, d, lazy), zd_return_by_convolution(t, d, lazy), atol=1e-14)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_lazy_is_binomial_mixture_of_nonlazy(d):
    t = 40
    nonlazy = bounds.zd_return_exact(t, d, lazy=False)
    mix = [sum(comb(s, k) / 2**s * nonlazy[k] for k in range(s + 1)) for s in range(t + 1)]
    assert np.allclose(bounds.zd_return_exact(t, d), mix)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_nonlazy_bound_dominates(d):
    z = bounds.zd_return_exact(256, d, lazy=False)
    assert all(z[2 * t] <= bounds.nonlazy_return_bound(t, d) for t in range(1, 129))


def test_low_degree_third_term_vanishes():
    terms = [bounds.low_degree_green_terms(2, n, 5, 0.5)[2] for n in (1000, 10_000, 100_000)]
    assert terms == sorted(terms, reverse=True) and terms[-1] < 1e-50


def test_local_time_bound_examples():
    assert bounds.local_time_bound(0, 0.3, 2.0) == 1.0
    assert bounds.local_time_bound(128, 0.5, 2, 1 / 50) == pytest.approx(math.exp(-0.64))
    assert bounds.local_time_bound(128, 0.5, 2, 1 / 50) == pytest.approx(0.5273, abs=1e-4)


def test_ld_delta_at_mean():
    assert bounds.ld_delta(0.3, 0.5, 0.3) == pytest.approx(9.0)


@pytest.mark.parametrize("lam, eps", [(0.5, 0.01), (0.6, 0.1), (0.75, 0.2), (0.9, 0.24)])
def test_ld_rate_quadrature_and_closed_form(lam, eps):
    res = bounds.ld_rate(lam, eps)
    mu = 1 - 2 * eps
    assert res.value == pytest.approx(bounds.ld_rate_dblquad(lam, eps), rel=1e-7)
    assert res.value == pytest.approx(bounds.ld_rate_closed_form(mu + eps, lam, mu), rel=1e-10)
    assert res.inequality_holds and res.delta_in_envelope


def test_q_of_t_values():
    assert bounds.q_of_t(5, 10, 1.2, 50) == pytest.approx(0.2)
    # t = t_u + |G| adds exactly 1 + 1/(2e)
    assert bounds.q_of_t(60, 10, 1.2, 50) == pytest.approx(0.2 + 1 + E2)
    assert bounds.q_of_t(60, 10, 1.2, 50) == pytest.approx(1.38394, abs=1e-5)


def test_deconc_and_tail_fixtures():
    assert bounds.deconc_bound(20, 0.5, 5, 0.5, 10) == pytest.approx(0.96875)
    assert bounds.deconc_bound(20, 0.5, 5, 0.0, 10) == 1.0
    assert bounds.deconc_bound(20, 0.5, 200, 0.5, 10) == pytest.approx(1.0)
    assert bounds.coverage_tail_bound(0, 0.5, 3.0, 2, 0.5, 10) == 2.0


def test_epochs():
    assert bounds.large_set_epoch(0.5, 10, 2).length == pytest.approx(160)
    lengths = [bounds.large_set_epoch(p, 10, 2).length for p in (0.1, 0.5, 1.0)]
    assert lengths == sorted(lengths, reverse=True)
    k = exact.build_kernel(cycle(6))
    gt = exact.greens_table(k, 9)
    ep = bounds.small_set_epoch(6, exact.g_star(gt, 1), 2.0, 1)
    assert ep.length == pytest.approx(2.0 * 6 * gt.row[0])
    assert bounds.small_set_epoch(100, 1.0, 1.0, 16).failure == pytest.approx(math.exp(-2))


def test_schedule_example():
    s = bounds.build_schedule(100, 10, 25)
    assert s.r == 7 and s.s[7] == 30 and s.r_tilde == 4
    assert s.small == [15, 7, 3, 0]
    assert s.s == [100, 90, 80, 70, 60, 50, 40, 30, 15, 7, 3, 0]


@settings(max_examples=200, deadline=None)
@given(N=st.integers(2, 5000), t_u=st.integers(1, 200), n_star=st.integers(1, 6000))
def test_schedule_is_strictly_decreasing_to_zero(N, t_u, n_star):
    s = bounds.build_schedule(N, t_u, n_star).s
    assert s[0] == N and s[-1] == 0
    assert all(a > b for a, b in zip(s, s[1:]))


def test_decimation_crossover_and_status():
    N, t_rel, C4, C5 = 64, 6.0, 0.5, 2.0
    t = C4 / C5 * N * math.log(N)
    assert bounds.large_decimation_bound(10, t, N, t_rel, C4, C5) == pytest.approx(1.0)
    sched = bounds.build_schedule(N, 5, 10)
    res = bounds.decimation_bounds(sched, {"C4": C4, "C5": C5}, 100, t_rel)
    assert res.status == {"large": "ok", "small": "unparameterized", "exp_moment": "unparameterized"}
    assert len(res.large) == sched.r


def test_geo_alpha_half():
    res = bounds.geo_mgf_alpha(0.5)
    assert res.alpha == pytest.approx(2.0)
    assert res.alpha_grid <= res.alpha and res.violations == 0


@settings(max_examples=100, deadline=None)
@given(beta=st.floats(0.05, 0.95), x=st.floats(1e-4, 5), frac=st.floats(0, 0.999))
def test_geo_alpha_inequality_random_points(beta, x, frac):
    alpha = 1 / (1 - beta)
    p_lo = 1 - beta * math.exp(-x)
    p = p_lo + (1 - p_lo) * frac
    assert math.log(p) + x - math.log1p(-(1 - p) * math.exp(x)) <= alpha * x + 1e-12


def hit_probability_by_paths(P, x, S, t):
    n = len(P)
    total = 0.0
    for path in itertools.product(range(n), repeat=t):
        p, cur, hit = 1.0, x, x in S
        for y in path:
            p *= P[cur, y]
            if p == 0:
                break
            cur = y
            hit = hit or y in S
        if p and hit:
            total += p
    return total


def test_hitting_ratio_identity():
    k = exact.build_kernel(cycle(5))
    full = bounds.hitting_ratio_identity_check(k, 0, range(5), 4)
    assert full.prob == pytest.approx(1.0) and full.gap <= 1e-12
    res = bounds.hitting_ratio_identity_check(k, 0, [2], 5)
    assert res.gap <= 1e-10
    assert res.prob == pytest.approx(hit_probability_by_paths(k.P, 0, {2}, 5))
