import math

import pytest

from mixlab import assumptions, exact
from mixlab.graphs import cycle, hypercube, torus


def test_cycle_part_b_infeasible():
    rep = assumptions.check_assumption(cycle(8))
    assert rep.K2 == "infeasible" and not rep.feasible
    assert rep.status["K3"] == "infeasible"
    assert all(v > rep.part_b_rhs for v in rep.part_b_lhs)


def test_torus_4_3_reports_k1_and_flags_part_b():
    rep = assumptions.check_assumption(torus(4, 3))
    assert math.isfinite(rep.K1) and rep.t_u == 20
    # g_adj exceeds 2/5 here, so (5/2 g_adj)^K never drops below exp(-t_u/t_rel)
    assert rep.g_adj > 0.4 and rep.K2 == "infeasible"


def test_hypercube3_k1_from_hitting_table():
    rep = assumptions.check_assumption(hypercube(3))
    k = exact.build_kernel(hypercube(3))
    assert rep.K1 == pytest.approx(exact.hitting_times(k).t_hit / 8)


def test_feasible_case_clamps_n_star():
    rep = assumptions.check_assumption(hypercube(10))
    assert rep.feasible
    lhs, rhs = assumptions.part_b_values(rep.g_adj, rep.t_u, rep.t_rel)
    assert lhs[rep.K2 - 1] <= rhs and all(v > rhs for v in lhs[: rep.K2 - 1])
    assert rep.n_star_raw == pytest.approx(4 * rep.K2 * rep.t_u / rep.g_adj)
    assert rep.n_star == min(math.ceil(rep.n_star_raw), 1024)
    assert rep.flags["n_star_clamped"] == (math.ceil(rep.n_star_raw) > 1024)
    assert set(rep.thresholds) == {"cover_large_set", "n_star", "sandwich_proof"}
    assert rep.K3 is not None and rep.status["K3"] == "ok"


def test_least_k2_brute():
    for g_adj in (0.05, 0.1, 0.2, 0.39):
        k2 = assumptions.least_k2(g_adj, 10, 3.0)
        rhs = math.exp(-10 / 3)
        ok = [K for K in range(1, 65) if 2 * K * (2.5 * g_adj) ** K <= rhs]
        assert k2 == (ok[0] if ok else "infeasible")


def test_capacity_gives_partial_report():
    rep = assumptions.check_assumption(torus(5, 6), dense_limit=4096)
    assert rep.status["t_u"] == "capacity" and rep.K2 is None


def test_band_ratio():
    assert assumptions.band_ratio(8, 3.0, 7, 62) == pytest.approx(69 / (8 * (3 + math.log(8))))
