"""Constants K1, K2, K3 and n* for a base graph, with per-part feasibility."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from mixlab import exact
from mixlab.errors import CapacityError
from mixlab.validation import check_int

K2_CAP = 64


@dataclass
class AssumptionReport:
    """Everything needed to regenerate the three assumption checks.

    ``K2`` is the least integer in ``[1, k2_cap]`` satisfying
    ``2 K (5/2)^K g_adj^K <= exp(-t_u / t_rel)`` or the string
    ``"infeasible"``.  ``n_star`` is ``ceil(4 K2 t_u / g_adj)`` and is clamped to
    ``|G|`` (flagged) when larger.  ``thresholds`` lists the three set-size
    thresholds in which ``n*``-like quantities appear.
    """

    graph: str
    cardinality: int
    eps: float
    t_u: int | None = None
    t_rel: float | None = None
    lambda0: float | None = None
    t_hit: float | None = None
    g_adj: float | None = None
    g_adj_spread: float | None = None
    K1: float | None = None
    K2: object = None
    part_b_rhs: float | None = None
    part_b_lhs: list = field(default_factory=list)
    n_star_raw: float | None = None
    n_star: int | None = None
    gstar_nstar: float | None = None
    K3: float | None = None
    thresholds: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    status: dict = field(default_factory=dict)

    @property
    def feasible(self):
        return isinstance(self.K2, int)

    def as_dict(self):
        return asdict(self)


def part_b_values(g_adj, t_u, t_rel, k2_cap=K2_CAP):
    """Left sides ``2K (5/2)^K g_adj^K`` for ``K = 1..k2_cap`` and the right side."""
    rhs = math.exp(-t_u / t_rel)
    lhs = [2 * K * (2.5 * g_adj) ** K for K in range(1, k2_cap + 1)]
    return lhs, rhs


def least_k2(g_adj, t_u, t_rel, k2_cap=K2_CAP):
    lhs, rhs = part_b_values(g_adj, t_u, t_rel, k2_cap)
    for K, value in enumerate(lhs, 1):
        if value <= rhs:
            return K
    return "infeasible"


def check_assumption(g, eps=exact.DEFAULT_EPS, k2_cap=K2_CAP, dense_limit=exact.DENSE_LIMIT):
    """Evaluate all three assumption parts on ``g`` from exact quantities.

    Graphs above the dense limit yield a partial report with
    ``status[field] = "capacity"`` for what could not be computed.
    """
    k2_cap = check_int(k2_cap, "k2_cap", min_value=1)
    N = g.vertex_count
    rep = AssumptionReport(graph=g.label(), cardinality=N, eps=float(eps))
    try:
        k = exact.build_kernel(g, dense_limit)
    except CapacityError:
        for name in ("t_u", "t_rel", "t_hit", "g_adj", "K1", "K2", "K3"):
            rep.status[name] = "capacity"
        return rep
    spec = exact.spectrum(k)
    rep.t_rel, rep.lambda0 = spec.t_rel, spec.lambda0
    rep.t_u = exact.uniform_mixing_time(k, eps)
    rep.t_hit = exact.hitting_times(k).t_hit
    rep.K1 = rep.t_hit / N
    gt = exact.greens_table(k, rep.t_u)
    rep.g_adj, rep.g_adj_spread = gt.g_adj, gt.adj_spread
    rep.status.update({name: "ok" for name in ("t_u", "t_rel", "t_hit", "g_adj", "K1")})
    rep.flags["g_adj_below_one"] = rep.g_adj < 1

    rep.part_b_lhs, rep.part_b_rhs = part_b_values(rep.g_adj, rep.t_u, rep.t_rel, k2_cap)
    rep.K2 = least_k2(rep.g_adj, rep.t_u, rep.t_rel, k2_cap)
    rep.flags["part_b"] = rep.feasible
    rep.status["K2"] = "ok" if rep.feasible else "infeasible"
    if not rep.feasible:
        rep.status["K3"] = "infeasible"
        return rep

    K2 = rep.K2
    rep.thresholds = {
        "cover_large_set": 2 * K2 * rep.t_u / rep.g_adj,
        "n_star": 4 * K2 * rep.t_u / rep.g_adj,
        "sandwich_proof": 2 * K2 * rep.t_u / (rep.g_adj - 1) if rep.g_adj > 1 else math.inf,
    }
    rep.n_star_raw = rep.thresholds["n_star"]
    n_star = math.ceil(rep.n_star_raw)
    rep.flags["n_star_clamped"] = n_star > N
    rep.n_star = min(n_star, N)
    rep.gstar_nstar = exact.g_star(gt, rep.n_star)
    log_n = math.log(rep.n_star)
    rep.flags["log_n_star_zero"] = log_n == 0
    rep.K3 = rep.gstar_nstar * log_n / (rep.t_rel + math.log(N))
    rep.status["K3"] = "ok"
    return rep


def band_ratio(cardinality, t_rel, t_u_base, proxy_t_star):
    """``(t* + t_u) / (|G| (t_rel + log|G|))``."""
    return (proxy_t_star + t_u_base) / (cardinality * (t_rel + math.log(cardinality)))
