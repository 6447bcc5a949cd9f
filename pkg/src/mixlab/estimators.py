"""Estimator-style wrappers with ``fit`` / ``get_params``.

Each estimator takes its hyperparameters in ``__init__`` and a graph in
``fit``; fitted attributes end in an underscore.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from mixlab import assumptions, exact, lamplighter, simulation
from mixlab.graphs import GraphSpec, parse_graph


def _as_graph(g):
    return g if isinstance(g, GraphSpec) else parse_graph(str(g))


class ExactMixingAnalyzer(BaseEstimator):
    """Dense spectral quantities of the lazy walk.

    Fitted attributes: ``t_u_``, ``t_mix_``, ``t_rel_``, ``lambda0_``,
    ``t_hit_``, ``greens_``.
    """

    def __init__(self, eps=exact.DEFAULT_EPS, dense_limit=exact.DENSE_LIMIT):
        self.eps = eps
        self.dense_limit = dense_limit

    def fit(self, graph, y=None):
        g = _as_graph(graph)
        k = exact.build_kernel(g, self.dense_limit)
        spec = exact.spectrum(k)
        self.graph_ = g
        self.lambda0_, self.t_rel_ = spec.lambda0, spec.t_rel
        self.t_u_ = exact.uniform_mixing_time(k, self.eps)
        self.t_mix_ = exact.tv_mixing_time(k, self.eps)
        self.t_hit_ = exact.hitting_times(k).t_hit
        self.greens_ = exact.greens_table(k, self.t_u_)
        return self


class CoverageSimulator(BaseEstimator):
    """Monte Carlo uncovered-set trajectory; ``coverage_`` holds the sample."""

    def __init__(self, t_max=100, replicas=1000, seed=0, start=0, checkpoint_step=1, threads=1):
        self.t_max = t_max
        self.replicas = replicas
        self.seed = seed
        self.start = start
        self.checkpoint_step = checkpoint_step
        self.threads = threads

    def fit(self, graph, y=None):
        g = _as_graph(graph)
        plan = simulation.SimPlan(graph=g, t_max=self.t_max, replicas=self.replicas, seed=self.seed,
                                  start=self.start, checkpoints=tuple(range(0, self.t_max + 1, self.checkpoint_step)),
                                  threads=self.threads)
        self.coverage_ = simulation.coverage_trajectory(plan)
        return self

    def mean_uncovered(self):
        check_is_fitted(self, "coverage_")
        return self.coverage_.mean()


class ExpMomentEstimator(BaseEstimator):
    """Proxy crossing ``t*`` of ``E[2^|U(t)|]``, exactly or by Monte Carlo.

    ``method="exact"`` runs the covered-set recursion; ``"mc"`` samples
    ``replicas`` walks on ``t_grid``.
    """

    def __init__(self, method="exact", eps=exact.DEFAULT_EPS, t_grid=None, t_max=None, replicas=10_000, seed=0,
                 start=0, threads=1):
        self.method = method
        self.eps = eps
        self.t_grid = t_grid
        self.t_max = t_max
        self.replicas = replicas
        self.seed = seed
        self.start = start
        self.threads = threads

    def fit(self, graph, y=None):
        g = _as_graph(graph)
        if self.method == "exact":
            curve = lamplighter.exp_moment_exact(g, self.start, t_grid=self.t_grid, t_max=self.t_max)
        elif self.method == "mc":
            grid = self.t_grid if self.t_grid is not None else range((self.t_max or 20 * g.vertex_count) + 1)
            curve = lamplighter.exp_moment_mc(g, self.start, list(grid), self.replicas, self.seed, self.threads)
        else:
            raise ValueError("method must be 'exact' or 'mc'")
        self.curve_ = curve
        self.result_ = lamplighter.proxy_mixing_time(curve, self.eps)
        self.t_star_ = self.result_.t_star
        return self


class AssumptionChecker(BaseEstimator):
    """Runs the assumption checks; ``report_`` is an ``AssumptionReport``."""

    def __init__(self, eps=exact.DEFAULT_EPS, k2_cap=assumptions.K2_CAP, dense_limit=exact.DENSE_LIMIT):
        self.eps = eps
        self.k2_cap = k2_cap
        self.dense_limit = dense_limit

    def fit(self, graph, y=None):
        self.report_ = assumptions.check_assumption(_as_graph(graph), self.eps, self.k2_cap, self.dense_limit)
        return self


__all__ = ["ExactMixingAnalyzer", "CoverageSimulator", "ExpMomentEstimator", "AssumptionChecker", "NotFittedError"]
