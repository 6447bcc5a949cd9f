import pytest
from sklearn.base import clone

from mixlab import exact
from mixlab.estimators import AssumptionChecker, CoverageSimulator, ExactMixingAnalyzer, ExpMomentEstimator
from mixlab.graphs import cycle


def test_get_params_and_clone():
    est = ExpMomentEstimator(method="mc", replicas=500, seed=4)
    params = est.get_params()
    assert params["replicas"] == 500 and params["method"] == "mc"
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(seed=9)
    assert est.seed == 9


def test_exact_analyzer_matches_functions():
    a = ExactMixingAnalyzer().fit("cycle:n=6")
    k = exact.build_kernel(cycle(6))
    assert a.t_u_ == exact.uniform_mixing_time(k)
    assert a.t_rel_ == pytest.approx(exact.spectrum(k).t_rel)
    assert a.greens_.row.sum() == pytest.approx(a.t_u_ + 1)


def test_exp_moment_estimator_exact_and_mc_agree():
    ex = ExpMomentEstimator(method="exact", t_max=40).fit(cycle(3))
    mc = ExpMomentEstimator(method="mc", t_grid=list(range(41)), replicas=20_000, seed=1).fit(cycle(3))
    assert ex.result_.status == "determined"
    assert abs(mc.curve_.values - ex.curve_.values).max() < 0.05
    with pytest.raises(ValueError):
        ExpMomentEstimator(method="bogus").fit(cycle(3))


def test_coverage_and_assumptions():
    cov = CoverageSimulator(t_max=30, replicas=100).fit(cycle(5))
    assert cov.mean_uncovered()[0] == 4
    rep = AssumptionChecker().fit("cycle:n=8").report_
    assert rep.K2 == "infeasible"


def test_unfitted_raises():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        CoverageSimulator().mean_uncovered()
