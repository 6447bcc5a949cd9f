import itertools

import numpy as np
import pytest

from mixlab import exact, simulation
from mixlab.errors import PreconditionError
from mixlab.graphs import complete, cycle, explicit, torus
from mixlab.simulation import SimPlan


def expected_uncovered_by_enumeration(g, start, t):
    """Oracle: sum over every lazy path of length ``t``."""
    moves = [(None, 0.5)] + [(v, 0.5 / g.degree) for v in range(g.degree)]
    total = 0.0
    for path in itertools.product(moves, repeat=t):
        x, seen, p = start, {start}, 1.0
        for choice, q in path:
            p *= q
            if choice is not None:
                x = g.neighbors(x)[choice]
                seen.add(x)
        total += p * (g.vertex_count - len(seen))
    return total


def test_hold_fraction_complete2():
    path = simulation.simulate_walk(SimPlan(graph=complete(2), t_max=10**6, seed=11))
    hold = np.mean(path[1:] == path[:-1])
    assert abs(hold - 0.5) < 0.002


def test_occupation_cycle4():
    path = simulation.simulate_walk(SimPlan(graph=cycle(4), t_max=400_000, seed=3))
    freq = np.bincount(path, minlength=4) / path.size
    assert np.all(np.abs(freq - 0.25) < 0.01)


def test_single_trajectory_matches_vector_engine_and_replays():
    g = torus(4, 2)
    plan = SimPlan(graph=g, t_max=300, seed=9, start=5)
    a = simulation.simulate_walk(plan, replica=3)
    assert np.array_equal(a, simulation.simulate_walk(plan, replica=3))
    w = simulation.Walkers(g, 9, [0, 1, 2, 3], 5)
    traj = [w.pos.copy()]
    for _ in range(300):
        traj.append(w.step().copy())
    assert np.array_equal(np.array(traj)[:, 3], a)


def test_coverage_basics():
    g = cycle(7)
    sample = simulation.coverage_trajectory(SimPlan(graph=g, t_max=200, replicas=500, seed=1))
    assert np.all(sample.uncovered[:, 0] == 6)
    assert np.all(np.diff(sample.uncovered, axis=1) <= 0)
    assert sample.mean()[-1] < 0.05


def test_coverage_cycle3_one_step():
    sample = simulation.coverage_trajectory(SimPlan(graph=cycle(3), t_max=1, replicas=20_000, seed=2))
    u = sample.uncovered[:, 1]
    se = u.std(ddof=1) / np.sqrt(u.size)
    assert abs(u.mean() - 1.5) < 3 * se


@pytest.mark.parametrize("g, t", [(cycle(5), 6), (torus(3, 2), 4)])
def test_coverage_mean_matches_path_enumeration(g, t):
    expected = expected_uncovered_by_enumeration(g, 0, t)
    sample = simulation.coverage_trajectory(SimPlan(graph=g, t_max=t, replicas=40_000, seed=4))
    u = sample.uncovered[:, -1]
    se = u.std(ddof=1) / np.sqrt(u.size)
    assert abs(u.mean() - expected) < 4 * se


def test_threads_do_not_change_results():
    g = torus(4, 2)
    kw = dict(graph=g, t_max=60, replicas=70_000, seed=5, checkpoints=(0, 10, 60))
    a = simulation.coverage_trajectory(SimPlan(threads=1, **kw), schedule=[8, 0])
    b = simulation.coverage_trajectory(SimPlan(threads=4, **kw), schedule=[8, 0])
    assert np.array_equal(a.uncovered, b.uncovered)
    assert np.array_equal(a.cover_thresholds, b.cover_thresholds)


def test_stationary_start_follows_degrees():
    g = explicit([[1, 2, 3], [0], [0], [0]])
    pos = simulation.start_positions(g, "stationary", 0, np.arange(60_000))
    freq = np.bincount(pos, minlength=4) / pos.size
    assert freq == pytest.approx([0.5, 1 / 6, 1 / 6, 1 / 6], abs=0.01)


def test_local_time_whole_set():
    g = cycle(6)
    plan = SimPlan(graph=g, t_max=40, replicas=300, seed=0, start="stationary")
    tail = simulation.local_time_tail(plan, np.ones(6, bool), 40, t_rel=4.0)
    assert tail.probability.estimate == 0.0
    sample = simulation.nonlazy_local_time(plan, np.ones(6, bool), 40)
    assert np.all(sample.lazy_total == 41)
    assert np.array_equal(sample.nonlazy_total, sample.moves)


def test_local_time_preconditions():
    g = cycle(6)
    with pytest.raises(PreconditionError):
        simulation.local_time_tail(SimPlan(graph=g, t_max=5, start=0), [0], 5, 4.0)
    with pytest.raises(PreconditionError):
        simulation.local_time_tail(SimPlan(graph=g, t_max=5, start="stationary"), [], 5, 4.0)


def test_local_time_mean_matches_stationary_mass():
    g = cycle(8)
    plan = SimPlan(graph=g, t_max=64, replicas=20_000, seed=7, start="stationary")
    s = simulation.local_time_sample(plan, [0, 1, 2], 64)
    se = s.lazy_total.std(ddof=1) / np.sqrt(s.replicas)
    assert abs(s.lazy_total.mean() - 65 * 3 / 8) < 4 * se


def test_distinct_coverage_examples():
    g = cycle(8)
    d0, _ = simulation.distinct_coverage(SimPlan(graph=g, t_max=0, replicas=10, start=0), [0, 1], 0)
    assert np.all(d0 == 1)
    dn, _ = simulation.distinct_coverage(SimPlan(graph=g, t_max=2000, replicas=200, seed=1), np.ones(8, bool), 2000)
    assert np.all(dn == 8)
    single, est = simulation.distinct_coverage(SimPlan(graph=g, t_max=10, replicas=500, seed=2, start=0), [4], 10, 0)
    assert set(np.unique(single)) <= {0, 1}
    assert est.estimate == pytest.approx(np.mean(single == 0))


def test_hitting_probe_trivial_cases():
    g = cycle(6)
    full = simulation.hitting_probe(SimPlan(graph=g, t_max=1, replicas=100, start=2), np.ones(6, bool))
    assert full.probability.estimate == 1.0 and full.window == 1


def test_green_mc_against_exact():
    g = cycle(6)
    mean, _, _ = simulation.green_mc(g, 2, 2, 0, 50)
    assert mean == 1.0
    k = exact.build_kernel(g)
    gt = exact.greens_table(k, 9)
    mean, se, ci = simulation.green_mc(g, 0, 1, 9, 50_000, seed=3)
    assert abs(mean - gt.row[1]) < 4 * se
    assert ci[0] < mean < ci[1]


def test_excursion_degenerate_start():
    ex = simulation.excursion_stats(torus(5, 8), 0, replicas=50, horizon=10)
    assert ex.escape.estimate == 1.0


def test_excursion_needs_high_dimension():
    with pytest.raises(PreconditionError):
        simulation.excursion_stats(torus(5, 4), 1, replicas=10)


def test_wilson_interval_contains_estimate():
    lo, hi = simulation.wilson_interval(3, 100)
    assert lo < 0.03 < hi
    est = simulation.ProbabilityEstimate.from_counts(0, 50)
    assert est.estimate == 0 and est.interval[0] == pytest.approx(0, abs=1e-15) and est.interval[1] > 0


def test_excursion_escape_scales_like_one_over_d():
    scaled = []
    for d in (8, 14):
        ex = simulation.excursion_stats(torus(5, d), 1, replicas=5000, seed=d, horizon=40)
        scaled.append(d * ex.escape.estimate)
    assert 0.3 < min(scaled) and max(scaled) / min(scaled) < 1.5
