"""Vectorised Monte Carlo for the lazy walk.

Replicas advance in lockstep as numpy arrays.  Each replica draws one
counter-based 64-bit word per step (see :mod:`mixlab.rng`): bit 0 decides the
hold, bits 1-2 are spare lamp coins for the lamplighter, and the top 53 bits
pick the neighbour.  Replica ``r`` therefore follows the same trajectory no
matter how replicas are chunked or how many threads run them.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm
from statsmodels.stats.proportion import proportion_confint

from mixlab import rng
from mixlab.errors import PreconditionError
from mixlab.graphs import GraphSpec
from mixlab.validation import check_int, check_sorted_times, check_vertex_set

CHUNK = 1 << 15
THREADS_ENV = "MIXLAB_THREADS"
_ONE = np.uint64(1)


def default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class SimPlan:
    """What to simulate: graph, start rule, horizon, replica count and seed.

    ``start`` is either ``"stationary"`` or a fixed vertex id.
    """

    graph: GraphSpec
    t_max: int
    replicas: int = 1000
    seed: int = 0
    start: object = 0
    checkpoints: tuple = ()
    threads: int = 1

    def __post_init__(self):
        check_int(self.t_max, "t_max", min_value=0)
        check_int(self.replicas, "replicas", min_value=1)
        if self.start != "stationary":
            self.graph.check_vertex(self.start)
        if self.checkpoints:
            object.__setattr__(self, "checkpoints",
                               tuple(int(c) for c in check_sorted_times(self.checkpoints, "checkpoint_times",
                                                                        t_max=self.t_max)))

    @property
    def stationary(self):
        return self.start == "stationary"


# -- core stepping -------------------------------------------------------------


def start_positions(graph, start, seed, replica_ids):
    if start != "stationary":
        return np.full(len(replica_ids), int(start), dtype=np.int64)
    w = rng.words(rng.replica_keys(seed, replica_ids, rng.STREAM_START), 0)
    if graph.is_regular:
        return rng.uniform_index(w, graph.vertex_count)
    cdf = np.cumsum(graph.degrees) / graph.degrees.sum()
    return np.minimum(np.searchsorted(cdf, rng.uniform01(w), side="right"), graph.vertex_count - 1)


def lazy_move(graph, pos, word):
    """One lazy step for every replica; returns ``(new_pos, moved)``."""
    moved = (word & _ONE).astype(bool)
    deg = graph.degree if graph.is_regular else graph.degrees[pos]
    choice = rng.uniform_index(word, deg)
    target = graph.step(pos, choice)
    return np.where(moved, target, pos), moved


class Walkers:
    """A block of replicas of the lazy walk."""

    def __init__(self, graph, seed, replica_ids, start):
        self.graph = graph
        self.replica_ids = np.asarray(replica_ids, dtype=np.int64)
        self.keys = rng.replica_keys(seed, self.replica_ids, rng.STREAM_WALK)
        self.pos = start_positions(graph, start, seed, self.replica_ids)
        self.t = 0
        self.moved = np.zeros(self.pos.size, dtype=bool)
        self.word = None

    def __len__(self):
        return self.pos.size

    def step(self):
        self.word = rng.words(self.keys, self.t)
        self.pos, self.moved = lazy_move(self.graph, self.pos, self.word)
        self.t += 1
        return self.pos


def map_replicas(fn, replicas, threads=1, chunk=CHUNK):
    """Apply ``fn(replica_ids)`` per chunk and return the results in replica order."""
    ids = np.arange(replicas, dtype=np.int64)
    blocks = [ids[i:i + chunk] for i in range(0, replicas, chunk)]
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, blocks))
    return [fn(b) for b in blocks]


def _concat(parts, key):
    return np.concatenate([p[key] for p in parts])


class BitSet:
    """Per-replica packed vertex sets: ``(replicas, ceil(|G|/64))`` uint64 words."""

    def __init__(self, replicas, size):
        self.words = np.zeros((replicas, (size + 63) // 64), dtype=np.uint64)
        self._rows = np.arange(replicas)

    def add(self, v):
        """Insert ``v[r]`` into set ``r``; returns a mask of genuinely new members."""
        widx = v >> 6
        bit = np.left_shift(_ONE, (v & 63).astype(np.uint64))
        old = self.words[self._rows, widx]
        new = (old & bit) == 0
        self.words[self._rows, widx] = old | bit
        return new

    def count(self):
        return np.bitwise_count(self.words).sum(axis=1).astype(np.int64)

    def contains_all(self, mask_words):
        return np.all((self.words & mask_words) == mask_words, axis=1)


def pack_mask(mask):
    """Boolean vertex mask to packed uint64 words."""
    mask = np.asarray(mask, dtype=bool)
    out = np.zeros((mask.size + 63) // 64, dtype=np.uint64)
    for v in np.nonzero(mask)[0]:
        out[v >> 6] |= np.uint64(1) << np.uint64(v & 63)
    return out


# -- trajectory streaming ------------------------------------------------------


def simulate_walk(plan, visitor=None, replica=0):
    """Positions ``X(0..t_max)`` of one replica, optionally fed to ``visitor(t, x)``.

    Words are generated in bulk and the walk is advanced in plain Python, which
    keeps million-step single trajectories fast.  The result equals replica
    ``replica`` of the vectorised engine.
    """
    g = plan.graph
    key = rng.replica_keys(plan.seed, [replica], rng.STREAM_WALK)
    x = int(start_positions(g, plan.start, plan.seed, np.array([replica]))[0])
    out = np.empty(plan.t_max + 1, dtype=np.int64)
    out[0] = x
    if visitor is not None:
        visitor(0, x)
    use_table = g.vertex_count * g.max_degree <= (1 << 22)
    table = g.neighbor_table.tolist() if use_table else None
    degs = g.degrees.tolist() if use_table else None
    block = 1 << 16
    for t0 in range(0, plan.t_max, block):
        steps = np.arange(t0, min(plan.t_max, t0 + block), dtype=np.uint64)
        with np.errstate(over="ignore"):
            w = rng.mix64(key[0] + (steps + _ONE) * rng._GAMMA)
        hold = ((w & _ONE) == 0).tolist()
        frac = ((w >> np.uint64(11)).astype(np.float64) * rng._INV53).tolist()
        for i, t in enumerate(range(t0 + 1, t0 + 1 + len(steps))):
            if not hold[i]:
                if table is not None:
                    deg = degs[x]
                    x = table[x][min(int(frac[i] * deg), deg - 1)]
                else:
                    deg = g.degree
                    x = int(g.step(np.int64(x), np.int64(min(int(frac[i] * deg), deg - 1))))
            out[t] = x
            if visitor is not None:
                visitor(t, x)
    return out


# -- statistics helpers --------------------------------------------------------


def wilson_interval(successes, trials, level=0.95):
    lo, hi = proportion_confint(successes, trials, alpha=1 - level, method="wilson")
    return float(lo), float(hi)


def mean_interval(samples, level=0.95):
    samples = np.asarray(samples, dtype=float)
    mean = float(samples.mean())
    se = float(samples.std(ddof=1) / math.sqrt(samples.size)) if samples.size > 1 else 0.0
    z = norm.ppf(0.5 + level / 2)
    return mean, se, (mean - z * se, mean + z * se)


@dataclass(frozen=True)
class ProbabilityEstimate:
    estimate: float
    stderr: float
    interval: tuple
    successes: int
    trials: int

    @classmethod
    def from_counts(cls, successes, trials, level=0.95):
        p = successes / trials
        return cls(estimate=p, stderr=math.sqrt(p * (1 - p) / trials),
                   interval=wilson_interval(successes, trials, level), successes=int(successes),
                   trials=int(trials))


# -- coverage ------------------------------------------------------------------


@dataclass
class CoverageSample:
    """Uncovered-set sizes ``|U(t)|`` at checkpoints, per replica.

    ``cover_thresholds[r, i]`` is the first ``t >= 1`` with ``|U(t)| <= s_i``
    (or -1 if not reached by ``t_max``).
    """

    checkpoints: np.ndarray
    uncovered: np.ndarray = field(repr=False)
    thresholds: np.ndarray | None = None
    cover_thresholds: np.ndarray | None = field(default=None, repr=False)
    seed: int = 0

    @property
    def replicas(self):
        return self.uncovered.shape[0]

    def mean(self):
        return self.uncovered.mean(axis=0)

    def quantiles(self, qs=(0.1, 0.5, 0.9)):
        return np.quantile(self.uncovered, qs, axis=0)

    def tail_probability(self, s):
        """Per-checkpoint ``P[|U(t)| > s]`` as ``ProbabilityEstimate`` objects."""
        hits = (self.uncovered > s).sum(axis=0)
        return [ProbabilityEstimate.from_counts(int(h), self.replicas) for h in hits]

    def rows(self):
        q = self.quantiles()
        mean = self.mean()
        return [{"t": int(t), "mean_uncovered": float(mean[i]), "q10": float(q[0, i]),
                 "q50": float(q[1, i]), "q90": float(q[2, i]), "replicas": self.replicas,
                 "seed": self.seed} for i, t in enumerate(self.checkpoints)]


def coverage_trajectory(plan, schedule=None):
    """Simulate ``|U(t)|`` at ``plan.checkpoints`` (default: every step)."""
    g = plan.graph
    size = g.vertex_count
    checkpoints = np.array(plan.checkpoints or range(plan.t_max + 1), dtype=np.int64)
    thresholds = None if schedule is None else np.asarray(schedule, dtype=np.int64)

    def run(ids):
        w = Walkers(g, plan.seed, ids, plan.start)
        seen = BitSet(len(w), size)
        seen.add(w.pos)
        unc = np.full(len(w), size - 1, dtype=np.int64)
        out = np.empty((len(w), checkpoints.size), dtype=np.int32)
        ci = 0
        cov = None
        if thresholds is not None:
            cov = np.full((len(w), thresholds.size), -1, dtype=np.int64)
        if checkpoints[0] == 0:
            out[:, 0] = unc
            ci = 1
        for t in range(1, plan.t_max + 1):
            w.step()
            unc -= seen.add(w.pos)
            if cov is not None:
                fresh = (cov < 0) & (unc[:, None] <= thresholds[None, :])
                cov[fresh] = t
            if ci < checkpoints.size and checkpoints[ci] == t:
                out[:, ci] = unc
                ci += 1
        return {"u": out, "c": cov if cov is not None else np.empty((len(w), 0))}

    parts = map_replicas(run, plan.replicas, plan.threads)
    return CoverageSample(checkpoints=checkpoints, uncovered=_concat(parts, "u"), thresholds=thresholds,
                          cover_thresholds=_concat(parts, "c") if thresholds is not None else None,
                          seed=plan.seed)


def uncovered_at(graph, start, times, replicas, seed, threads=1):
    """``|U(t)|`` per replica at each of ``times`` (shape ``(replicas, len(times))``)."""
    times = check_sorted_times(times, "times")
    plan = SimPlan(graph=graph, t_max=int(times[-1]), replicas=replicas, seed=seed, start=start,
                   checkpoints=tuple(times.tolist()), threads=threads)
    return coverage_trajectory(plan).uncovered


# -- local times ---------------------------------------------------------------


@dataclass
class LocalTimeSample:
    """Per-replica occupation statistics of a vertex set ``S`` over ``[0, t]``.

    ``lazy_total`` counts every time in ``S`` (``L_S``), ``nonlazy_total`` counts
    only times reached by a genuine move (``L_S^Y``), ``distinct`` is
    ``|C_S(t)|``, ``moves`` is the number of non-hold steps.  ``visits`` (if
    requested) holds per-vertex non-lazy visit counts.
    """

    t: int
    subset: np.ndarray = field(repr=False)
    lazy_total: np.ndarray = field(repr=False)
    nonlazy_total: np.ndarray = field(repr=False)
    distinct: np.ndarray = field(repr=False)
    moves: np.ndarray = field(repr=False)
    first_hit: np.ndarray = field(repr=False)
    visits: np.ndarray | None = field(default=None, repr=False)

    @property
    def replicas(self):
        return self.lazy_total.size


def local_time_sample(plan, S, t=None, track_visits=False):
    g = plan.graph
    t = plan.t_max if t is None else check_int(t, "t", min_value=0)
    mask = check_vertex_set(S, g.vertex_count)
    size = g.vertex_count

    def run(ids):
        w = Walkers(g, plan.seed, ids, plan.start)
        R = len(w)
        inside = mask[w.pos]
        lazy = inside.astype(np.int64)
        nonlazy = np.zeros(R, dtype=np.int64)
        moves = np.zeros(R, dtype=np.int64)
        seen = BitSet(R, size)
        distinct = (seen.add(w.pos) & inside).astype(np.int64)
        first = np.where(inside, 0, -1).astype(np.int64)
        visits = np.zeros((R, size), dtype=np.int32) if track_visits else None
        rows = np.arange(R)
        for s in range(1, t + 1):
            w.step()
            inside = mask[w.pos]
            lazy += inside
            nonlazy += inside & w.moved
            moves += w.moved
            distinct += seen.add(w.pos) & inside
            first[(first < 0) & inside] = s
            if visits is not None:
                visits[rows, w.pos] += w.moved
        out = {"L": lazy, "LY": nonlazy, "C": distinct, "N": moves, "H": first}
        if visits is not None:
            out["V"] = visits
        return out

    parts = map_replicas(run, plan.replicas, plan.threads)
    return LocalTimeSample(t=t, subset=mask, lazy_total=_concat(parts, "L"), nonlazy_total=_concat(parts, "LY"),
                           distinct=_concat(parts, "C"), moves=_concat(parts, "N"), first_hit=_concat(parts, "H"),
                           visits=_concat(parts, "V") if track_visits else None)


def _pi_of(graph, mask):
    return float(graph.degrees[mask].sum() / graph.degrees.sum())


@dataclass(frozen=True)
class TailComparison:
    probability: ProbabilityEstimate
    bound: float
    pi_S: float
    t: int

    @property
    def holds(self):
        """Empirical tail minus two standard errors does not exceed the bound."""
        return self.probability.estimate - 2 * self.probability.stderr <= self.bound


def local_time_tail(plan, S, t, t_rel, C0=1.0 / 50, lambda0=None):
    """Estimate ``P_pi[L_S(t) <= t pi(S) / 2]`` next to ``exp(-C0 t pi(S) / t_rel)``."""
    from mixlab.bounds import local_time_bound

    if not plan.stationary:
        raise PreconditionError("local_time_tail needs a stationary start", field="start")
    mask = check_vertex_set(S, plan.graph.vertex_count)
    pi_S = _pi_of(plan.graph, mask)
    if pi_S <= 0:
        raise PreconditionError("S must have positive stationary mass", field="S")
    if lambda0 is not None and lambda0 < 0.5:
        raise PreconditionError("the local-time bound needs lambda0 >= 1/2", field="lambda0")
    sample = local_time_sample(plan, mask, t)
    hits = int((sample.lazy_total <= t * pi_S / 2).sum())
    return TailComparison(probability=ProbabilityEstimate.from_counts(hits, sample.replicas),
                          bound=local_time_bound(t, pi_S, t_rel, C0), pi_S=pi_S, t=int(t))


def nonlazy_local_time(plan, S, t):
    return local_time_sample(plan, S, t)


def distinct_coverage(plan, S, t, threshold=None):
    """``|C_S(t)|`` per replica; with ``threshold`` also ``P[|C_S(t)| <= threshold]``."""
    mask = check_vertex_set(S, plan.graph.vertex_count)
    if not mask.any():
        raise PreconditionError("S must be non-empty", field="S")
    sample = local_time_sample(plan, mask, t)
    if threshold is None:
        return sample.distinct, None
    hits = int((sample.distinct <= threshold).sum())
    return sample.distinct, ProbabilityEstimate.from_counts(hits, sample.replicas)


@dataclass(frozen=True)
class HittingProbe:
    probability: ProbabilityEstimate
    window: int
    s: int
    window_hypothesis: bool
    reference: float | None


def hitting_probe(plan, S, t_u=None, gstar_s=None, rho0=None):
    """Estimate ``P_x[tau_S <= |G|/s]``.

    Reports whether ``t_u <= |G| / (2 s)`` holds and, when ``rho0`` and
    ``G*(s)`` are given, the reference curve ``rho0 / G*(s)``.
    """
    g = plan.graph
    mask = check_vertex_set(S, g.vertex_count)
    s = int(mask.sum())
    if s < 1:
        raise PreconditionError("S must be non-empty", field="S")
    window = g.vertex_count // s
    sample = local_time_sample(plan, mask, window)
    hits = int((sample.first_hit >= 0).sum())
    hyp = t_u is not None and t_u <= g.vertex_count / (2 * s)
    ref = rho0 / gstar_s if (rho0 is not None and gstar_s) else None
    return HittingProbe(probability=ProbabilityEstimate.from_counts(hits, sample.replicas), window=window, s=s,
                        window_hypothesis=bool(hyp), reference=ref)


def green_mc(g, x, y, t_u, replicas, seed=0, threads=1):
    """Monte Carlo ``G(x, y)``: mean visits to ``y`` over ``[0, t_u]`` from ``x``."""
    x, y = g.check_vertex(x), g.check_vertex(y)
    t_u = check_int(t_u, "t_u", min_value=0)

    def run(ids):
        w = Walkers(g, seed, ids, x)
        count = (w.pos == y).astype(np.int64)
        for _ in range(t_u):
            count += w.step() == y
        return {"n": count}

    counts = _concat(map_replicas(run, replicas, threads), "n")
    return mean_interval(counts)


# -- excursions on high-dimensional tori ------------------------------------


@dataclass
class ExcursionSample:
    """Radius-crossing statistics of the lazy walk around the origin of a torus.

    ``escape`` estimates ``P[tau_0 < tau_{2k}]`` from a start at distance ``k``;
    ``return_times`` are first times to reach distance ``k`` from distance
    ``2k`` (``-1`` when not reached within ``horizon``); ``no_return`` is the
    large-torus surrogate for never returning.  ``records`` list successive
    excursions ``2k -> 4k -> 2k`` of a few long trajectories.
    """

    n: int
    d: int
    k: int
    escape: ProbabilityEstimate
    return_times: np.ndarray = field(repr=False)
    horizon: int
    no_return: ProbabilityEstimate
    records: list = field(default_factory=list, repr=False)


def _coords_at_distance(d, r):
    c = np.zeros(d, dtype=np.int64)
    c[:r] = 1
    return c


def _first_passage(g, start, target, stop, horizon, replicas, seed, threads):
    """Steps until ``|X| == target`` or ``|X| == stop``; returns times and which was hit."""

    def run(ids):
        w = Walkers(g, seed, ids, start)
        dist = g.distance_from_origin(w.pos)
        time = np.full(len(w), -1, dtype=np.int64)
        which = np.zeros(len(w), dtype=np.int8)
        alive = np.ones(len(w), dtype=bool)
        done = dist == target
        time[done], which[done], alive[done] = 0, 1, False
        for t in range(1, horizon + 1):
            if not alive.any():
                break
            w.step()
            dist = g.distance_from_origin(w.pos)
            hit_t = alive & (dist == target)
            hit_s = alive & (stop is not None) & (dist == (stop if stop is not None else -1))
            time[hit_t | hit_s] = t
            which[hit_t] = 1
            which[hit_s] = 2
            alive &= ~(hit_t | hit_s)
        return {"t": time, "w": which}

    parts = map_replicas(run, replicas, threads)
    return _concat(parts, "t"), _concat(parts, "w")


def excursion_stats(g, k, replicas=10_000, seed=0, horizon=None, record_trajectories=0, threads=1):
    if g.family not in ("torus", "hypercube"):
        raise PreconditionError("excursion_stats needs a torus", field="graph")
    k = check_int(k, "k", min_value=0)
    n, d = g.radix, g.dim
    if d < 8 * max(k, 1):
        raise PreconditionError(f"need d >= 8k (d={d}, k={k})", field="d")
    if horizon is None:
        horizon = 10 * d * n * n
    start_k = g.encode(_coords_at_distance(d, k))
    times, which = _first_passage(g, start_k, 0, 2 * k, horizon, replicas, seed, threads)
    escape = ProbabilityEstimate.from_counts(int((which == 1).sum()), replicas)
    start_2k = g.encode(_coords_at_distance(d, 2 * k))
    ret, _ = _first_passage(g, start_2k, k, None, horizon, replicas, seed + 1, threads)
    no_return = ProbabilityEstimate.from_counts(int((ret < 0).sum()), replicas)
    records = []
    for r in range(record_trajectories):
        records.extend(_excursion_records(g, k, horizon, seed, r))
    return ExcursionSample(n=n, d=d, k=k, escape=escape, return_times=ret, horizon=horizon,
                           no_return=no_return, records=records)


def _excursion_records(g, k, horizon, seed, replica):
    """Split one trajectory from distance ``k`` into ``2k -> 4k -> 2k`` excursions."""
    plan = SimPlan(graph=g, t_max=horizon, replicas=1, seed=seed, start=g.encode(_coords_at_distance(g.dim, k)))
    path = simulate_walk(plan, replica=replica)
    dist = g.distance_from_origin(path)
    records = []
    t = 0
    target, start_t, hit0 = 2 * k, None, False
    while t < dist.size:
        if start_t is not None and dist[t] == 0:
            hit0 = True
        if dist[t] == target:
            if target == 2 * k:
                start_t, hit0, target = t, bool(dist[t] == 0), 4 * k
            else:
                records.append({"sigma_2k": int(start_t), "tau_4k": int(t), "duration": int(t - start_t),
                                "hit_origin": hit0, "replica": replica})
                target = 2 * k
                start_t = None
        t += 1
    return records
