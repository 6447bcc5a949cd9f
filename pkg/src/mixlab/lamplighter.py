"""The lamplighter chain over a base graph and its covered-set proxy.

Diamond states ``(f, x)`` are indexed as ``f * |G| + x`` where bit ``v`` of the
integer ``f`` is the lamp at ``v``.  The exact routines here come in two
independent flavours: the diamond kernel itself (lamps are explicit) and a
dynamic program over ``(position, covered set)`` pairs of the base walk
(lamps never appear).  The key identity ties the two together.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from mixlab import rng
from mixlab.errors import CapacityError, DivergenceError, PreconditionError
from mixlab.exact import DEFAULT_EPS, MAX_STEPS
from mixlab.simulation import BitSet, Walkers, map_replicas, uncovered_at
from mixlab.validation import check_int, check_real, check_sorted_times

DIAMOND_BASE_LIMIT = 16
DP_BASE_LIMIT = 20


@dataclass(frozen=True)
class DiamondState:
    lamps: int
    position: int

    def lamp(self, v):
        return (self.lamps >> v) & 1


def _lazy_options(g, x):
    return g.lazy_step_distribution(x)


def diamond_step(g, state, counter):
    """Advance one lamplighter step using the next word of ``counter``.

    The word's bit 0 decides whether the walker moves, its top bits pick the
    neighbour, bit 1 refreshes the lamp at the old position and bit 2 the lamp
    at the new one.  On a hold only the lamp at ``x`` is refreshed.
    """
    x = g.check_vertex(state.position)
    word = counter.next_word()
    y = x
    if word & 1:
        nbrs = g.neighbors(x)
        y = nbrs[int(rng.uniform_index(np.array([word], dtype=np.uint64), len(nbrs))[0])]
    lamps = (state.lamps & ~(1 << x)) | (((word >> 1) & 1) << x)
    lamps = (lamps & ~(1 << y)) | (((word >> 2) & 1) << y)
    return DiamondState(lamps=lamps, position=y)


# -- exact diamond kernel ------------------------------------------------------


@dataclass
class DiamondKernel:
    graph: object
    P: sp.csr_matrix = field(repr=False)
    pi: np.ndarray = field(repr=False)

    @property
    def size(self):
        return self.P.shape[0]

    @property
    def base_size(self):
        return self.graph.vertex_count

    def state_index(self, lamps, x):
        return int(lamps) * self.base_size + int(x)

    def detailed_balance_error(self):
        flow = sp.diags(self.pi) @ self.P
        return float(abs(flow - flow.T).max())

    def stationarity_error(self):
        return float(np.abs(self.P.T @ self.pi - self.pi).max())


def build_diamond_kernel(g, base_limit=DIAMOND_BASE_LIMIT):
    N = g.vertex_count
    if N > base_limit:
        raise CapacityError(f"diamond kernel needs |G| <= {base_limit} (got {N})")
    F = np.arange(1 << N, dtype=np.int64)
    rows, cols, vals = [], [], []
    for x in range(N):
        src = F * N + x
        clear_x = F & ~(1 << x)
        for y, p in _lazy_options(g, x):
            if y == x:
                for bx in (0, 1):
                    rows.append(src)
                    cols.append((clear_x | (bx << x)) * N + x)
                    vals.append(np.full(F.size, p / 2))
                continue
            base = clear_x & ~(1 << y)
            for bx in (0, 1):
                for by in (0, 1):
                    rows.append(src)
                    cols.append((base | (bx << x) | (by << y)) * N + y)
                    vals.append(np.full(F.size, p / 4))
    size = N << N
    P = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size))
    P.sum_duplicates()
    base_pi = g.degrees / g.degrees.sum()
    pi = np.tile(base_pi, 1 << N) / (1 << N)
    return DiamondKernel(graph=g, P=P, pi=pi)


def _diamond_starts(dk):
    """Start states whose worst case equals the worst case over all states.

    XOR-ing a fixed pattern into every lamp is an automorphism of the chain that
    preserves the stationary law, so lamps can start all off.  On a
    vertex-transitive base the position can be fixed as well.
    """
    g = dk.graph
    return [0] if g.transitive and g.is_regular else list(range(g.vertex_count))


def diamond_distance_curve(dk, t_max, starts=None):
    """Uniform ratio distance of the diamond chain for ``t = 0..t_max``."""
    starts = _diamond_starts(dk) if starts is None else list(starts)
    PT = dk.P.T.tocsr()
    mu = np.zeros((dk.size, len(starts)))
    mu[starts, np.arange(len(starts))] = 1.0
    pi = dk.pi[:, None]
    out = np.empty(t_max + 1)
    for t in range(t_max + 1):
        if t:
            mu = PT @ mu
        out[t] = np.abs(mu / pi - 1).max()
    return out


def diamond_uniform_mixing_exact(dk, eps=DEFAULT_EPS, max_steps=MAX_STEPS):
    eps = check_real(eps, "eps", low=0, low_open=True)
    starts = _diamond_starts(dk)
    PT = dk.P.T.tocsr()
    mu = np.zeros((dk.size, len(starts)))
    mu[starts, np.arange(len(starts))] = 1.0
    pi = dk.pi[:, None]
    for t in range(int(max_steps) + 1):
        if t:
            mu = PT @ mu
        if np.abs(mu / pi - 1).max() <= eps:
            return t

    raise DivergenceError(f"diamond chain not within eps={eps} after {max_steps} steps")


def diamond_lamp_law(dk, f0, x0, t):
    """``P_{(f0,x0)}[f(t) = g]`` for every lamp configuration ``g``."""
    N = dk.base_size
    mu = np.zeros(dk.size)
    mu[dk.state_index(f0, x0)] = 1.0
    PT = dk.P.T.tocsr()
    for _ in range(t):
        mu = PT @ mu
    return mu.reshape(1 << N, N).sum(axis=1)


# -- covered-set dynamic program ---------------------------------------------


def _check_dp(g, limit=DP_BASE_LIMIT):
    if g.vertex_count > limit:
        raise CapacityError(f"covered-set DP needs |G| <= {limit} (got {g.vertex_count})")


def covered_set_dp(g, x0, t_max, limit=DP_BASE_LIMIT):
    """Yield ``(t, prob)`` where ``prob[x, C] = P_{x0}[X(t) = x, C(t) = C]``.

    Covered sets ``C`` are bitmasks.  The array yielded is reused; copy it if
    it must outlive the next iteration.
    """
    _check_dp(g, limit)
    N = g.vertex_count
    x0 = g.check_vertex(x0)
    options = [_lazy_options(g, x) for x in range(N)]
    prob = np.zeros((N, 1 << N))
    prob[x0, 1 << x0] = 1.0
    yield 0, prob
    for t in range(1, t_max + 1):
        new = np.zeros_like(prob)
        for x in range(N):
            row = prob[x]
            for y, p in options[x]:
                if y == x:
                    new[x] += p * row
                    continue
                src = row.reshape(-1, 2, 1 << y)
                dst = new[y].reshape(-1, 2, 1 << y)
                dst[:, 1, :] += p * (src[:, 0, :] + src[:, 1, :])
        prob = new
        yield t, prob


def _uncovered_weights(N):
    masks = np.arange(1 << N, dtype=np.uint64)
    return np.ldexp(1.0, N - np.bitwise_count(masks).astype(np.int64))


def superset_sums(h):
    """``out[W] = sum over C containing W of h[C]`` (length ``2^N`` vector)."""
    out = np.array(h, dtype=float)
    N = int(round(math.log2(out.size)))
    for v in range(N):
        view = out.reshape(-1, 2, 1 << v)
        view[:, 0, :] += view[:, 1, :]
    return out


@dataclass
class ProxyCurve:
    """``E[2^{|U(t)|}]`` on a time grid, exact or estimated."""

    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None = None
    exact: bool = True
    heavy_tail: np.ndarray | None = None
    replicas: int = 0
    seed: int | None = None

    def rows(self):
        se = self.stderr if self.stderr is not None else np.zeros_like(self.values)
        return [{"t": int(t), "value": float(v), "stderr": float(s)} for t, v, s in zip(self.times, self.values, se)]


def exp_moment_exact(g, start=0, t_grid=None, t_max=None, limit=DP_BASE_LIMIT):
    """Exact ``E_x[2^{|U(t)|}]`` from the covered-set DP.

    Give either ``t_grid`` or ``t_max`` (grid ``0..t_max``).
    """
    if t_grid is None:
        if t_max is None:
            raise PreconditionError("give t_grid or t_max", field="t_grid")
        t_grid = np.arange(check_int(t_max, "t_max", min_value=0) + 1)
    t_grid = check_sorted_times(t_grid, "t_grid")
    _check_dp(g, limit)
    w = _uncovered_weights(g.vertex_count)
    values = np.empty(t_grid.size)
    k = 0
    for t, prob in covered_set_dp(g, start, int(t_grid[-1]), limit):
        if t == t_grid[k]:
            values[k] = float(prob.sum(axis=0) @ w)
            k += 1
    return ProxyCurve(times=t_grid, values=values, exact=True)


HEAVY_TAIL_SHARE = 0.5


def exp_moment_mc(g, start=0, t_grid=(0,), replicas=10_000, seed=0, threads=1):
    """Monte Carlo ``E_x[2^{|U(t)|}]`` with standard errors and heavy-tail flags.

    A grid point is flagged when its largest sample makes up more than half of
    the sample sum.
    """
    t_grid = check_sorted_times(t_grid, "t_grid")
    U = uncovered_at(g, start, t_grid, replicas, seed, threads)
    samples = np.ldexp(1.0, U.astype(np.int64))
    values = samples.mean(axis=0)
    stderr = samples.std(axis=0, ddof=1) / math.sqrt(replicas) if replicas > 1 else np.zeros(t_grid.size)
    heavy = samples.max(axis=0) > HEAVY_TAIL_SHARE * samples.sum(axis=0)
    if replicas > 1 and heavy.any():
        warnings.warn(f"heavy-tailed 2^|U| sample at t={t_grid[heavy].tolist()}", RuntimeWarning, stacklevel=2)
    return ProxyCurve(times=t_grid, values=values, stderr=stderr, exact=False, heavy_tail=heavy,
                      replicas=replicas, seed=seed)


@dataclass(frozen=True)
class ProxyResult:
    """Crossing time of ``1 + eps`` on a grid.

    ``status`` is ``"determined"``, ``"undetermined"`` (the crossing is not
    pinned down by the grid) or ``"inconclusive"`` (no crossing on the grid).
    ``bracket`` is the grid interval ``(t_lo, t_hi]`` containing the crossing.
    """

    t_star: int | None
    status: str
    bracket: tuple | None
    eps: float


def proxy_mixing_time(curve, eps=DEFAULT_EPS):
    """Least grid time with ``E[2^{|U(t)|}] <= 1 + eps``.

    Exact curves are determined only when the crossing falls between two
    consecutive integers.  Estimated curves use a conservative rule: ``t_star``
    is the first grid point with ``value + 2 se <= 1 + eps``, and the bracket
    starts at the last earlier point with ``value - 2 se > 1 + eps``.  With no
    such earlier point the crossing is undetermined.  Nothing is interpolated.
    """
    eps = check_real(eps, "eps", low=0, low_open=True)
    thr = 1.0 + eps
    times = np.asarray(curve.times)
    se = np.zeros(times.size) if curve.exact or curve.stderr is None else np.asarray(curve.stderr)
    below = curve.values + 2 * se <= thr
    above = curve.values - 2 * se > thr
    if not below.any():
        return ProxyResult(None, "inconclusive", None, eps)
    k = int(np.argmax(below))
    t_hi = int(times[k])
    if t_hi == 0:
        return ProxyResult(0, "determined", (0, 0), eps)
    earlier = np.nonzero(above[:k])[0]
    if earlier.size == 0:
        return ProxyResult(None, "undetermined", (0, t_hi), eps)
    t_lo = int(times[earlier[-1]])
    if curve.exact and t_hi - t_lo > 1:
        return ProxyResult(None, "undetermined", (t_lo, t_hi), eps)
    return ProxyResult(t_hi, "determined", (t_lo, t_hi), eps)


# -- the key identity ------------------------------------------------------------


@dataclass(frozen=True)
class IdentityCheck:
    lhs: np.ndarray
    rhs: np.ndarray
    t: int

    @property
    def gap(self):
        return float(np.abs(self.lhs - self.rhs).max())


def _lamp_mask(value, N):
    if isinstance(value, (int, np.integer)):
        if not 0 <= int(value) < (1 << N):
            raise PreconditionError("lamp configuration out of range", field="lamps")
        return int(value)
    bits = np.asarray(value, dtype=np.int64)
    if bits.shape != (N,) or np.any((bits != 0) & (bits != 1)):
        raise PreconditionError(f"lamp configuration must be {N} bits", field="lamps")
    return int((bits << np.arange(N)).sum())


def identity_check(g, f0, x0, g_target=None, t=1, dk=None):
    """Both sides of ``P[f(t)=g] 2^{|G|} = E[2^{|U(t)|} 1{W subset C(t)}]``.

    ``g_target=None`` evaluates every target configuration at once; ``lhs``
    and ``rhs`` are then indexed by ``g``.  Requires ``t >= 1``.
    """
    t = check_int(t, "t", min_value=1)
    N = g.vertex_count
    f0 = _lamp_mask(f0, N)
    x0 = g.check_vertex(x0)
    dk = build_diamond_kernel(g) if dk is None else dk
    lhs = diamond_lamp_law(dk, f0, x0, t) * (1 << N)
    for s, prob in covered_set_dp(g, x0, t):
        pass
    h = prob.sum(axis=0) * _uncovered_weights(N)
    by_W = superset_sums(h)
    targets = np.arange(1 << N)
    rhs = by_W[targets ^ f0]
    if g_target is not None:
        k = _lamp_mask(g_target, N)
        lhs, rhs = lhs[[k]], rhs[[k]]
    return IdentityCheck(lhs=lhs, rhs=rhs, t=t)


# -- sampling ------------------------------------------------------------------


@dataclass
class LampMarking:
    covered: np.ndarray = field(repr=False)
    lamps: np.ndarray = field(repr=False)
    position: np.ndarray = field(repr=False)


def _initial_lamps(N, f0):
    return np.zeros(N, dtype=bool) if f0 is None else np.asarray(
        [(_lamp_mask(f0, N) >> v) & 1 for v in range(N)], dtype=bool)


def sample_lamp_marking(g, t, replicas=1, seed=0, x0=0, f0=None, threads=1):
    """Run the base walk for ``t`` steps and put fair coins on the covered set.

    Uncovered lamps keep their value in ``f0`` (default all off).
    """
    N = g.vertex_count
    t = check_int(t, "t", min_value=0)
    init = _initial_lamps(N, f0)

    def run(ids):
        w = Walkers(g, seed, ids, x0)
        seen = BitSet(len(w), N)
        seen.add(w.pos)
        for _ in range(t):
            seen.add(w.step())
        covered = np.unpackbits(seen.words.view(np.uint8), axis=1, bitorder="little")[:, :N].astype(bool)
        keys = rng.replica_keys(seed, ids, rng.STREAM_MARKING)
        coins = np.stack([(rng.words(keys, v) & np.uint64(1)).astype(bool) for v in range(N)], axis=1)
        lamps = np.where(covered, coins, init[None, :])
        return {"c": covered, "f": lamps, "x": w.pos.copy()}

    parts = map_replicas(run, replicas, threads)
    return LampMarking(covered=np.concatenate([p["c"] for p in parts]),
                       lamps=np.concatenate([p["f"] for p in parts]),
                       position=np.concatenate([p["x"] for p in parts]))


def simulate_diamond(g, t, replicas=1, seed=0, x0=0, f0=None, threads=1):
    """Vectorised lamplighter runs; same bit conventions as :func:`diamond_step`."""
    N = g.vertex_count
    t = check_int(t, "t", min_value=0)
    init = _initial_lamps(N, f0)
    one = np.uint64(1)

    def run(ids):
        w = Walkers(g, seed, ids, x0)
        rows = np.arange(len(w))
        lamps = np.tile(init, (len(w), 1))
        for _ in range(t):
            old = w.pos
            new = w.step()
            lamps[rows, old] = ((w.word >> one) & one).astype(bool)
            lamps[rows, new] = ((w.word >> np.uint64(2)) & one).astype(bool)
        return {"f": lamps, "x": w.pos.copy()}

    parts = map_replicas(run, replicas, threads)
    return LampMarking(covered=None, lamps=np.concatenate([p["f"] for p in parts]),
                       position=np.concatenate([p["x"] for p in parts]))


# -- proxy sandwich ------------------------------------------------------------


@dataclass
class Sandwich:
    """Exact diamond mixing time next to the covered-set proxy on a small base."""

    t_u_diamond: int
    t_star: int
    t_u_base: int
    distance: np.ndarray = field(repr=False)
    proxy: np.ndarray = field(repr=False)
    cover_prob: np.ndarray = field(repr=False)

    @property
    def holds(self):
        return self.t_star <= self.t_u_diamond <= self.t_star + self.t_u_base

    @property
    def pointwise_lower(self):
        """``1 - P[U(t) empty] <= d(t)``: the all-lamps-flipped target needs full cover."""
        return bool(np.all(1 - self.cover_prob <= self.distance + 1e-12))


def sandwich(g, eps=DEFAULT_EPS, t_u_base=None):
    from mixlab.exact import build_kernel, uniform_mixing_time

    if t_u_base is None:
        t_u_base = uniform_mixing_time(build_kernel(g), eps)
    dk = build_diamond_kernel(g)
    t_dia = diamond_uniform_mixing_exact(dk, eps)
    horizon = t_dia + t_u_base + 1
    curve = exp_moment_exact(g, 0, t_max=horizon)
    res = proxy_mixing_time(curve, eps)
    if res.status != "determined":
        horizon *= 4
        curve = exp_moment_exact(g, 0, t_max=horizon)
        res = proxy_mixing_time(curve, eps)
    dist = diamond_distance_curve(dk, horizon)
    cover = np.empty(horizon + 1)
    for t, prob in covered_set_dp(g, 0, horizon):
        cover[t] = prob[:, -1].sum()
    return Sandwich(t_u_diamond=t_dia, t_star=res.t_star, t_u_base=t_u_base, distance=dist,
                    proxy=curve.values, cover_prob=cover)
