"""Exact dense-matrix oracles for the lazy walk on a base graph.

Everything here is deterministic linear algebra: the transition kernel, its
spectrum, uniform and total-variation mixing times, hitting times, the
Green's function summed up to the uniform mixing time, and the maximal
set occupation ``G*(n)``.  For tori too large for dense matrices the
product structure of the walk gives closed forms (:func:`torus_spectrum_closed_form`,
:func:`torus_uniform_mixing_time`, :func:`torus_green`).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.csgraph
from scipy.stats import binom

from mixlab.errors import (
    CapacityError,
    DivergenceError,
    PreconditionError,
    UnsupportedOperationError,
)
from mixlab.graphs import GraphSpec
from mixlab.validation import check_int, check_positive

DEFAULT_EPS = 1.0 / (2.0 * math.e)
DENSE_LIMIT = 4096
SQUARING_LIMIT = 1024
ATOL = 1e-10
MAX_STEPS = 10_000_000


@dataclass(frozen=True, eq=False)
class DenseKernel:
    """Row-stochastic lazy transition matrix ``P`` with stationary vector ``pi``."""

    graph: GraphSpec
    P: np.ndarray = field(repr=False)
    pi: np.ndarray = field(repr=False)

    @property
    def size(self):
        return self.P.shape[0]

    @property
    def symmetric(self):
        return self.graph.is_regular

    @property
    def transitive(self):
        return self.graph.transitive

    def sparse(self):
        return scipy.sparse.csr_matrix(self.P)


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: np.ndarray | None
    lambda0: float
    t_rel: float
    smallest: float

    def as_dict(self):
        return {"lambda0": self.lambda0, "t_rel": self.t_rel, "smallest": self.smallest}


@dataclass(frozen=True)
class HittingTable:
    expected_hit: np.ndarray = field(repr=False)
    mean_return: np.ndarray = field(repr=False)

    @property
    def t_hit(self):
        return float(self.expected_hit.max())


@dataclass(frozen=True)
class GreensTable:
    """``G(0, .)`` summed over ``[0, horizon]`` plus the adjacent-pair value.

    ``matrix`` holds the full Green matrix when it was requested (needed for
    non-transitive graphs); ``adj_spread`` is max minus min of ``G(x, y)`` over
    adjacent pairs, a transitivity diagnostic.
    """

    horizon: int
    row: np.ndarray = field(repr=False)
    g_adj: float
    transitive: bool
    matrix: np.ndarray | None = field(default=None, repr=False)
    adj_spread: float = 0.0

    def gstar(self, n):
        return g_star(self, n)

    def gstar_curve(self):
        return [g_star(self, n) for n in range(1, self.row.size + 1)]


# -- kernel and spectrum -----------------------------------------------------


def build_kernel(g, dense_limit=DENSE_LIMIT):
    """Dense lazy kernel: 1/2 on the diagonal, ``1/(2 d(x))`` to each neighbour."""
    size = g.vertex_count
    if size > dense_limit:
        raise CapacityError(f"|G|={size} exceeds the dense limit {dense_limit}")
    table = g.neighbor_table
    degs = g.degrees
    P = np.zeros((size, size))
    rows = np.repeat(np.arange(size), table.shape[1])
    cols = table.ravel()
    keep = cols >= 0
    weights = np.repeat(0.5 / degs, table.shape[1])
    np.add.at(P, (rows[keep], cols[keep]), weights[keep])
    P[np.diag_indices(size)] += 0.5
    pi = degs / degs.sum()
    return DenseKernel(graph=g, P=P, pi=pi)


def spectrum(k):
    if not k.symmetric:
        raise UnsupportedOperationError("spectrum() needs a symmetric kernel (regular graph)")
    ev = np.sort(scipy.linalg.eigvalsh(k.P))[::-1]
    lam0 = float(ev[1]) if ev.size > 1 else 0.0
    return SpectralReport(eigenvalues=ev, lambda0=lam0, t_rel=_t_rel(lam0), smallest=float(ev[-1]))


def _t_rel(lam0):
    return math.inf if lam0 >= 1.0 else 1.0 / (1.0 - lam0)


def _torus_eigenvalue(counts, cosines, d):
    return 0.5 + float(np.dot(counts, cosines)) / (2 * d)


def torus_spectrum_closed_form(n, d, dense_limit=DENSE_LIMIT):
    """Lazy-torus spectrum ``1/2 + (1/2d) sum_j cos(2 pi k_j / n)``.

    The full multiset is returned only when ``n**d <= dense_limit``.
    """
    n = check_int(n, "n", min_value=2)
    d = check_int(d, "d", min_value=1)
    cos = np.cos(2 * np.pi * np.arange(n) / n)
    lam0 = 0.5 + (d - 1 + cos[1]) / (2 * d) if n > 1 else 1.0
    smallest = 0.5 + d * cos.min() / (2 * d)
    eigenvalues = None
    if n**d <= dense_limit:
        grids = np.meshgrid(*([cos] * d), indexing="ij")
        eigenvalues = np.sort((0.5 + sum(grids) / (2 * d)).ravel())[::-1]
    return SpectralReport(eigenvalues=eigenvalues, lambda0=float(lam0), t_rel=_t_rel(lam0),
                          smallest=float(smallest))


# -- mixing times -------------------------------------------------------------


def uniform_distance(M, pi):
    """``max_{x,y} |M(x,y)/pi(y) - 1|`` for a block of rows ``M``."""
    return float(np.abs(M / pi - 1.0).max())


def tv_distance(M, pi):
    return float(0.5 * np.abs(M - pi).sum(axis=-1).max())


def _start_rows(k):
    """Starting states that realise the worst case (one suffices on transitive graphs)."""
    if k.transitive and k.symmetric:
        return np.array([0])
    return np.arange(k.size)


def _mixing_time(k, eps, metric, method, max_steps):
    eps = check_positive(eps, "eps")
    size = k.size
    starts = _start_rows(k)
    M = np.eye(size)[starts]
    if metric(M, k.pi) <= eps:
        return 0
    if method == "auto":
        method = "squaring" if size <= SQUARING_LIMIT else "power"
    if method == "squaring":
        powers = [k.P]
        while metric(M @ powers[-1], k.pi) > eps:
            if 2 ** len(powers) > max_steps:
                raise DivergenceError(f"no mixing within {max_steps} steps")
            powers.append(powers[-1] @ powers[-1])
        t = 0
        for j in range(len(powers) - 1, -1, -1):
            cand = M @ powers[j]
            if metric(cand, k.pi) > eps:
                M, t = cand, t + 2**j
        return t + 1
    if method != "power":
        raise PreconditionError(f"unknown method {method!r}", field="method")
    PT = k.sparse().T.tocsr()
    rows = M.T.copy()
    for t in range(1, max_steps + 1):
        rows = PT @ rows
        if metric(rows.T, k.pi) <= eps:
            return t
    raise DivergenceError(f"no mixing within {max_steps} steps")


def uniform_mixing_time(k, eps=DEFAULT_EPS, method="auto", max_steps=MAX_STEPS):
    """Least ``t`` with ``max_{x,y} |P^t(x,y)/pi(y) - 1| <= eps``.

    ``method`` is ``"squaring"`` (binary lifting over ``P^(2^j)``),
    ``"power"`` (per-start vector iteration) or ``"auto"``.
    """
    return _mixing_time(k, eps, uniform_distance, method, max_steps)


def tv_mixing_time(k, eps=DEFAULT_EPS, method="auto", max_steps=MAX_STEPS):
    return _mixing_time(k, eps, tv_distance, method, max_steps)


# -- hitting times ------------------------------------------------------------


def _is_connected(P):
    n_comp, _ = scipy.sparse.csgraph.connected_components(scipy.sparse.csr_matrix(P > 0))
    return n_comp == 1


def hitting_times(k):
    """Expected hitting times ``E_x[tau_y]`` and mean return times ``E_x[tau_x^+]``.

    Uses the fundamental matrix ``Z = (I - P + 1 pi^T)^{-1}``, for which
    ``E_x[tau_y] = (Z_yy - Z_xy) / pi_y``; this solves ``h = 1 + P h`` off
    ``y`` with ``h(y) = 0`` for every target at once.
    """
    if not _is_connected(k.P):
        raise PreconditionError("kernel is not irreducible; hitting system is singular", field="graph")
    size = k.size
    Z = np.linalg.inv(np.eye(size) - k.P + np.outer(np.ones(size), k.pi))
    H = (np.diag(Z)[None, :] - Z) / k.pi[None, :]
    np.fill_diagonal(H, 0.0)
    mean_return = 1.0 + np.einsum("xz,zx->x", k.P, H)
    return HittingTable(expected_hit=H, mean_return=mean_return)


def hitting_time_to(k, y):
    """Oracle: solve ``h = 1 + P h`` off ``y`` directly for a single target."""
    size = k.size
    keep = np.arange(size) != y
    A = np.eye(size - 1) - k.P[np.ix_(keep, keep)]
    h = np.zeros(size)
    h[keep] = np.linalg.solve(A, np.ones(size - 1))
    return h


# -- Green's function ---------------------------------------------------------


def greens_table(k, t_u, origin=0, full=None):
    """Green's function ``G(x, y) = sum_{t=0}^{t_u} P^t(x, y)``.

    The full matrix is computed when ``full`` is true, and by default for
    graphs not flagged vertex transitive.
    """
    t_u = check_int(t_u, "t_u", min_value=0)
    if full is None:
        full = not k.transitive
    g = k.graph
    table = g.neighbor_table
    if full:
        acc = np.eye(k.size)
        M = np.eye(k.size)
        for _ in range(t_u):
            M = M @ k.P
            acc += M
        row = acc[origin].copy()
        src = np.repeat(np.arange(k.size), table.shape[1])
        dst = table.ravel()
        keep = dst >= 0
        adj_vals = acc[src[keep], dst[keep]]
        return GreensTable(horizon=t_u, row=row, g_adj=float(adj_vals.max()), transitive=k.transitive,
                           matrix=acc, adj_spread=float(adj_vals.max() - adj_vals.min()))
    v = np.zeros(k.size)
    v[origin] = 1.0
    row = v.copy()
    PT = k.sparse().T.tocsr()
    for _ in range(t_u):
        v = PT @ v
        row += v
    nbrs = table[origin][table[origin] >= 0]
    vals = row[nbrs]
    return GreensTable(horizon=t_u, row=row, g_adj=float(vals.max()), transitive=k.transitive,
                       adj_spread=float(vals.max() - vals.min()))


BRUTE_FORCE_LIMIT = 12


def g_star(gt, n):
    """``G*(n)``: maximal expected time in an ``n``-set seen from its worst member.

    On vertex-transitive graphs this is ``G(0,0)`` plus the ``n - 1`` largest
    off-origin values of ``G(0, .)``.  Otherwise an exhaustive subset search
    runs, capped at ``|G| <= 12``.
    """
    size = gt.row.size
    n = check_int(n, "n", min_value=1, max_value=size)
    if gt.transitive:
        off = np.delete(gt.row, 0)
        top = np.sort(off)[::-1][: n - 1]
        return float(gt.row[0] + top.sum())
    if gt.matrix is None:
        raise PreconditionError("non-transitive G* needs the full Green matrix", field="greens")
    return g_star_bruteforce(gt.matrix, n)


def g_star_bruteforce(G, n):
    """Exhaustive ``max_{|S|=n} max_{z in S} sum_{y in S} G(z, y)``."""
    size = G.shape[0]
    if size > BRUTE_FORCE_LIMIT:
        raise CapacityError(f"exhaustive G* limited to |G| <= {BRUTE_FORCE_LIMIT}")
    best = -math.inf
    for S in itertools.combinations(range(size), n):
        idx = np.array(S)
        best = max(best, float(G[np.ix_(idx, idx)].sum(axis=1).max()))
    return best


def check_transitivity(k, t_u, samples=None):
    """Spot-check a transitivity claim via degrees and ``G(0,.)`` vs ``G(v,.)`` multisets."""
    g = k.graph
    if len(set(g.degrees.tolist())) != 1:
        return False
    gt = greens_table(k, t_u, full=True)
    base = np.sort(gt.matrix[0])
    verts = range(k.size) if samples is None else samples
    return all(np.allclose(np.sort(gt.matrix[v]), base, atol=1e-9) for v in verts)


# -- closed forms for large tori --------------------------------------------


def lazy_cycle_profile(n, steps):
    """``n * Q^s(0, x)`` for the one-coordinate lazy kernel, ``s = 0..steps``.

    ``Q`` holds with probability 1/2 and moves +-1 with probability 1/4 each
    (flip with probability 1/2 when ``n = 2``).  Returns an array of shape
    ``(steps + 1, n)``.
    """
    out = np.empty((steps + 1, n))
    v = np.zeros(n)
    v[0] = 1.0
    for s in range(steps + 1):
        out[s] = v * n
        v = 0.5 * v + 0.25 * (np.roll(v, 1) + np.roll(v, -1))
    return out


def binomial_pmf_table(T, p):
    """``B[m, j] = P[Bin(m, p) = j]`` for ``0 <= j <= m <= T`` (zero above)."""
    m = np.arange(T + 1)[:, None]
    j = np.arange(T + 1)[None, :]
    return np.where(j <= m, binom.pmf(j, m, p), 0.0)


def allocation_mixture(factors, T):
    """Average of ``prod_j factors[j][t_j]`` over multinomial step allocations.

    With ``t`` steps assigned to ``len(factors)`` coordinates uniformly at
    random, returns ``E[prod_j f_j(t_j)]`` for every ``t = 0..T``.  Built by
    peeling one coordinate at a time: coordinate ``j`` receives
    ``Bin(m, 1/(remaining coordinates))`` of the ``m`` remaining steps.
    """
    d = len(factors)
    tail = np.asarray(factors[-1][: T + 1], dtype=float)
    for idx in range(d - 2, -1, -1):
        remaining = d - idx
        B = binomial_pmf_table(T, 1.0 / remaining)
        f = np.asarray(factors[idx][: T + 1], dtype=float)
        new = np.empty(T + 1)
        for m in range(T + 1):
            new[m] = np.dot(B[m, : m + 1] * f[: m + 1], tail[m::-1])
        tail = new
    return tail


def _cyclic_monotone(profile, n):
    dist = np.minimum(np.arange(n), n - np.arange(n))
    order = np.argsort(dist, kind="stable")
    vals = profile[:, order]
    return bool(np.all(np.diff(vals, axis=1) <= 1e-12 * np.maximum(1.0, vals[:, :-1])))


def torus_transition_ratio(n, d, y, T):
    """``|G| * P^t(0, y)`` on the lazy torus for ``t = 0..T`` (exact, any size)."""
    prof = lazy_cycle_profile(n, T)
    return allocation_mixture([prof[:, int(c) % n] for c in y], T)


def torus_uniform_mixing_time(n, d, eps=DEFAULT_EPS, max_steps=1 << 20):
    """Exact ``t_u`` of the lazy torus without forming its kernel.

    The worst ratios sit at ``y = 0`` (largest) and the antipode (smallest)
    because every one-coordinate profile ``Q^s(0, .)`` decreases in cyclic
    distance; that property is asserted on the computed profiles.
    """
    n = check_int(n, "n", min_value=2)
    d = check_int(d, "d", min_value=1)
    eps = check_positive(eps, "eps")
    T = 64
    while T <= max_steps:
        prof = lazy_cycle_profile(n, T)
        if not _cyclic_monotone(prof, n):
            raise UnsupportedOperationError("one-coordinate profile is not monotone")
        near = allocation_mixture([prof[:, 0]] * d, T)
        far = allocation_mixture([prof[:, n // 2]] * d, T)
        dist = np.maximum(near - 1.0, 1.0 - far)
        hit = np.nonzero(dist <= eps)[0]
        if hit.size:
            return int(hit[0])
        T *= 2
    raise DivergenceError(f"torus({n},{d}) did not mix within {max_steps} steps")


def torus_green(n, d, y, horizon):
    """Exact ``G(0, y)`` on the lazy torus summed over ``[0, horizon]``."""
    ratio = torus_transition_ratio(n, d, y, horizon)
    return float(ratio.sum() / float(n) ** d)
