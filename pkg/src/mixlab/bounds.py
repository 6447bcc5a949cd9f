"""Closed-form bounds, the decimation schedule and the Z^d return oracle.

Constants that only exist in an existence statement (C, C1..C10, rho0 and so
on) are never given default values here; callers pass them explicitly.  The
two constants that do come with numbers, C0 = 1/50 for the local-time bound
and C3 = 1/8 for small-set coverage, are the defaults below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import comb

from mixlab.errors import CapacityError
from mixlab.exact import DEFAULT_EPS, allocation_mixture
from mixlab.validation import check_int, check_positive, check_real

C0_DEFAULT = 1.0 / 50
C3_DEFAULT = 1.0 / 8
ZD_BUDGET = 10_000_000


# -- return probabilities ----------------------------------------------------------


def lazy_return_bound(t, d):
    """``sqrt(2) (4d/pi)^{d/2} t^{-d/2} + exp(-t/8)``."""
    t = check_positive(t, "t")
    d = check_int(d, "d", min_value=1)
    return math.sqrt(2) * (4 * d / math.pi) ** (d / 2) * t ** (-d / 2) + math.exp(-t / 8)


def nonlazy_return_bound(t, d):
    """Bound on the ``2t``-step non-lazy return probability: ``sqrt(2) (2 pi)^{-d/2} d^{d/2} t^{-d/2}``."""
    t = check_positive(t, "t")
    d = check_int(d, "d", min_value=1)
    return math.sqrt(2) / (2 * math.pi) ** (d / 2) * d ** (d / 2) / t ** (d / 2)


def _central_binomial(k, steps_per_unit):
    """Return probability of a 1-D walk after ``k`` steps.

    ``steps_per_unit=2``: lazy step (hold 1/2, +-1 w.p. 1/4), which is two fair
    half-steps, so the chance is ``C(2k, k) / 4^k``.  ``steps_per_unit=1``:
    plain +-1 step, ``C(k, k/2) / 2^k`` for even ``k``.
    """
    k = np.arange(k + 1)
    if steps_per_unit == 2:
        return comb(2 * k, k, exact=False) / 4.0**k
    out = np.where(k % 2 == 0, comb(k, k // 2, exact=False) / 2.0**k, 0.0)
    return out


def zd_return_exact(t, d, lazy=True):
    """Exact ``P^t(0, 0)`` on ``Z^d`` for ``t = 0..t`` (returns the whole curve).

    A step picks a coordinate uniformly and applies a 1-D step there.  For the
    lazy walk that 1-D step holds with probability 1/2 and moves +-1 with
    probability 1/4 each, which gives the same law as holding first and then
    choosing a coordinate.  The return probability is the multinomial
    allocation average of products of 1-D return probabilities.
    """
    t = check_int(t, "t", min_value=0)
    d = check_int(d, "d", min_value=1)
    if (t + 1) ** 2 * d > ZD_BUDGET:
        raise CapacityError(f"zd_return_exact over budget for t={t}, d={d}")
    f = _central_binomial(t, 2 if lazy else 1)
    return allocation_mixture([f] * d, t)


def low_degree_green_bound(k, n, d, delta, C1, C2, C3):
    """Three-term bound on ``G(x, y)`` at L1 distance ``k`` on a torus of side ``n``."""
    k = check_int(k, "k", min_value=1)
    d = check_int(d, "d", min_value=3)
    delta = check_real(delta, "delta", low=0, high=1, low_open=True, high_open=True)
    base = (4 * d / math.pi) ** (d / 2)
    term1 = C1 / d * base * k ** (1 - d / 2)
    term2 = C2 * d * math.log(d) * base * n ** (2 - d * (1 - delta / 2))
    term3 = C3 * d * d * math.log(d) * n * n * math.exp(-(n**delta) / 2)
    return term1 + term2 + term3


def low_degree_green_terms(k, n, d, delta):
    """The three terms of :func:`low_degree_green_bound` with unit constants."""
    return tuple(low_degree_green_bound(k, n, d, delta, *c) for c in np.eye(3))


# -- local time and large deviations ---------------------------------------------


def local_time_bound(t, pi_S, t_rel, C0=C0_DEFAULT):
    """``exp(-C0 t pi(S) / t_rel)``."""
    check_real(t, "t", low=0)
    check_real(pi_S, "pi_S", low=0, high=1)
    check_positive(t_rel, "t_rel")
    return math.exp(-C0 * t * pi_S / t_rel)


def ld_delta(x, lambda0, mu):
    mubar = 1 - mu
    return 1 + 4 * lambda0 * x * (1 - x) / (mu * mubar * (1 - lambda0) ** 2)


def ld_rate_closed_form(x, lambda0, mu):
    """Closed-form rate function ``I(x)`` with ``Delta`` evaluated at ``x``."""
    mubar, xbar = 1 - mu, 1 - x
    root = math.sqrt(ld_delta(x, lambda0, mu)) + 1
    return (-x * math.log((mu + mubar * lambda0) / (1 - 2 * xbar / root))
            - xbar * math.log((mubar + mu * lambda0) / (1 - 2 * x / root)))


@dataclass(frozen=True)
class RateResult:
    value: float
    lower_bound: float
    abserr: float
    delta_range: tuple
    delta_envelope: tuple

    @property
    def inequality_holds(self):
        return self.value >= self.lower_bound

    @property
    def delta_in_envelope(self):
        lo, hi = self.delta_envelope
        return lo <= self.delta_range[0] and self.delta_range[1] <= hi


def _ld_check(lambda0, eps):
    eps = check_real(eps, "eps", low=0, high=0.25, low_open=True, high_open=True)
    lambda0 = check_real(lambda0, "lambda0", low=0.5, high=1, high_open=True)
    return lambda0, eps


def ld_rate(lambda0, eps, tol=1e-8):
    """``I(mu + eps)`` by quadrature together with ``(1 - lambda0) eps / (16 sqrt 5)``.

    The double integral over ``mu <= y <= x <= mu + eps`` of
    ``1 / (sqrt(Delta(y)) y (1 - y))`` collapses to a single integral with
    weight ``mu + eps - y``; it is evaluated adaptively to tolerance ``tol``.
    """
    lambda0, eps = _ld_check(lambda0, eps)
    mu = 1 - 2 * eps

    def integrand(y):
        return (mu + eps - y) / (math.sqrt(ld_delta(y, lambda0, mu)) * y * (1 - y))

    value, abserr = integrate.quad(integrand, mu, mu + eps, epsabs=tol, epsrel=tol)
    xs = np.linspace(mu, mu + eps, 201)
    deltas = ld_delta(xs, lambda0, mu)
    gap2 = (1 - lambda0) ** 2
    return RateResult(value=value, lower_bound=(1 - lambda0) * eps / (16 * math.sqrt(5)), abserr=abserr,
                      delta_range=(float(deltas.min()), float(deltas.max())),
                      delta_envelope=(0.5 / gap2, 20 / gap2))


def ld_rate_dblquad(lambda0, eps, tol=1e-8):
    """The double integral evaluated as written (a slower cross-check)."""
    lambda0, eps = _ld_check(lambda0, eps)
    mu = 1 - 2 * eps
    value, _ = integrate.dblquad(lambda y, x: 1 / (math.sqrt(ld_delta(y, lambda0, mu)) * y * (1 - y)),
                                 mu, mu + eps, lambda x: mu, lambda x: x, epsabs=tol, epsrel=tol)
    return value


# -- coverage of large sets ------------------------------------------------------


def q_of_t(t, t_u, g_adj, cardinality):
    """``(g_adj - 1) + (1 + 1/(2e)) (t - t_u) / |G|`` once ``t > t_u``."""
    check_int(cardinality, "cardinality", min_value=1)
    extra = (1 + DEFAULT_EPS) * (t - t_u) / cardinality if t > t_u else 0.0
    return (g_adj - 1) + extra


def deconc_bound(t, pi_S, k, q, t_u):
    """``1 - t pi(S) q^k / t_u``."""
    k = check_int(k, "k", min_value=1)
    check_positive(t_u, "t_u")
    return 1 - t * pi_S * q**k / t_u


def coverage_tail_bound(t, pi_S, t_rel, k, q, t_u, C0=C0_DEFAULT):
    """Three-term bound on ``P_pi[C_S(t) <= (t pi(S) - 8 t_u) / (8k)]``."""
    k = check_int(k, "k", min_value=1)
    return (local_time_bound(t, pi_S, t_rel, C0) + math.exp(-t * pi_S / 16)
            + t * pi_S * q**k / t_u)


@dataclass(frozen=True)
class Epoch:
    length: float
    failure: float | None


def large_set_epoch(pi_S, t_u, K2, C=None, t_rel=None):
    """Epoch ``2 (K2 + 2) t_u / pi(S)`` and, given ``C`` and ``t_rel``, ``exp(-C t_u / t_rel)``."""
    check_real(pi_S, "pi_S", low=0, high=1, low_open=True)
    check_positive(K2, "K2")
    failure = None
    if C is not None and t_rel is not None:
        failure = math.exp(-C * t_u / check_positive(t_rel, "t_rel"))
    return Epoch(length=2 * (K2 + 2) * t_u / pi_S, failure=failure)


@dataclass(frozen=True)
class QSandwich:
    lower: float
    q: float
    upper: float
    applicable: bool

    @property
    def holds(self):
        return self.lower <= self.q <= self.upper


def q_sandwich(set_size, cardinality, t_u, g_adj, K2):
    """Check ``g_adj - 1 <= q(t~) <= (5/2)(g_adj - 1)`` at ``t~ = 2 K2 t_u / pi(S)``.

    ``applicable`` says whether ``|S| >= 2 K2 t_u / (g_adj - 1)``, the size
    condition under which the sandwich is claimed.
    """
    pi_S = set_size / cardinality
    t_tilde = 2 * K2 * t_u / pi_S
    excess = g_adj - 1
    applicable = excess > 0 and set_size >= 2 * K2 * t_u / excess
    return QSandwich(lower=excess, q=q_of_t(t_tilde, t_u, g_adj, cardinality), upper=2.5 * excess,
                     applicable=bool(applicable))


@dataclass(frozen=True)
class SmallSetEpoch:
    length: float
    failure: float
    hypothesis: bool


def small_set_epoch(cardinality, gstar_s, C2, s, t_u=None, C3=C3_DEFAULT):
    """Epoch ``C2 |G| G*(s)`` with failure bound ``exp(-C3 s)``.

    ``hypothesis`` reports ``t_u <= |G| / (4 s)`` when ``t_u`` is given.
    """
    s = check_int(s, "s", min_value=1)
    hyp = t_u is not None and t_u <= cardinality / (4 * s)
    return SmallSetEpoch(length=C2 * cardinality * gstar_s, failure=math.exp(-C3 * s), hypothesis=bool(hyp))


# -- decimation schedule ---------------------------------------------------------


@dataclass
class Schedule:
    """Uncovered-set thresholds ``s_0 > s_1 > ... > s_{r + r~} = 0``.

    ``t_epochs[i-1]`` is ``t_i`` for ``1 <= i <= r``; ``q_epochs[j-1]`` is
    ``q_{r+j}`` for ``1 <= j <= r~``; ``theta`` holds ``theta_1..theta_r``
    followed by ``theta_{r+1}..theta_{r+r~}``.  Epochs and rates stay empty
    when the constants they need are not supplied.
    """

    cardinality: int
    t_u: int
    n_star: int
    r: int
    r_tilde: int
    s: list
    t_epochs: list = field(default_factory=list)
    q_epochs: list = field(default_factory=list)
    theta: list = field(default_factory=list)

    @property
    def large(self):
        return self.s[1 : self.r + 1]

    @property
    def small(self):
        return self.s[self.r + 1 :]


def build_schedule(cardinality, t_u, n_star, K2=None, C=None, t_rel=None, C2=None, C3=C3_DEFAULT, gstar=None):
    """Decimation ladder; ``gstar`` is a callable ``n -> G*(n)`` when small-regime epochs are wanted.

    ``r~ = floor(log2 s_r)`` is raised to 1 when ``s_r = 1`` so the ladder
    still ends at 0.
    """
    N = check_int(cardinality, "cardinality", min_value=1)
    t_u = check_int(t_u, "t_u", min_value=1)
    n_star = check_int(n_star, "n_star", min_value=1)
    r = max(0, (N - n_star) // t_u) if n_star <= N else 0
    s = [N - i * t_u for i in range(r + 1)]
    s_r = s[-1]
    r_tilde = max(1, int(math.floor(math.log2(s_r))))
    s += [s_r >> i for i in range(1, r_tilde)] + [0]
    sched = Schedule(cardinality=N, t_u=t_u, n_star=n_star, r=r, r_tilde=r_tilde, s=s)
    if K2 is not None:
        sched.t_epochs = [2 * (K2 + 2) * t_u * N / s[i] for i in range(1, r + 1)]
        if C is not None and t_rel is not None:
            sched.theta = [C * t_u / (2 * ti * t_rel) for ti in sched.t_epochs]
    if C2 is not None and gstar is not None:
        sched.q_epochs = [C2 * N * gstar(max(s[r + j], 1)) for j in range(1, r_tilde + 1)]
        g_n = gstar(min(n_star, N))
        sched.theta = sched.theta + [C3 / (2 * C2) * s[r + i] / (N * g_n) for i in range(1, r_tilde + 1)]
    return sched


def large_decimation_bound(s_i, t, cardinality, t_rel, C4, C5):
    """``exp((s_i / t_rel) (C4 log|G| - C5 t / |G|))``."""
    return math.exp(s_i / t_rel * (C4 * math.log(cardinality) - C5 * t / cardinality))


def small_decimation_term(s_prev, i, t, cardinality, gstar_nstar, C6, C7):
    """Second term ``exp(s_{r+i-1} (C6 i - C7 t / (|G| G*(n*))))``."""
    return math.exp(s_prev * (C6 * i - C7 * t / (cardinality * gstar_nstar)))


def exp_moment_bound(t, cardinality, t_rel, n_star, C8, C9, C10):
    """Solve ``t = (1 + a) C8 |G| (t_rel + log|G|)`` for ``a`` and return ``(a, 1 + C9 exp(-a C10 log n*))``."""
    a = t / (C8 * cardinality * (t_rel + math.log(cardinality))) - 1
    return a, 1 + C9 * math.exp(-a * C10 * math.log(n_star))


@dataclass
class DecimationBounds:
    large: list | None
    small: list | None
    exp_moment: tuple | None
    status: dict


def decimation_bounds(schedule, constants, t, t_rel, gstar_nstar=None, small_first_term=None):
    """Evaluate the three decimation displays at time ``t``.

    A part whose constants are missing comes back as ``None`` with status
    ``"unparameterized"``.  The first term of the small-regime display is
    ``P[|U(t/2)| > s_r]``; pass it as ``small_first_term`` or it is taken from
    the large-regime bound at ``t/2`` (zero when ``r = 0``).
    """
    c = dict(constants or {})
    N = schedule.cardinality
    status = {}
    large = small = moment = None
    if "C4" in c and "C5" in c:
        large = [large_decimation_bound(s, t, N, t_rel, c["C4"], c["C5"]) for s in schedule.large]
        status["large"] = "ok"
    else:
        status["large"] = "unparameterized"
    if "C6" in c and "C7" in c and gstar_nstar is not None:
        first = small_first_term
        if first is None:
            if schedule.r == 0:
                first = 0.0
            elif large is not None:
                first = min(1.0, large_decimation_bound(schedule.s[schedule.r], t / 2, N, t_rel, c["C4"], c["C5"]))
            else:
                first = 1.0
        r = schedule.r
        small = [first + small_decimation_term(schedule.s[r + i - 1], i, t, N, gstar_nstar, c["C6"], c["C7"])
                 for i in range(1, schedule.r_tilde + 1)]
        status["small"] = "ok"
    else:
        status["small"] = "unparameterized"
    if all(k in c for k in ("C8", "C9", "C10")):
        moment = exp_moment_bound(t, N, t_rel, schedule.n_star, c["C8"], c["C9"], c["C10"])
        status["exp_moment"] = "ok"
    else:
        status["exp_moment"] = "unparameterized"
    return DecimationBounds(large=large, small=small, exp_moment=moment, status=status)


# -- geometric moment generating function ------------------------------------------


@dataclass(frozen=True)
class GeoAlpha:
    alpha: float
    alpha_grid: float
    resolution: tuple
    violations: int


def _geo_ratio(p, x):
    return (np.log(p) + x - np.log1p(-(1 - p) * np.exp(x))) / x


def _geo_grid(beta, x_max, nx, np_):
    xs = np.linspace(x_max / nx, x_max, nx)
    # p ranges over [1 - beta e^{-x}, 1); the boundary point is always included.
    frac = np.linspace(0, 1, np_, endpoint=False)
    p_lo = 1 - beta * np.exp(-xs)
    P = p_lo[:, None] + (1 - p_lo[:, None]) * frac[None, :]
    X = np.broadcast_to(xs[:, None], P.shape)
    return P, X


def geo_mgf_alpha(beta, x_max=5.0, nx=2000, np_=200):
    """Smallest ``alpha`` with ``p e^x / (1 - (1-p) e^x) <= e^{alpha x}`` when ``(1-p) e^x <= beta``.

    For fixed ``x`` the ratio ``log(MGF)/x`` grows as ``p`` falls, so the
    worst ``p`` is on the boundary ``(1-p) e^x = beta``; along it the ratio
    decreases in ``x`` towards ``1/(1 - beta)`` as ``x -> 0``.  The grid
    maximum therefore approaches but never reaches the supremum, and the
    returned ``alpha`` is the supremum itself.  ``violations`` counts grid
    points of a 10x finer verification grid that break the inequality.
    """
    beta = check_real(beta, "beta", low=0, high=1, low_open=True, high_open=True)
    P, X = _geo_grid(beta, x_max, nx, np_)
    alpha_grid = float(np.max(_geo_ratio(P, X)))
    alpha = max(alpha_grid, 1.0 / (1.0 - beta))
    Pf, Xf = _geo_grid(beta, x_max, 10 * nx, 10 * np_)
    lhs = np.log(Pf) + Xf - np.log1p(-(1 - Pf) * np.exp(Xf))
    violations = int(np.sum(lhs > alpha * Xf + 1e-12))
    return GeoAlpha(alpha=alpha, alpha_grid=alpha_grid, resolution=(x_max / nx, 1.0 / np_), violations=violations)


# -- hitting identity ------------------------------------------------------------


@dataclass(frozen=True)
class HittingIdentity:
    prob: float
    mean_Z: float
    cond_mean_Z: float | None

    @property
    def gap(self):
        if self.cond_mean_Z is None:
            return None
        return abs(self.prob - self.mean_Z / self.cond_mean_Z)


def hitting_ratio_identity_check(kernel, x, S, t):
    """Both sides of ``P_x[tau_S <= t] = E_x[Z] / E_x[Z | tau_S <= t]`` with ``Z = L_S(t)``.

    ``E_x[Z]`` comes from transition powers, ``P_x[tau_S <= t]`` from the
    chain killed on ``S``, and the conditional mean from the first-passage
    decomposition ``sum_u sum_z P[tau_S = u, X(u) = z] E_z[L_S(t - u)]``.
    ``cond_mean_Z`` is ``None`` when ``tau_S <= t`` has probability 0.
    """
    P = kernel.P
    size = P.shape[0]
    mask = np.zeros(size, dtype=bool)
    mask[np.asarray(list(S), dtype=int)] = True
    t = check_int(t, "t", min_value=0)
    # occupation[s, z] = E_z[L_S(s)]
    occ = np.empty((t + 1, size))
    occ[0] = mask.astype(float)
    for s in range(1, t + 1):
        occ[s] = mask + P @ occ[s - 1]
    mean_Z = float(occ[t, x])
    alive = np.zeros(size)
    alive[x] = 1.0
    first = []
    for u in range(t + 1):
        if u:
            alive = alive @ P
        first.append(np.where(mask, alive, 0.0))
        alive = np.where(mask, 0.0, alive)
    prob = float(sum(f.sum() for f in first))
    if prob <= 0:
        return HittingIdentity(prob=prob, mean_Z=mean_Z, cond_mean_Z=None)
    joint = sum(float(first[u] @ occ[t - u]) for u in range(t + 1))
    return HittingIdentity(prob=prob, mean_Z=mean_Z, cond_mean_Z=joint / prob)
