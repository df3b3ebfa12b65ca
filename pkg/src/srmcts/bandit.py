"""Extreme-bandit policies, parametric reward arms, Monte-Carlo gap/regret
estimation and evaluators for the closed-form performance bounds.

Two arm families are supported.  Polynomial-like arms have CDF
``P(x; a, b) = 1 - (1 - x/b)**a`` on [0, b] (tail decays polynomially near
the supremum b); exponential-like arms have ``P(x; a, b) = 1 - exp(-a*x/(b-x))``
on [0, b).  The extreme objective is the expected highest single reward,
not the cumulative reward, which is why the UCB-extreme policy scores an
arm by its maximum observed reward plus ``2c * (ln T / T_k)**gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import (
    ConditionViolatedError,
    InfiniteDivergenceError,
    InvalidHorizonError,
    UndefinedBoundError,
)

POLYNOMIAL = "polynomial"
EXPONENTIAL = "exponential"

# Float slack for the parameter-validity inequalities, so exact-equality
# configurations (e.g. 2c = (7/3)**(1/3) with gamma = 1/3) do not fail by
# one rounding ulp.
_COND_RTOL = 1e-9


@dataclass(frozen=True)
class ArmSpec:
    """Parametric reward distribution of one arm."""

    family: str
    a: float
    b: float

    def __post_init__(self):
        if self.family not in (POLYNOMIAL, EXPONENTIAL):
            raise ValueError(f"unknown arm family {self.family!r}")
        if not 0.0 < self.b <= 1.0:
            raise ValueError("supremum b must be in (0, 1]")
        if self.family == POLYNOMIAL and self.a < 1.0:
            raise ValueError("polynomial-like arms need a >= 1")
        if self.family == EXPONENTIAL and self.a <= 0.0:
            raise ValueError("exponential-like arms need a > 0")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == POLYNOMIAL:
            out = 1.0 - (1.0 - np.clip(x, 0.0, self.b) / self.b) ** self.a
        else:
            xc = np.clip(x, 0.0, np.nextafter(self.b, 0.0))
            out = 1.0 - np.exp(-self.a * xc / (self.b - xc))
        return np.where(x >= self.b, 1.0, np.where(x <= 0.0, 0.0, out))

    def inverse_cdf(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == POLYNOMIAL:
            return self.b * (1.0 - (1.0 - u) ** (1.0 / self.a))
        L = -np.log1p(-u)
        return self.b * L / (self.a + L)


def poly_arm(a: float, b: float) -> ArmSpec:
    return ArmSpec(POLYNOMIAL, a, b)


def exp_arm(a: float, b: float) -> ArmSpec:
    return ArmSpec(EXPONENTIAL, a, b)


#: The four-arm configuration of the numerical bound-verification study.
DEFAULT_ARMS = (
    poly_arm(3.0, 1.0),
    poly_arm(4.0, 0.9),
    poly_arm(2.0, 0.85),
    poly_arm(1.0, 0.9),
)

#: 2c = (7/3)**(1/3), gamma = 1/3: the equality case of the validity
#: condition for a1 = 3.
DEFAULT_UCBX_C = 0.5 * (7.0 / 3.0) ** (1.0 / 3.0)
DEFAULT_UCBX_GAMMA = 1.0 / 3.0
DEFAULT_EPS = 0.25
DEFAULT_C_OVERRIDE = 10.0


def sample_arm(spec: ArmSpec, rng) -> float:
    """One inverse-CDF draw.  ``rng`` is a numpy Generator."""
    return float(spec.inverse_cdf(rng.random()))


@dataclass(frozen=True)
class PolicyConfig:
    """Arm-selection rule and its parameters."""

    kind: str  # "ucb-extreme" | "ucb1" | "eps-greedy"
    c: float = DEFAULT_UCBX_C
    gamma: float = DEFAULT_UCBX_GAMMA
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if self.kind not in ("ucb-extreme", "ucb1", "eps-greedy"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind == "ucb-extreme" and (self.c <= 0 or self.gamma <= 0):
            raise ValueError("ucb-extreme needs c > 0 and gamma > 0")
        if self.kind == "eps-greedy" and not 0.0 <= self.eps <= 1.0:
            raise ValueError("eps must be in [0, 1]")


def _tie_argmax(scores, rng) -> int:
    best = np.max(scores)
    ties = np.flatnonzero(scores == best)
    if len(ties) == 1:
        return int(ties[0])
    return int(ties[rng.integers(len(ties))])


def select_ucb_extreme(maxes, pulls, total: int, c: float, gamma: float, rng) -> int:
    """argmax_k of max-observed-reward plus ``2c (ln T / T_k)**gamma``.

    Unpulled arms are selected first, in index order; exact ties are broken
    uniformly at random.
    """
    pulls = np.asarray(pulls)
    unpulled = np.flatnonzero(pulls == 0)
    if unpulled.size:
        return int(unpulled[0])
    scores = np.asarray(maxes, dtype=float) + \
        2.0 * c * (math.log(total) / pulls) ** gamma
    return _tie_argmax(scores, rng)


def select_ucb1(means, pulls, total: int, c: float, rng) -> int:
    """Classic mean-based rule: argmax of mean + c*sqrt(2 ln T / T_k)."""
    pulls = np.asarray(pulls)
    unpulled = np.flatnonzero(pulls == 0)
    if unpulled.size:
        return int(unpulled[0])
    scores = np.asarray(means, dtype=float) + \
        c * np.sqrt(2.0 * math.log(total) / pulls)
    return _tie_argmax(scores, rng)


def select_eps_greedy(maxes, eps: float, rng) -> int:
    """Uniform arm with probability eps, else the arm with the highest
    observed reward (extreme-value flavour of epsilon-greedy)."""
    maxes = np.asarray(maxes, dtype=float)
    if rng.random() < eps:
        return int(rng.integers(len(maxes)))
    return _tie_argmax(maxes, rng)


@dataclass
class BanditRun:
    """Trace of a single policy run."""

    chosen: np.ndarray        # arm index per round
    rewards: np.ndarray       # reward per round
    running_max: np.ndarray   # cumulative max per round
    pulls: np.ndarray         # per-arm pull counts
    arm_max: np.ndarray       # per-arm maximum observed reward


def simulate_policy_run(arms, policy: PolicyConfig, T: int, rng) -> BanditRun:
    """Sequential single-run simulator (the scalar reference used to
    cross-check the vectorised estimator)."""
    K = len(arms)
    chosen = np.empty(T, dtype=int)
    rewards = np.empty(T)
    maxes = np.full(K, -np.inf)
    sums = np.zeros(K)
    pulls = np.zeros(K, dtype=int)
    for t in range(T):
        if t < K:
            k = t
        elif policy.kind == "ucb-extreme":
            k = select_ucb_extreme(maxes, pulls, t, policy.c, policy.gamma, rng)
        elif policy.kind == "ucb1":
            k = select_ucb1(sums / pulls, pulls, t, policy.c, rng)
        else:
            k = select_eps_greedy(maxes, policy.eps, rng)
        x = sample_arm(arms[k], rng)
        chosen[t] = k
        rewards[t] = x
        pulls[k] += 1
        sums[k] += x
        maxes[k] = max(maxes[k], x)
    return BanditRun(chosen, rewards, np.maximum.accumulate(rewards),
                     pulls, maxes)


def _sample_rewards(arms, chosen, u):
    """Map uniform draws through each chosen arm's inverse CDF."""
    x = np.empty_like(u)
    for k, spec in enumerate(arms):
        mask = chosen == k
        if np.any(mask):
            x[mask] = spec.inverse_cdf(u[mask])
    return x


def _simulate_policy_block(arms, policy: PolicyConfig, T: int, repeats: int,
                           rng, checkpoints) -> np.ndarray:
    """Vectorised policy simulation; returns (repeats, n_checkpoints)
    running maxima."""
    K = len(arms)
    R = repeats
    maxes = np.full((R, K), -np.inf)
    sums = np.zeros((R, K))
    pulls = np.zeros((R, K))
    best = np.full(R, -np.inf)
    out = np.empty((R, len(checkpoints)))
    cp = {t: i for i, t in enumerate(checkpoints)}
    rows = np.arange(R)
    for t in range(T):
        if t < K:
            chosen = np.full(R, t)
        else:
            if policy.kind == "ucb-extreme":
                scores = maxes + 2.0 * policy.c * \
                    (math.log(t) / pulls) ** policy.gamma
            elif policy.kind == "ucb1":
                scores = sums / pulls + policy.c * \
                    np.sqrt(2.0 * math.log(t) / pulls)
            else:
                scores = maxes
            row_best = scores.max(axis=1, keepdims=True)
            tie = scores == row_best
            # uniform choice among exact ties, vectorised
            kth = np.floor(rng.random(R) * tie.sum(axis=1)).astype(int)
            csum = np.cumsum(tie, axis=1)
            chosen = np.argmax(csum > kth[:, None], axis=1)
            if policy.kind == "eps-greedy":
                explore = rng.random(R) < policy.eps
                uniform_arm = rng.integers(0, K, size=R)
                chosen = np.where(explore, uniform_arm, chosen)
        x = _sample_rewards(arms, chosen, rng.random(R))
        pulls[rows, chosen] += 1.0
        sums[rows, chosen] += x
        np.maximum.at(maxes, (rows, chosen), x)
        np.maximum(best, x, out=best)
        i = cp.get(t + 1)
        if i is not None:
            out[:, i] = best
    return out


def _single_arm_reference(spec: ArmSpec, T: int, repeats: int, rng,
                          checkpoints) -> np.ndarray:
    """(repeats, n_checkpoints) running maxima when pulling one arm only."""
    out = np.empty((repeats, len(checkpoints)))
    best = np.full(repeats, -np.inf)
    prev = 0
    for i, t in enumerate(checkpoints):
        block = spec.inverse_cdf(rng.random((repeats, t - prev)))
        if block.size:
            np.maximum(best, block.max(axis=1), out=best)
        out[:, i] = best
        prev = t
    return out


def default_checkpoints(T: int, n: int = 160):
    """Logarithmically spaced evaluation rounds, always ending at T."""
    pts = np.unique(np.round(np.geomspace(1, T, n)).astype(int))
    return pts[pts >= 1]


@dataclass
class BanditCurves:
    """Monte-Carlo gap/regret estimates with their standard errors."""

    policy: str
    t: np.ndarray
    g_hat: np.ndarray
    r_hat: np.ndarray
    g_se: np.ndarray
    r_se: np.ndarray
    best_b: float
    repeats: int
    reference: np.ndarray = field(repr=False, default=None)  # mean per-arm max


def run_bandit(arms, policy: PolicyConfig, T: int, repeats: int,
               seed: int = 0, checkpoints=None) -> BanditCurves:
    """Estimate the gap curve G(t) and regret curve R(t) for one policy.

    ``G(t) = b1 - max_k E[max_{s<=t} X_k]`` uses dedicated single-arm
    reference runs with the same repeat count; ``R(t)`` subtracts the
    policy's expected running maximum from the reference term.  Reference
    runs depend only on (arms, T, repeats, seed), so G is identical across
    policies under a shared seed.
    """
    K = len(arms)
    if K < 1:
        raise ValueError("need at least one arm")
    if T < K:
        raise InvalidHorizonError(f"horizon {T} smaller than number of arms {K}")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if checkpoints is None:
        checkpoints = default_checkpoints(T)
    checkpoints = np.asarray(checkpoints, dtype=int)

    ss = np.random.SeedSequence(seed)
    children = ss.spawn(K + 1)
    ref_mean = np.empty((K, len(checkpoints)))
    ref_se = np.empty((K, len(checkpoints)))
    for k, spec in enumerate(arms):
        block = _single_arm_reference(spec, T, repeats,
                                      np.random.default_rng(children[k]),
                                      checkpoints)
        ref_mean[k] = block.mean(axis=0)
        ref_se[k] = block.std(axis=0, ddof=1) / math.sqrt(repeats) \
            if repeats > 1 else 0.0

    best_arm_at_t = np.argmax(ref_mean, axis=0)
    cols = np.arange(len(checkpoints))
    reference = ref_mean[best_arm_at_t, cols]
    reference_se = ref_se[best_arm_at_t, cols]
    b1 = max(spec.b for spec in arms)

    if K == 1:
        # One arm: every policy is "pull arm 0"; reuse the reference stream
        # so the regret estimate is exactly zero.
        block = _single_arm_reference(arms[0], T, repeats,
                                      np.random.default_rng(children[0]),
                                      checkpoints)
    else:
        block = _simulate_policy_block(arms, policy, T, repeats,
                                       np.random.default_rng(children[K]),
                                       checkpoints)
    pol_mean = block.mean(axis=0)
    pol_se = block.std(axis=0, ddof=1) / math.sqrt(repeats) if repeats > 1 else \
        np.zeros(len(checkpoints))

    return BanditCurves(
        policy=policy.kind,
        t=checkpoints,
        g_hat=b1 - reference,
        r_hat=reference - pol_mean,
        g_se=reference_se,
        r_se=np.sqrt(reference_se ** 2 + pol_se ** 2),
        best_b=b1,
        repeats=repeats,
        reference=ref_mean,
    )


# ---------------------------------------------------------------------------
# Closed-form quantities


def expected_max_poly(a: float, b: float, n: int) -> float:
    """E[max of n samples] for a polynomial-like arm:
    ``b * (1 - F(a, n))`` with ``F = Gamma(1/a+1) Gamma(n+1) / Gamma(1/a+n+1)``,
    evaluated through log-gamma."""
    if a < 1.0:
        raise ValueError("a must be >= 1")
    if not 0.0 < b <= 1.0:
        raise ValueError("b must be in (0, 1]")
    if n < 1:
        raise ValueError("n must be >= 1")
    inv_a = 1.0 / a
    log_f = math.lgamma(inv_a + 1.0) + math.lgamma(n + 1.0) \
        - math.lgamma(inv_a + n + 1.0)
    return b * (1.0 - math.exp(log_f))


def bound_gap(a1: float, b1: float, T: int) -> float:
    """Upper bound on the performance gap: ``b1 / (T + 1/a1)**(1/a1)``."""
    return b1 / (T + 1.0 / a1) ** (1.0 / a1)


def check_ucb_extreme_condition(c: float, gamma: float, a1: float) -> None:
    """Validity condition on (c, gamma) given the best arm's decay rate:
    ``1/gamma >= a1`` and ``2**a1 * c**(1/gamma) >= 2 + 1/a1``.
    Raises :class:`ConditionViolatedError` if either fails (a relative
    slack of 1e-9 keeps equality cases valid under rounding)."""
    if c <= 0 or gamma <= 0:
        raise ConditionViolatedError("need c > 0 and gamma > 0")
    inv_gamma = 1.0 / gamma
    if inv_gamma < a1 * (1.0 - _COND_RTOL):
        raise ConditionViolatedError(
            f"1/gamma = {inv_gamma:.6g} must be >= a1 = {a1:.6g}")
    lhs = 2.0 ** a1 * c ** inv_gamma
    rhs = 2.0 + 1.0 / a1
    if lhs < rhs * (1.0 - _COND_RTOL):
        raise ConditionViolatedError(
            f"2**a1 * c**(1/gamma) = {lhs:.6g} must be >= 2 + 1/a1 = {rhs:.6g}")


def _best_arm(arms):
    b1 = max(spec.b for spec in arms)
    idx = [i for i, spec in enumerate(arms) if spec.b == b1]
    return idx[0], b1


def regret_constant(arms, c: float, gamma: float) -> float:
    """The constant ``C = sum_k (2c / Delta_k)**(1/gamma)`` over
    suboptimal arms."""
    best, b1 = _best_arm(arms)
    total = 0.0
    for i, spec in enumerate(arms):
        if i == best:
            continue
        delta = b1 - spec.b
        if delta <= 0.0:
            raise ValueError("suboptimal arm shares the optimal supremum")
        total += (2.0 * c / delta) ** (1.0 / gamma)
    return total


def bound_regret(arms, c: float, gamma: float, T: int,
                 C_override: float | None = None) -> float:
    """Finite-time regret bound for the UCB-extreme policy:

    ``K^2 b1 (M-1)/(M-2) (C ln T + 2K) / (T - C ln T - K)**(1 + 1/a1)``
    with ``M = 2**a1 c**(1/gamma)``.  Raises
    :class:`ConditionViolatedError` when the (c, gamma) validity condition
    fails and :class:`UndefinedBoundError` when ``T <= C ln T + K``.
    """
    K = len(arms)
    best, b1 = _best_arm(arms)
    a1 = arms[best].a
    check_ucb_extreme_condition(c, gamma, a1)
    C = regret_constant(arms, c, gamma) if C_override is None else float(C_override)
    log_t = math.log(T)
    denom_base = T - C * log_t - K
    if denom_base <= 0.0:
        raise UndefinedBoundError(
            f"bound undefined: T = {T} <= C ln T + K = {C * log_t + K:.4g}")
    M = 2.0 ** a1 * c ** (1.0 / gamma)
    return (K * K * b1) * (M - 1.0) / (M - 2.0) * \
        (C * log_t + 2.0 * K) / denom_base ** (1.0 + 1.0 / a1)


def bound_gap_lower_exponential(a1: float, b1: float, delta_min: float,
                                T: int) -> float:
    """Lower bound on the gap for exponential-like arms:
    ``min(a1 b1 / (e ln(T+1)), delta_min)``."""
    return min(a1 * b1 / (math.e * math.log(T + 1.0)), delta_min)


def kl_poly(a_k: float, b_k: float, a1: float, b1: float) -> float:
    """KL divergence between two polynomial-like reward densities by
    adaptive quadrature over [0, b_k].

    Finite only when the suboptimal support is nested (``b_k <= b1``);
    larger ``b_k`` raises :class:`InfiniteDivergenceError`.  Used to
    report the ``ln T / KL`` pull-count lower bound.
    """
    if b_k > b1:
        raise InfiniteDivergenceError("b_k > b1 puts mass outside the support")
    if a_k == a1 and b_k == b1:
        return 0.0

    log_ak = math.log(a_k / b_k)
    log_a1 = math.log(a1 / b1)

    def integrand(x):
        u = 1.0 - x / b_k
        if u <= 0.0:
            return 0.0
        v = 1.0 - x / b1
        log_rho_k = log_ak + (a_k - 1.0) * math.log(u)
        log_rho_1 = log_a1 + (a1 - 1.0) * math.log(v) if v > 0.0 else -math.inf
        return math.exp(log_rho_k) * (log_rho_k - log_rho_1)

    val, _err = integrate.quad(integrand, 0.0, b_k, limit=200)
    return max(val, 0.0)


def pull_count_lower_bound(a_k: float, b_k: float, a1: float, b1: float,
                           T: int) -> float:
    """Asymptotic minimum expected pulls of a suboptimal arm: ln T / KL."""
    return math.log(T) / kl_poly(a_k, b_k, a1, b1)
