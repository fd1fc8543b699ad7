"""Executable equilibrium and efficiency oracles for tiny game instances.

Strategy profiles are open-loop: user n's action depends only on the slot
index, given as an (N, T) integer matrix.  Mixed per-slot strategies
(an (N, T, K+1) stack of probability vectors) are supported for reward
evaluation only.  All checks are exact enumerations guarded by an explicit
budget; they refuse rather than truncate.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .env import resolve_slot
from .errors import BudgetExceededError, ConfigError, DomainError
from .rewards import ALPHA_FAIR, COMPETITIVE, RewardSpec, alpha_fair_utility

DEFAULT_BUDGET = 10_000_000
IMPROVEMENT_TOL = 1e-9

THEOREM_TEMPLATES = ("thm1.1", "thm1.2", "thm2", "thm3.1", "thm3.2")


@dataclass(frozen=True)
class GameSpec:
    """A single-clique game: N users, K channels, T slots, one reward spec.

    Discounting comes from ``reward.gamma``.
    """

    num_users: int
    num_channels: int
    horizon: int
    reward: RewardSpec

    def __post_init__(self) -> None:
        if self.num_users < 1 or self.num_channels < 1 or self.horizon < 1:
            raise ConfigError("num_users, num_channels and horizon must be >= 1")

    @property
    def gamma(self) -> float:
        return self.reward.gamma

    @property
    def num_actions(self) -> int:
        return self.num_channels + 1

    def truncated(self, start: int) -> "GameSpec":
        """The continuation game covering slots start..T-1 (fresh discounting,
        utilities recomputed on the truncated window)."""
        if not 0 <= start < self.horizon:
            raise DomainError(f"continuation start {start} outside 0..{self.horizon - 1}")
        return GameSpec(self.num_users, self.num_channels, self.horizon - start, self.reward)


@dataclass(frozen=True)
class DeviationWitness:
    user: int
    deviation: tuple[int, ...]
    deviation_reward: float
    profile_reward: float


@dataclass(frozen=True)
class NashResult:
    is_nash: bool
    witness: DeviationWitness | None = None

    def __bool__(self) -> bool:
        return self.is_nash


@dataclass(frozen=True)
class SpeResult:
    is_spe: bool
    failing_start: int | None = None
    witness: DeviationWitness | None = None

    def __bool__(self) -> bool:
        return self.is_spe


@dataclass(frozen=True)
class ParetoResult:
    is_pareto: bool
    dominator: np.ndarray | None = None

    def __bool__(self) -> bool:
        return self.is_pareto


def _check_profile(profile, spec: GameSpec) -> np.ndarray:
    arr = np.asarray(profile)
    if arr.ndim == 2:
        arr = arr.astype(np.int64)
        if arr.shape != (spec.num_users, spec.horizon):
            raise DomainError(
                f"profile shape {arr.shape}, expected {(spec.num_users, spec.horizon)}"
            )
        if arr.min() < 0 or arr.max() > spec.num_channels:
            raise DomainError("profile actions must lie in 0..K")
        return arr
    if arr.ndim == 3:
        arr = arr.astype(float)
        expected = (spec.num_users, spec.horizon, spec.num_actions)
        if arr.shape != expected:
            raise DomainError(f"mixed profile shape {arr.shape}, expected {expected}")
        if arr.min() < -1e-12 or np.abs(arr.sum(axis=-1) - 1.0).max() > 1e-9:
            raise DomainError("mixed profile rows must be probability vectors")
        return arr
    raise DomainError("profile must be (N, T) actions or (N, T, K+1) probabilities")


def _terminal_utilities(counts: np.ndarray, spec: GameSpec) -> float:
    return float(np.sum(alpha_fair_utility(counts, spec.reward.alpha, spec.reward.log_floor)))


def _pure_rewards(profile: np.ndarray, spec: GameSpec) -> np.ndarray:
    clique = np.zeros(spec.num_users, dtype=np.int64)
    discounts = spec.gamma ** np.arange(spec.horizon)
    rewards = np.zeros(spec.num_users)
    counts = np.zeros(spec.num_users, dtype=np.int64)
    for t in range(spec.horizon):
        success = resolve_slot(profile[:, t], clique, spec.num_channels)
        if spec.reward.kind == COMPETITIVE:
            rewards += discounts[t] * success
        else:
            counts += success
    if spec.reward.kind == ALPHA_FAIR:
        rewards[:] = discounts[-1] * _terminal_utilities(counts, spec)
    return rewards


def _mixed_rewards(profile: np.ndarray, spec: GameSpec, budget: int) -> np.ndarray:
    n, horizon, k1 = profile.shape
    if spec.reward.kind == COMPETITIVE:
        # Per-slot independence: E[success of n on k] factorizes.
        rewards = np.zeros(n)
        discounts = spec.gamma ** np.arange(horizon)
        for t in range(horizon):
            p = profile[:, t, :]
            for user in range(n):
                others = np.delete(p, user, axis=0)
                clear = np.prod(1.0 - others[:, 1:], axis=0)
                rewards[user] += discounts[t] * float(np.dot(p[user, 1:], clear))
        return rewards
    # Cooperative: exact distribution over success-count vectors, folded slot
    # by slot over the (K+1)^N joint actions.
    if k1 ** n > budget:
        raise BudgetExceededError(
            f"{k1}^{n} joint actions per slot exceeds budget {budget}"
        )
    clique = np.zeros(n, dtype=np.int64)
    slot_actions = [np.array(a, dtype=np.int64) for a in itertools.product(range(k1), repeat=n)]
    slot_success = [resolve_slot(a, clique, spec.num_channels) for a in slot_actions]
    dist: dict[tuple[int, ...], float] = {tuple([0] * n): 1.0}
    for t in range(horizon):
        probs = profile[:, t, :]
        nxt: dict[tuple[int, ...], float] = {}
        for actions, success in zip(slot_actions, slot_success):
            p_slot = float(np.prod(probs[np.arange(n), actions]))
            if p_slot == 0.0:
                continue
            for counts, p0 in dist.items():
                key = tuple(np.add(counts, success))
                nxt[key] = nxt.get(key, 0.0) + p0 * p_slot
        dist = nxt
    value = sum(
        p * _terminal_utilities(np.array(counts), spec) for counts, p in dist.items()
    )
    return np.full(n, spec.gamma ** (horizon - 1) * value)


def profile_rewards(profile, spec: GameSpec, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """Accumulated discounted reward per user (exact; expectation for mixed)."""
    arr = _check_profile(profile, spec)
    if arr.ndim == 2:
        return _pure_rewards(arr, spec)
    return _mixed_rewards(arr, spec, budget)


def is_nash(profile, spec: GameSpec, budget: int = DEFAULT_BUDGET) -> NashResult:
    """Check every pure open-loop deviation of every user.

    Returns the first strictly improving deviation (users ascending,
    deviations in lexicographic order) as a witness when the profile is not
    an equilibrium.
    """
    arr = _check_profile(profile, spec)
    if arr.ndim != 2:
        raise DomainError("equilibrium checks need a pure profile")
    per_user = spec.num_actions ** spec.horizon
    if per_user > budget:
        raise BudgetExceededError(
            f"{per_user} deviations per user exceeds budget {budget}"
        )
    base = _pure_rewards(arr, spec)
    trial = arr.copy()
    for user in range(spec.num_users):
        original = arr[user].copy()
        for dev in itertools.product(range(spec.num_actions), repeat=spec.horizon):
            if np.array_equal(dev, original):
                continue
            trial[user] = dev
            reward = _pure_rewards(trial, spec)[user]
            if reward > base[user] + IMPROVEMENT_TOL:
                return NashResult(False, DeviationWitness(user, dev, reward, float(base[user])))
        trial[user] = original
    return NashResult(True)


def is_spe_openloop(profile, spec: GameSpec, budget: int = DEFAULT_BUDGET) -> SpeResult:
    """Equilibrium of every continuation game.

    Open-loop profiles induce history-independent continuations, so the check
    runs :func:`is_nash` on each suffix with utilities recomputed over the
    truncated horizon.
    """
    arr = _check_profile(profile, spec)
    if arr.ndim != 2:
        raise DomainError("equilibrium checks need a pure profile")
    for start in range(spec.horizon):
        res = is_nash(arr[:, start:], spec.truncated(start), budget)
        if not res.is_nash:
            return SpeResult(False, failing_start=start, witness=res.witness)
    return SpeResult(True)


def _iter_all_profiles(spec: GameSpec, budget: int, chunk: int = 65536):
    """All pure profiles in lexicographic order, chunked as (C, N, T) arrays."""
    cells = spec.num_users * spec.horizon
    total = spec.num_actions ** cells
    if total > budget:
        raise BudgetExceededError(
            f"{spec.num_actions}^{cells} profiles exceeds budget {budget}"
        )
    base = spec.num_actions
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        digits = np.empty((idx.size, cells), dtype=np.int64)
        rem = idx.copy()
        for d in range(cells - 1, -1, -1):
            digits[:, d] = rem % base
            rem //= base
        yield digits.reshape(idx.size, spec.num_users, spec.horizon)


def _batch_rewards(profiles: np.ndarray, spec: GameSpec) -> np.ndarray:
    """Rewards for a (C, N, T) stack of pure profiles, vectorized over C."""
    c, n, horizon = profiles.shape
    discounts = spec.gamma ** np.arange(horizon)
    competitive = spec.reward.kind == COMPETITIVE
    rewards = np.zeros((c, n))
    counts = np.zeros((c, n))
    for t in range(horizon):
        actions = profiles[:, :, t]
        success = np.zeros((c, n), dtype=bool)
        for k in range(1, spec.num_channels + 1):
            on_k = actions == k
            success |= on_k & (on_k.sum(axis=1) == 1)[:, None]
        if competitive:
            rewards += discounts[t] * success
        else:
            counts += success
    if not competitive:
        utilities = alpha_fair_utility(counts, spec.reward.alpha, spec.reward.log_floor)
        rewards[:] = discounts[-1] * utilities.sum(axis=1, keepdims=True)
    return rewards


def is_pareto(profile, spec: GameSpec, budget: int = DEFAULT_BUDGET) -> ParetoResult:
    """Dominance check of one pure profile against every pure profile."""
    arr = _check_profile(profile, spec)
    if arr.ndim != 2:
        raise DomainError("Pareto checks need a pure profile")
    base = _pure_rewards(arr, spec)
    for chunk in _iter_all_profiles(spec, budget):
        rewards = _batch_rewards(chunk, spec)
        at_least = np.all(rewards >= base[None, :] - IMPROVEMENT_TOL, axis=1)
        better = np.any(rewards > base[None, :] + IMPROVEMENT_TOL, axis=1)
        dominating = np.flatnonzero(at_least & better)
        if dominating.size:
            return ParetoResult(False, dominator=chunk[dominating[0]].copy())
    return ParetoResult(True)


def pareto_front(spec: GameSpec, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """All nondominated reward vectors over pure profiles, deduplicated.

    Returns an array of shape (F, N) sorted lexicographically.
    """
    unique: set[tuple] = set()
    for chunk in _iter_all_profiles(spec, budget):
        rewards = _batch_rewards(chunk, spec)
        unique.update(map(tuple, np.round(rewards, 9)))
    vectors = np.array(sorted(unique))
    keep = []
    for i in range(vectors.shape[0]):
        v = vectors[i]
        at_least = np.all(vectors >= v[None, :] - IMPROVEMENT_TOL, axis=1)
        better = np.any(vectors > v[None, :] + IMPROVEMENT_TOL, axis=1)
        if not np.any(at_least & better):
            keep.append(i)
    return vectors[keep]


@dataclass(frozen=True)
class AlphaFairOptimum:
    """Solution of the fairness-constrained allocation problem:
    maximize gamma^(T-1) * sum_n f(x_n) subject to sum_n x_n <= K*T, x >= 0."""

    counts: np.ndarray
    value: float
    integral: bool       # equal split K*T/N is a whole number of slots
    degenerate: bool     # alpha = 0: any partition of K*T is optimal
    lagrange_multiplier: float


def alpha_fair_optimum(num_users: int, num_channels: int, horizon: int,
                       alpha: float, gamma: float = 1.0) -> AlphaFairOptimum:
    """Closed-form optimum of the terminal fairness objective.

    For alpha > 0 the unique solution is the equal split x_n = K*T/N; for
    alpha = 0 the total K*T can be partitioned arbitrarily and the equal
    split is returned as a representative.
    """
    if num_users < 1 or num_channels < 1 or horizon < 1:
        raise DomainError("num_users, num_channels, horizon must be >= 1")
    if alpha < 0:
        raise DomainError("alpha must be >= 0")
    share = num_channels * horizon / num_users
    counts = np.full(num_users, share)
    # Exact utility (no singularity floor needed: share > 0).
    tiny = np.finfo(float).tiny
    value = gamma ** (horizon - 1) * float(np.sum(alpha_fair_utility(counts, alpha, tiny)))
    return AlphaFairOptimum(
        counts=counts,
        value=value,
        integral=(num_channels * horizon) % num_users == 0,
        degenerate=alpha == 0.0,
        lagrange_multiplier=share ** (-alpha),
    )


def competitive_spe_reward_comparison(num_users: int, num_channels: int, eps: float) -> tuple[float, float]:
    """Large-N per-slot per-user rewards: persistent-equilibrium play vs
    uniform random access.

    Persistent play (everyone glued to a channel, transmitting with
    probability 1-eps) pays (1-eps) * eps^(N/K - 1), vanishing exponentially
    in N; random access at attempt probability K/N pays K*e^-1/N.
    """
    if num_channels < 1 or num_users < num_channels:
        raise DomainError("need N >= K >= 1")
    if not 0.0 < eps < 1.0:
        raise DomainError("eps must lie in (0, 1)")
    spe = (1.0 - eps) * eps ** (num_users / num_channels - 1.0)
    random_access = num_channels * math.exp(-1.0) / num_users
    return spe, random_access


def theorem_profile(name: str, spec: GameSpec) -> np.ndarray:
    """Named equilibrium/efficiency profile templates on a given game.

    thm1.1: N <= K, user n parked on channel n+1 (orthogonal, always on).
    thm1.2: N > K, persistent assignment covering every channel.
    thm2 / thm3.1: per-slot rotation with every channel occupied by exactly
    one user (collision-free full utilization).
    thm3.2: the same rotation when K*T/N is integral, so counts equalize.
    """
    n, k, horizon = spec.num_users, spec.num_channels, spec.horizon
    profile = np.zeros((n, horizon), dtype=np.int64)
    if name == "thm1.1":
        if n > k:
            raise ConfigError("thm1.1 requires N <= K")
        for user in range(n):
            profile[user, :] = user + 1
    elif name == "thm1.2":
        if n <= k:
            raise ConfigError("thm1.2 requires N > K")
        for user in range(n):
            profile[user, :] = (user % k) + 1
    elif name in ("thm2", "thm3.1", "thm3.2"):
        if name == "thm2" and n <= k:
            raise ConfigError("thm2 requires N > K")
        if n < k:
            raise ConfigError("rotation profiles require N >= K")
        if name == "thm3.2" and (k * horizon) % n != 0:
            raise ConfigError("thm3.2 requires K*T/N to be a whole number")
        for t in range(horizon):
            for channel in range(k):
                profile[(t * k + channel) % n, t] = channel + 1
    else:
        raise ConfigError(f"unknown template {name!r}; choose from {THEOREM_TEMPLATES}")
    return profile
