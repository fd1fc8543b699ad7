"""Reward functions over episode outcomes.

Two objectives are supported: a competitive per-slot reward (1 for each own
successful delivery) and a cooperative terminal reward in which every user is
credited the same system-wide fairness utility of the final per-user success
counts.  Rewards are credited one slot after the outcome they pay for; in the
arrays below index ``t`` holds the reward received after the action of slot
``t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import SlotOutcome
from .errors import ConfigError, DomainError

COMPETITIVE = "competitive"
ALPHA_FAIR = "alpha_fair"

DEFAULT_LOG_FLOOR = 1e-2


@dataclass(frozen=True)
class RewardSpec:
    """Choice of objective plus discounting.

    ``alpha`` is the fairness exponent (only meaningful for the cooperative
    objective: 0 = sum rate, 1 = sum log-rate).  ``log_floor`` guards the
    utility's singularity at zero successes so terminal rewards stay finite.
    """

    kind: str
    alpha: float = 0.0
    gamma: float = 1.0
    log_floor: float = DEFAULT_LOG_FLOOR

    def __post_init__(self) -> None:
        if self.kind not in (COMPETITIVE, ALPHA_FAIR):
            raise ConfigError(f"unknown reward kind {self.kind!r}")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        if self.log_floor <= 0:
            raise ConfigError("log_floor must be > 0")

    @staticmethod
    def competitive(gamma: float = 1.0) -> "RewardSpec":
        return RewardSpec(kind=COMPETITIVE, gamma=gamma)

    @staticmethod
    def alpha_fair(alpha: float, gamma: float = 1.0, log_floor: float = DEFAULT_LOG_FLOOR) -> "RewardSpec":
        return RewardSpec(kind=ALPHA_FAIR, alpha=alpha, gamma=gamma, log_floor=log_floor)


def competitive_reward(outcome: SlotOutcome, n: int) -> float:
    """Reward credited to user ``n`` for the slot: 1.0 on own success."""
    return 1.0 if outcome.success[n] else 0.0


def alpha_fair_utility(x, alpha: float, log_floor: float = DEFAULT_LOG_FLOOR):
    """Fairness utility f(x) = x^(1-alpha) / (1-alpha), with f(x) = ln(x) at alpha = 1.

    alpha = 0 reduces to f(x) = x (sum rate when summed over users).  For
    alpha >= 1 the utility diverges at x = 0, so x is floored at
    ``log_floor`` there; for alpha < 1 no floor is needed.
    Accepts scalars or arrays.
    """
    if alpha < 0:
        raise DomainError("alpha must be >= 0")
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise DomainError("utility argument must be nonnegative")
    if alpha == 0.0:
        out = arr.copy()
    elif alpha == 1.0:
        out = np.log(np.maximum(arr, log_floor))
    else:
        if alpha > 1.0:
            arr = np.maximum(arr, log_floor)
        out = arr ** (1.0 - alpha) / (1.0 - alpha)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def cooperative_terminal_reward(success_counts, alpha: float, log_floor: float = DEFAULT_LOG_FLOOR) -> float:
    """System-wide terminal reward: sum of per-user utilities of success counts.

    The same scalar is credited to every user at the end of the episode; all
    earlier cooperative rewards are zero.
    """
    counts = np.asarray(success_counts, dtype=float)
    if np.any(counts < 0):
        raise DomainError("success counts must be nonnegative")
    return float(np.sum(alpha_fair_utility(counts, alpha, log_floor)))


def accumulated_reward(rewards, gamma: float) -> float:
    """Discounted sum of a reward sequence: sum_i gamma^i * r[i]."""
    r = np.asarray(rewards, dtype=float)
    if r.size == 0:
        return 0.0
    return float(np.dot(gamma ** np.arange(r.shape[0]), r))


def reward_trace(success: np.ndarray, spec: RewardSpec) -> np.ndarray:
    """Per-user credited rewards for a (T, N) success matrix.

    Row ``t`` is the reward received after the action of slot ``t``.  Under
    the cooperative spec only the final row is nonzero and carries the shared
    terminal utility.
    """
    success = np.asarray(success)
    horizon, n_users = success.shape
    out = np.zeros((horizon, n_users))
    if spec.kind == COMPETITIVE:
        out[:] = success.astype(float)
    else:
        total = cooperative_terminal_reward(success.sum(axis=0), spec.alpha, spec.log_floor)
        out[-1, :] = total
    return out


def training_reward_trace(success: np.ndarray, spec: RewardSpec) -> np.ndarray:
    """Rewards as fed to TD targets.

    Cooperative terminal rewards are divided by the horizon T so that target
    magnitudes stay O(1) regardless of instance size while one success still
    moves the target by a resolvable 1/T; metrics always report the raw
    values from :func:`reward_trace`.
    """
    raw = reward_trace(success, spec)
    if spec.kind == ALPHA_FAIR:
        horizon = raw.shape[0]
        return raw / horizon
    return raw


def jain_index(rates) -> float:
    """Jain fairness index of a nonnegative allocation; 1.0 means exactly equal."""
    r = np.asarray(rates, dtype=float)
    denom = r.shape[0] * float(np.sum(r * r))
    if denom == 0.0:
        return 1.0
    return float(np.sum(r)) ** 2 / denom


def log_sum_rate(rates, log_floor: float = DEFAULT_LOG_FLOOR) -> float:
    """Sum of log rates (proportional-fairness objective) with floor guard."""
    r = np.maximum(np.asarray(rates, dtype=float), log_floor)
    return float(np.sum(np.log(r)))
