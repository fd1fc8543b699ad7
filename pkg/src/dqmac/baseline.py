"""Slotted-Aloha reference policies and their closed-form throughput."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import EnvConfig, RandomAccessEnv
from .errors import ConfigError, DomainError
from .seeding import TAG_BASELINE, substream


@dataclass(frozen=True)
class AlohaPolicy:
    """Transmit with probability ``attempt_prob``; on transmit pick a channel.

    The benchmark scheme is single-channel; with ``num_channels`` > 1 the
    channel is drawn uniformly (reported separately from the benchmark).
    """

    attempt_prob: float
    num_channels: int = 1

    def __post_init__(self) -> None:
        if not 0.0 <= self.attempt_prob <= 1.0:
            raise ConfigError("attempt_prob must lie in [0, 1]")
        if self.num_channels < 1:
            raise ConfigError("num_channels must be >= 1")


def optimal_attempt_prob(n: int) -> float:
    """Throughput-optimal attempt probability 1/n for an n-user clique."""
    if n < 1:
        raise DomainError(f"clique size must be >= 1, got {n}")
    return 1.0 / n


def aloha_throughput_analytic(n: int, p: float) -> float:
    """Expected single-channel throughput of n users at attempt probability p:
    n * p * (1-p)^(n-1)."""
    if n < 1:
        raise DomainError(f"clique size must be >= 1, got {n}")
    if not 0.0 <= p <= 1.0:
        raise DomainError("attempt probability must lie in [0, 1]")
    return n * p * (1.0 - p) ** (n - 1)


def aloha_act(policy: AlohaPolicy, rng: np.random.Generator) -> int:
    """One action draw: 0 with probability 1-p, otherwise a channel."""
    if rng.random() >= policy.attempt_prob:
        return 0
    if policy.num_channels == 1:
        return 1
    return int(rng.integers(1, policy.num_channels + 1))


def aloha_actions(policy: AlohaPolicy, n_users: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized draw for a whole slot."""
    transmit = rng.random(n_users) < policy.attempt_prob
    if policy.num_channels == 1:
        return transmit.astype(np.int64)
    channels = rng.integers(1, policy.num_channels + 1, size=n_users)
    return np.where(transmit, channels, 0)


def simulate_aloha(n_users: int, policy: AlohaPolicy, slots: int, seed: int = 0) -> dict:
    """Simulate one clique of Aloha users; returns empirical usage fractions."""
    env = RandomAccessEnv(EnvConfig(
        num_users=n_users, num_channels=policy.num_channels, horizon=slots, seed=seed,
    ))
    rng = substream(seed, TAG_BASELINE)
    successes = 0
    transmissions = 0
    for _ in range(slots):
        actions = aloha_actions(policy, n_users, rng)
        outcome = env.step(actions)
        successes += int(outcome.success.sum())
        transmissions += int((actions > 0).sum())
    total_cells = slots * policy.num_channels
    return {
        "throughput": successes / total_cells,
        "attempt_rate": transmissions / (slots * n_users),
        "per_user_rate": successes / (slots * n_users),
        "slots": slots,
    }
