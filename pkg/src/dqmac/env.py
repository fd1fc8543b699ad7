"""Slot-synchronous simulator of a shared multichannel random-access medium.

N backlogged users pick one action per slot: stay silent (0) or transmit on
one of K orthogonal channels (1..K).  A transmission succeeds iff no other
user of the same clique picked the same channel that slot.  The only feedback
a user receives is its own binary ACK.  Users in different cliques never
interfere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, HorizonExceededError
from .seeding import substream


@dataclass(frozen=True)
class EnvConfig:
    """Static description of one network instance.

    ``cliques`` partitions user indices into non-interfering groups; the
    default is a single clique containing everyone.  ``capacities`` holds the
    per-channel conditional rate (all 1.0 in the standard experiments).
    """

    num_users: int
    num_channels: int
    horizon: int
    capacities: tuple[float, ...] | None = None
    cliques: tuple[tuple[int, ...], ...] | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_users < 1:
            raise ConfigError(f"num_users must be >= 1, got {self.num_users}")
        if self.num_channels < 1:
            raise ConfigError(f"num_channels must be >= 1, got {self.num_channels}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if self.capacities is not None:
            if len(self.capacities) != self.num_channels:
                raise ConfigError(
                    f"capacities has {len(self.capacities)} entries, expected {self.num_channels}"
                )
            if any(c <= 0 for c in self.capacities):
                raise ConfigError("capacities must be strictly positive")
        if self.cliques is not None:
            flat = sorted(u for clique in self.cliques for u in clique)
            if flat != list(range(self.num_users)):
                raise ConfigError("cliques must partition users 0..N-1 exactly")

    @property
    def capacity_vector(self) -> np.ndarray:
        if self.capacities is None:
            return np.ones(self.num_channels)
        return np.asarray(self.capacities, dtype=float)

    def clique_ids(self) -> np.ndarray:
        """Per-user clique index (all zeros for the default single clique)."""
        ids = np.zeros(self.num_users, dtype=np.int64)
        if self.cliques is not None:
            for c, members in enumerate(self.cliques):
                for u in members:
                    ids[u] = c
        return ids

    @property
    def num_cliques(self) -> int:
        return 1 if self.cliques is None else len(self.cliques)


@dataclass(frozen=True)
class SlotOutcome:
    """Result of one resolved slot: per-user success indicators and ACKs."""

    success: np.ndarray  # bool, shape (N,)
    ack: np.ndarray      # int8 in {0,1}, shape (N,)
    slot_index: int


@dataclass
class EnvState:
    current_slot: int
    success_counts: np.ndarray
    outcome_log: list[SlotOutcome] = field(default_factory=list)


def resolve_slot(actions: np.ndarray, clique_ids: np.ndarray, num_channels: int) -> np.ndarray:
    """Apply the collision rule to one slot of actions.

    A user succeeds iff it transmitted and it is the only transmitter on that
    channel within its clique.  Works on any batch of users, including users
    from several independent instances, as long as ``clique_ids`` are globally
    distinct per interference group.
    """
    actions = np.asarray(actions, dtype=np.int64)
    # Key (clique, channel) pairs so one bincount resolves every clique at once.
    key = clique_ids * (num_channels + 1) + actions
    counts = np.bincount(key, minlength=(int(clique_ids.max()) + 1) * (num_channels + 1))
    return (actions > 0) & (counts[key] == 1)


class RandomAccessEnv:
    """Mutable episode of the slotted random-access game.

    One instance is driven by a single logical thread; independent instances
    (different seeds/episodes) are safe to run in parallel.
    """

    def __init__(self, config: EnvConfig):
        self.config = config
        self._clique_ids = config.clique_ids()
        self.rng = substream(config.seed)
        self.state = EnvState(
            current_slot=0,
            success_counts=np.zeros(config.num_users, dtype=np.int64),
        )

    def reset(self) -> EnvState:
        self.rng = substream(self.config.seed)
        self.state = EnvState(
            current_slot=0,
            success_counts=np.zeros(self.config.num_users, dtype=np.int64),
        )
        return self.state

    def step(self, actions) -> SlotOutcome:
        cfg = self.config
        if self.state.current_slot >= cfg.horizon:
            raise HorizonExceededError(
                f"episode already ran its {cfg.horizon} slots"
            )
        actions = np.asarray(actions, dtype=np.int64)
        if actions.shape != (cfg.num_users,):
            raise DomainError(f"expected {cfg.num_users} actions, got shape {actions.shape}")
        if actions.min() < 0 or actions.max() > cfg.num_channels:
            raise DomainError(
                f"actions must lie in 0..{cfg.num_channels}, got range "
                f"[{actions.min()}, {actions.max()}]"
            )

        success = resolve_slot(actions, self._clique_ids, cfg.num_channels)
        outcome = SlotOutcome(
            success=success,
            ack=success.astype(np.int8),
            slot_index=self.state.current_slot,
        )
        self.state.success_counts += success
        self.state.current_slot += 1
        self.state.outcome_log.append(outcome)
        return outcome


def local_observation(outcome: SlotOutcome, n: int) -> int:
    """The binary ACK user ``n`` observes for the given slot."""
    if n < 0 or n >= outcome.ack.shape[0]:
        raise DomainError(f"user index {n} out of range")
    return int(outcome.ack[n])
