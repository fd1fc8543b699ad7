"""Per-user acting: history encoding, softmax exploration policy, sampling.

Each user feeds the shared Q-network a 2K+2 vector built purely from its own
last action and ACK: a one-hot of the previous action (index 0 = stayed
silent), the K channel capacities, and the ACK bit.  Actions are drawn from a
temperature softmax of the Q values mixed with a uniform exploration floor:

    Pr(a) = (1 - alpha_explore) * exp(beta*Q(a)) / sum_a' exp(beta*Q(a'))
            + alpha_explore / (K+1)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ConfigError, DomainError, NumericError


@dataclass(frozen=True)
class PolicyParams:
    """Exploration mixture weight and softmax temperature."""

    alpha_explore: float
    beta: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha_explore <= 1.0:
            raise ConfigError("alpha_explore must lie in [0, 1]")
        if self.beta < 0.0:
            raise ConfigError("beta must be >= 0")


# Defaults used when evaluating a trained network.
EVAL_POLICY = PolicyParams(alpha_explore=0.005, beta=20.0)


def encode_input(last_action: int, last_ack: int, capacities: np.ndarray) -> np.ndarray:
    """Build one 2K+2 observation vector.

    At the first slot of an episode there is no history; callers pass
    last_action = 0, last_ack = 0 (the all-quiet prior).
    """
    capacities = np.asarray(capacities, dtype=float)
    k = capacities.shape[0]
    if not 0 <= last_action <= k:
        raise DomainError(f"action {last_action} outside 0..{k}")
    if last_ack and last_action == 0:
        raise DomainError("ack=1 requires a prior transmission")
    x = np.zeros(2 * k + 2)
    x[last_action] = 1.0
    x[k + 1:2 * k + 1] = capacities
    x[2 * k + 1] = float(last_ack)
    return x


def encode_inputs(last_actions: np.ndarray, last_acks: np.ndarray,
                  capacities: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Vectorized :func:`encode_input` for a batch of users."""
    last_actions = np.asarray(last_actions, dtype=np.int64)
    n = last_actions.shape[0]
    k = np.asarray(capacities).shape[0]
    if out is None:
        out = np.zeros((n, 2 * k + 2))
    else:
        out[:] = 0.0
    out[np.arange(n), last_actions] = 1.0
    out[:, k + 1:2 * k + 1] = capacities
    out[:, 2 * k + 1] = np.asarray(last_acks, dtype=float)
    return out


def policy_distribution(q: np.ndarray, policy: PolicyParams) -> np.ndarray:
    """Action probabilities for Q values ``q`` (last axis = actions).

    Computed with max-shifted exponentials; rows sum to one and every entry
    is at least alpha_explore / (K+1).
    """
    q = np.asarray(q, dtype=float)
    if not np.all(np.isfinite(q)):
        raise NumericError("non-finite Q values")
    shifted = policy.beta * q
    shifted = shifted - shifted.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    soft = ex / ex.sum(axis=-1, keepdims=True)
    k1 = q.shape[-1]
    return (1.0 - policy.alpha_explore) * soft + policy.alpha_explore / k1


def sample_actions(probs: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling, one uniform per row of ``probs``."""
    cdf = np.cumsum(probs, axis=-1)
    if probs.ndim == 1:
        return int(np.searchsorted(cdf, uniforms * cdf[-1], side="right").clip(0, probs.shape[-1] - 1))
    u = np.asarray(uniforms)[:, None] * cdf[:, -1:]
    return np.minimum((cdf <= u).sum(axis=-1), probs.shape[-1] - 1)


class Agent:
    """One user's view of an episode: private LSTM state plus last (action, ack).

    The network parameters are shared and read-only; feeding the same history
    through :meth:`observe`/:meth:`act` reproduces the same state.
    """

    def __init__(self, user_id: int, params: nn.NetworkParams, capacities: np.ndarray):
        self.user_id = user_id
        self.params = params
        self.capacities = np.asarray(capacities, dtype=float)
        if self.capacities.shape[0] != params.num_channels:
            raise DomainError("capacity vector does not match the network's channel count")
        self.reset()

    def reset(self) -> None:
        self.lstm = nn.initial_lstm_state(self.params)
        self.last_action = 0
        self.last_ack = 0

    def act(self, policy: PolicyParams, rng: np.random.Generator) -> tuple[int, np.ndarray]:
        """Encode history, advance the LSTM, sample an action.

        Returns (action, Q vector); the Q vector is kept because training
        builds its targets from it.
        """
        x = encode_input(self.last_action, self.last_ack, self.capacities)
        q, self.lstm = nn.forward(self.params, x, self.lstm)
        probs = policy_distribution(q, policy)
        action = sample_actions(probs, float(rng.random()))
        return action, q

    def observe(self, action_taken: int, ack: int) -> None:
        """Record the slot's (action, ACK) pair for the next encoding."""
        if ack and action_taken == 0:
            raise DomainError("ack=1 requires a transmission")
        self.last_action = int(action_taken)
        self.last_ack = int(ack)
