"""Channel-usage accounting and allocation-pattern classification.

A (clique, channel, slot) cell is *idle* if nobody attempted it, a *success*
if exactly one user did, and a *collision* otherwise; the three fractions sum
to one.  Channel throughput is the success fraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rewards import jain_index

ORTHOGONAL_FIXED = "orthogonal-fixed"
TDMA_SHARE = "tdma-share"
EQUAL_SHARE = "equal-share"
UNCONVERGED = "unconverged"

# Exploration noise in the evaluation policy makes a literally collision-free
# window a coin flip, so "collision-free" patterns tolerate this much.
COLLISION_TOLERANCE = 0.02
OWNER_OCCUPANCY = 0.95
TDMA_BAND = (0.40, 0.60)
EQUAL_SHARE_REL_TOL = 0.15
EQUAL_SHARE_MIN_THROUGHPUT = 0.5


def channel_usage_counts(actions: np.ndarray, clique_ids: np.ndarray, num_channels: int) -> dict[str, int]:
    """Idle/success/collision cell counts over a (T, N) action matrix."""
    actions = np.asarray(actions, dtype=np.int64)
    clique_ids = np.asarray(clique_ids, dtype=np.int64)
    horizon = actions.shape[0]
    n_cliques = int(clique_ids.max()) + 1
    k1 = num_channels + 1
    slot_offsets = np.arange(horizon)[:, None] * (n_cliques * k1)
    key = slot_offsets + clique_ids[None, :] * k1 + actions
    counts = np.bincount(key.ravel(), minlength=horizon * n_cliques * k1)
    attempts = counts.reshape(horizon, n_cliques, k1)[:, :, 1:]
    total = horizon * n_cliques * num_channels
    success = int((attempts == 1).sum())
    collision = int((attempts >= 2).sum())
    return {
        "success": success,
        "collision": collision,
        "idle": total - success - collision,
        "total": total,
    }


def channel_fractions(actions: np.ndarray, clique_ids: np.ndarray, num_channels: int) -> dict[str, float]:
    counts = channel_usage_counts(actions, clique_ids, num_channels)
    total = counts["total"]
    return {
        "throughput": counts["success"] / total,
        "idle_frac": counts["idle"] / total,
        "collision_frac": counts["collision"] / total,
    }


def per_user_rates(success: np.ndarray, window: int | None = None) -> np.ndarray:
    """Fraction of (windowed) slots each user delivered a packet in."""
    success = np.asarray(success, dtype=float)
    if window is not None:
        success = success[-window:]
    return success.mean(axis=0)


def classify_allocation(actions: np.ndarray, success: np.ndarray, num_channels: int) -> str:
    """Label the access pattern of a single-clique occupancy window.

    orthogonal-fixed: every channel has a near-permanent owner and the window
    is collision-free.  equal-share: delivered rates split (near-)evenly among
    users at useful aggregate throughput.  tdma-share: every channel is either
    owned or time-shared roughly 50/50 by two users, collision-free, with at
    least one shared channel.  Anything else: unconverged.
    """
    actions = np.asarray(actions, dtype=np.int64)
    success = np.asarray(success, dtype=float)
    window, n_users = actions.shape
    if window < 50:
        raise ValueError("classification window must span at least 50 slots")

    clique_ids = np.zeros(n_users, dtype=np.int64)
    frac = channel_fractions(actions, clique_ids, num_channels)
    collision_ok = frac["collision_frac"] <= COLLISION_TOLERANCE

    # occupancy[n, k]: share of window slots user n spent transmitting on k+1.
    occupancy = np.stack(
        [(actions == k).mean(axis=0) for k in range(1, num_channels + 1)], axis=1
    )
    owners = occupancy.max(axis=0) >= OWNER_OCCUPANCY  # per channel
    if collision_ok and bool(owners.all()):
        return ORTHOGONAL_FIXED

    rates = per_user_rates(success)
    fair = rates.sum() / n_users
    if (
        fair > 0
        and np.all(np.abs(rates - fair) <= EQUAL_SHARE_REL_TOL * fair)
        and frac["throughput"] >= EQUAL_SHARE_MIN_THROUGHPUT
    ):
        return EQUAL_SHARE

    if collision_ok:
        shared = 0
        ok = True
        lo, hi = TDMA_BAND
        for k in range(num_channels):
            col = occupancy[:, k]
            if col.max() >= OWNER_OCCUPANCY:
                continue
            top2 = np.sort(col)[-2:]
            if np.all((top2 >= lo) & (top2 <= hi)) and top2.sum() >= 0.9:
                shared += 1
            else:
                ok = False
        if ok and shared >= 1:
            return TDMA_SHARE
    return UNCONVERGED


@dataclass
class Metrics:
    """Aggregate evaluation metrics over a set of episodes.

    ``throughput``/``idle_frac``/``collision_frac`` cover whole episodes;
    the ``window_*`` variants cover only each episode's final classification
    window, after the users have settled.
    """

    episodes: int
    throughput: float
    throughput_stderr: float
    idle_frac: float
    collision_frac: float
    window_throughput: float
    window_throughput_stderr: float
    window_idle_frac: float
    window_collision_frac: float
    rates: list[float]
    sum_rate: float
    log_sum_rate: float
    jain: float
    labels: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "throughput": self.throughput,
            "throughput_stderr": self.throughput_stderr,
            "idle_frac": self.idle_frac,
            "collision_frac": self.collision_frac,
            "window_throughput": self.window_throughput,
            "window_throughput_stderr": self.window_throughput_stderr,
            "window_idle_frac": self.window_idle_frac,
            "window_collision_frac": self.window_collision_frac,
            "rates": list(self.rates),
            "sum_rate": self.sum_rate,
            "log_sum_rate": self.log_sum_rate,
            "jain": self.jain,
            "labels": dict(self.labels),
        }


def mean_stderr(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return 0.0, 0.0
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(arr.size))


def jain(rates) -> float:
    return jain_index(rates)
