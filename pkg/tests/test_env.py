"""Environment: collision rule, cliques, determinism, error handling."""

import numpy as np
import pytest

from dqmac.env import EnvConfig, RandomAccessEnv, local_observation, resolve_slot
from dqmac.errors import ConfigError, DomainError, HorizonExceededError


def test_reset_gives_fresh_state():
    env = RandomAccessEnv(EnvConfig(num_users=2, num_channels=1, horizon=5))
    state = env.reset()
    assert state.current_slot == 0
    assert state.success_counts.tolist() == [0, 0]
    assert state.outcome_log == []


def test_invalid_configs_rejected():
    with pytest.raises(ConfigError):
        EnvConfig(num_users=0, num_channels=1, horizon=5)
    with pytest.raises(ConfigError):
        EnvConfig(num_users=2, num_channels=0, horizon=5)
    with pytest.raises(ConfigError):
        EnvConfig(num_users=2, num_channels=1, horizon=0)
    with pytest.raises(ConfigError):
        EnvConfig(num_users=2, num_channels=2, horizon=5, capacities=(1.0,))
    with pytest.raises(ConfigError):
        EnvConfig(num_users=2, num_channels=1, horizon=5, capacities=(0.0,))
    with pytest.raises(ConfigError):
        EnvConfig(num_users=3, num_channels=1, horizon=5, cliques=((0, 1), (1, 2)))


def test_two_users_on_distinct_channels_both_succeed():
    env = RandomAccessEnv(EnvConfig(num_users=2, num_channels=2, horizon=3))
    out = env.step([1, 2])
    assert out.success.tolist() == [True, True]
    assert out.ack.tolist() == [1, 1]


def test_collision_on_shared_channel():
    env = RandomAccessEnv(EnvConfig(num_users=2, num_channels=2, horizon=3))
    out = env.step([1, 1])
    assert out.success.tolist() == [False, False]
    assert out.ack.tolist() == [0, 0]


def test_idle_slot():
    env = RandomAccessEnv(EnvConfig(num_users=2, num_channels=2, horizon=3))
    out = env.step([0, 0])
    assert out.success.tolist() == [False, False]
    assert out.ack.tolist() == [0, 0]


def test_disconnected_cliques_do_not_interfere():
    cfg = EnvConfig(num_users=4, num_channels=1, horizon=3, cliques=((0, 1), (2, 3)))
    env = RandomAccessEnv(cfg)
    out = env.step([1, 0, 1, 0])
    assert out.success.tolist() == [True, False, True, False]


def test_within_clique_collisions_still_apply():
    cfg = EnvConfig(num_users=4, num_channels=1, horizon=3, cliques=((0, 1), (2, 3)))
    env = RandomAccessEnv(cfg)
    out = env.step([1, 1, 1, 0])
    assert out.success.tolist() == [False, False, True, False]


def test_local_observation_matches_ack():
    env = RandomAccessEnv(EnvConfig(num_users=3, num_channels=2, horizon=2))
    out = env.step([1, 1, 2])
    assert local_observation(out, 0) == 0  # collided transmitter
    assert local_observation(out, 2) == 1  # lone transmitter
    out2 = env.step([0, 1, 2])
    assert local_observation(out2, 0) == 0  # silent user
    with pytest.raises(DomainError):
        local_observation(out, 5)


def test_step_past_horizon_raises():
    env = RandomAccessEnv(EnvConfig(num_users=1, num_channels=1, horizon=1))
    env.step([1])
    with pytest.raises(HorizonExceededError):
        env.step([1])


def test_action_out_of_range_raises():
    env = RandomAccessEnv(EnvConfig(num_users=2, num_channels=2, horizon=2))
    with pytest.raises(DomainError):
        env.step([3, 0])
    with pytest.raises(DomainError):
        env.step([-1, 0])
    with pytest.raises(DomainError):
        env.step([1])


def test_counts_and_log_accumulate():
    env = RandomAccessEnv(EnvConfig(num_users=2, num_channels=1, horizon=4))
    for actions in ([1, 0], [1, 1], [0, 1], [0, 0]):
        env.step(actions)
    assert env.state.current_slot == 4
    assert env.state.success_counts.tolist() == [1, 1]
    assert len(env.state.outcome_log) == 4


def test_identical_action_sequences_reproduce_outcomes():
    cfg = EnvConfig(num_users=3, num_channels=2, horizon=20, seed=7)
    rng = np.random.default_rng(0)
    actions = rng.integers(0, 3, size=(20, 3))
    logs = []
    for _ in range(2):
        env = RandomAccessEnv(cfg)
        logs.append([env.step(a).success.tolist() for a in actions])
    assert logs[0] == logs[1]


def test_per_clique_successes_bounded_by_channels():
    rng = np.random.default_rng(3)
    cfg = EnvConfig(num_users=6, num_channels=2, horizon=50, cliques=((0, 1, 2), (3, 4, 5)))
    env = RandomAccessEnv(cfg)
    for _ in range(50):
        out = env.step(rng.integers(0, 3, size=6))
        for members in cfg.cliques:
            assert out.success[list(members)].sum() <= cfg.num_channels


def test_never_transmitting_user_has_zero_count():
    rng = np.random.default_rng(5)
    env = RandomAccessEnv(EnvConfig(num_users=3, num_channels=1, horizon=30))
    for _ in range(30):
        actions = rng.integers(0, 2, size=3)
        actions[1] = 0
        env.step(actions)
    assert env.state.success_counts[1] == 0


def test_resolve_slot_handles_global_clique_offsets():
    # Two independent instances resolved in one call must match separate calls.
    actions = np.array([1, 1, 0, 1])
    cliques = np.array([0, 0, 1, 1])
    merged = resolve_slot(actions, cliques, 1)
    first = resolve_slot(actions[:2], np.zeros(2, dtype=np.int64), 1)
    second = resolve_slot(actions[2:], np.zeros(2, dtype=np.int64), 1)
    assert merged.tolist() == first.tolist() + second.tolist()
