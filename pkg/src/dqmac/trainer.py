"""Centralized training loop.

Each iteration collects a fresh mini-batch of M episodes played by N users
who all share the *same* network (one protocol for everyone), builds
double-Q targets for every (user, slot), fits the acting network by
backpropagation through time over whole episodes, and copies the acting
network into the target network every ``target_sync_period`` iterations.
Episodes never outlive the iteration that collected them: there is no
replay buffer, by design.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .agent import PolicyParams, encode_inputs, policy_distribution, sample_actions
from .env import EnvConfig, resolve_slot
from .errors import ConfigError
from .metrics import channel_usage_counts
from .rewards import RewardSpec, accumulated_reward, reward_trace, training_reward_trace
from .seeding import TAG_INIT, TAG_TRAIN_EPISODE, substream


@dataclass(frozen=True)
class TrainConfig:
    env: EnvConfig
    reward: RewardSpec
    iterations: int = 3000
    episodes_per_iteration: int = 32
    target_sync_period: int = 5
    learning_rate: float = 3e-3
    # Optional linear learning-rate decay endpoint (None = constant rate).
    learning_rate_end: float | None = None
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip: float = 1.0
    input_layer_width: int = 32
    hidden_width: int = 64
    alpha_explore_init: float = 0.05
    alpha_explore_decay: float = 0.995
    alpha_explore_floor: float = 0.005
    beta_start: float = 1.0
    beta_end: float = 20.0
    # When set, each episode is a single clique whose size is drawn uniformly
    # from this inclusive range (topology uncertainty during training).
    clique_size_range: tuple[int, int] | None = None
    # Write an intermediate checkpoint every this many iterations (0 = none).
    checkpoint_every: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.episodes_per_iteration < 1:
            raise ConfigError("episodes_per_iteration must be >= 1")
        if self.target_sync_period < 1:
            raise ConfigError("target_sync_period must be >= 1")
        if self.clique_size_range is not None:
            lo, hi = self.clique_size_range
            if not 1 <= lo <= hi:
                raise ConfigError("clique_size_range must satisfy 1 <= lo <= hi")

    def policy_at(self, iteration: int) -> PolicyParams:
        """Exploration schedule: decaying mixture weight, rising temperature."""
        alpha = max(
            self.alpha_explore_floor,
            self.alpha_explore_init * self.alpha_explore_decay ** iteration,
        )
        span = max(1, self.iterations - 1)
        frac = min(1.0, iteration / span)
        beta = self.beta_start + (self.beta_end - self.beta_start) * frac
        return PolicyParams(alpha_explore=alpha, beta=beta)

    def learning_rate_at(self, iteration: int) -> float:
        if self.learning_rate_end is None:
            return self.learning_rate
        span = max(1, self.iterations - 1)
        frac = min(1.0, iteration / span)
        return self.learning_rate + (self.learning_rate_end - self.learning_rate) * frac


@dataclass
class EpisodeTrace:
    """Everything one training episode produced, per user per slot.

    ``rewards[t]`` is the reward received after the action of slot ``t``
    (already scaled for target construction; raw values are recomputed from
    ``success`` when reporting).
    """

    inputs: np.ndarray      # (T, N, 2K+2)
    qvalues: np.ndarray     # (T, N, K+1), acting network's outputs
    actions: np.ndarray     # (T, N)
    acks: np.ndarray        # (T, N)
    success: np.ndarray     # (T, N) bool
    rewards: np.ndarray     # (T, N)
    clique_ids: np.ndarray  # (N,)

    @property
    def success_counts(self) -> np.ndarray:
        return self.success.sum(axis=0)


@dataclass
class TargetBatch:
    """Per (user, slot) target Q-vectors plus the mask of trained entries."""

    targets: np.ndarray  # same shape as trace.qvalues
    mask: np.ndarray     # bool, one entry set per (slot, user)


@dataclass
class TrainerState:
    dqn1: nn.NetworkParams
    dqn2: nn.NetworkParams
    optimizer: nn.AdamState
    iteration: int = 0


@dataclass
class TrainResult:
    params: nn.NetworkParams
    curve: list[dict] = field(default_factory=list)


def episode_env_config(config: TrainConfig, rng: np.random.Generator) -> EnvConfig:
    """Environment instance for one episode.

    With ``clique_size_range`` set, the first draw of the episode stream picks
    the clique size; otherwise the template environment is used as is.
    """
    if config.clique_size_range is None:
        return config.env
    lo, hi = config.clique_size_range
    n = int(rng.integers(lo, hi + 1))
    return replace(config.env, num_users=n, cliques=None)


def collect_episodes(
    params: nn.NetworkParams,
    env_cfgs: list[EnvConfig],
    policy: PolicyParams,
    reward_spec: RewardSpec,
    rngs: list[np.random.Generator],
) -> list[EpisodeTrace]:
    """Roll the given episodes in lockstep under one frozen network.

    All users of all episodes advance slot by slot as one batch; each episode
    consumes only its own RNG stream (one uniform per user per slot), so the
    result is a deterministic function of (params, configs, policy, streams)
    no matter how episodes are grouped into calls.
    """
    if not env_cfgs:
        return []
    horizon = env_cfgs[0].horizon
    n_channels = env_cfgs[0].num_channels
    caps = env_cfgs[0].capacity_vector
    for cfg in env_cfgs:
        if cfg.horizon != horizon or cfg.num_channels != n_channels:
            raise ConfigError("episodes in one batch must share horizon and channel count")
        if not np.array_equal(cfg.capacity_vector, caps):
            raise ConfigError("episodes in one batch must share capacities")
    if n_channels != params.num_channels:
        raise ConfigError(
            f"network built for {params.num_channels} channels, environment has {n_channels}"
        )

    sizes = [cfg.num_users for cfg in env_cfgs]
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    slices = [slice(bounds[e], bounds[e + 1]) for e in range(len(env_cfgs))]
    batch = int(bounds[-1])

    # Globally distinct clique ids keep episodes from interfering.
    clique_flat = np.empty(batch, dtype=np.int64)
    offset = 0
    local_cliques = []
    for e, cfg in enumerate(env_cfgs):
        ids = cfg.clique_ids()
        local_cliques.append(ids)
        clique_flat[slices[e]] = ids + offset
        offset += cfg.num_cliques

    inputs = np.zeros((horizon, batch, 2 * n_channels + 2))
    qvalues = np.empty((horizon, batch, n_channels + 1))
    actions = np.empty((horizon, batch), dtype=np.int64)
    acks = np.empty((horizon, batch), dtype=np.int8)
    success = np.empty((horizon, batch), dtype=bool)

    last_actions = np.zeros(batch, dtype=np.int64)
    last_acks = np.zeros(batch, dtype=np.int8)
    state = nn.initial_lstm_state(params, batch)
    uniforms = np.empty(batch)
    for t in range(horizon):
        encode_inputs(last_actions, last_acks, caps, out=inputs[t])
        q, state = nn.forward(params, inputs[t], state)
        qvalues[t] = q
        probs = policy_distribution(q, policy)
        for e, sl in enumerate(slices):
            uniforms[sl] = rngs[e].random(sizes[e])
        a = sample_actions(probs, uniforms)
        ok = resolve_slot(a, clique_flat, n_channels)
        actions[t] = a
        success[t] = ok
        acks[t] = ok.astype(np.int8)
        last_actions = a
        last_acks = acks[t]

    traces = []
    for e, sl in enumerate(slices):
        traces.append(EpisodeTrace(
            inputs=inputs[:, sl].copy(),
            qvalues=qvalues[:, sl].copy(),
            actions=actions[:, sl].copy(),
            acks=acks[:, sl].copy(),
            success=success[:, sl].copy(),
            rewards=training_reward_trace(success[:, sl], reward_spec),
            clique_ids=local_cliques[e],
        ))
    return traces


def collect_episode(
    env_config: EnvConfig,
    params: nn.NetworkParams,
    policy: PolicyParams,
    reward_spec: RewardSpec,
    rng: np.random.Generator,
) -> EpisodeTrace:
    """Roll one episode: all users act through the same frozen network."""
    return collect_episodes(params, [env_config], policy, reward_spec, [rng])[0]


def merge_traces(traces: list[EpisodeTrace]) -> EpisodeTrace:
    """Concatenate traces along the user axis for one joint gradient pass.

    Users of different episodes never interacted, so their sequences are
    independent rows of the batch.
    """
    offset = 0
    cliques = []
    for tr in traces:
        cliques.append(tr.clique_ids + offset)
        offset += int(tr.clique_ids.max()) + 1
    return EpisodeTrace(
        inputs=np.concatenate([t.inputs for t in traces], axis=1),
        qvalues=np.concatenate([t.qvalues for t in traces], axis=1),
        actions=np.concatenate([t.actions for t in traces], axis=1),
        acks=np.concatenate([t.acks for t in traces], axis=1),
        success=np.concatenate([t.success for t in traces], axis=1),
        rewards=np.concatenate([t.rewards for t in traces], axis=1),
        clique_ids=np.concatenate(cliques),
    )


def double_q_target(reward: float, q1_next: np.ndarray, q2_next: np.ndarray,
                    gamma: float, terminal: bool) -> float:
    """Target for one (user, slot): r + gamma * Q2(argmax Q1), no bootstrap
    past the horizon.  With Q1 = Q2 this reduces to the single-network target
    r + gamma * max Q1."""
    if terminal:
        return float(reward)
    sel = int(np.argmax(q1_next))
    return float(reward) + gamma * float(np.asarray(q2_next)[sel])


def build_targets(trace: EpisodeTrace, dqn1: nn.NetworkParams, dqn2: nn.NetworkParams,
                  gamma: float, reuse_collected_q: bool = False) -> TargetBatch:
    """Double-Q target vectors for every (user, slot) of a trace.

    Both networks are evaluated over each user's full input sequence so their
    recurrent states are the correct ones for that network's own weights (the
    target network's state differs from the acting network's).  The acting
    network is frozen during collection, so its replay is exactly the Q
    stream already recorded in the trace; ``reuse_collected_q`` skips that
    redundant pass.  The target vector copies the acting network's output and
    replaces only the taken-action entry.
    """
    if reuse_collected_q:
        q1 = trace.qvalues
    else:
        q1 = nn.forward_sequence(dqn1, trace.inputs)
    q2 = nn.forward_sequence(dqn2, trace.inputs)
    targets = q1.copy()
    replaced = trace.rewards.copy()
    if trace.inputs.shape[0] > 1:
        sel = np.argmax(q1[1:], axis=-1)
        bootstrap = np.take_along_axis(q2[1:], sel[..., None], axis=-1)[..., 0]
        replaced[:-1] += gamma * bootstrap
    np.put_along_axis(targets, trace.actions[..., None], replaced[..., None], axis=-1)
    mask = np.zeros(targets.shape, dtype=bool)
    np.put_along_axis(mask, trace.actions[..., None], True, axis=-1)
    return TargetBatch(targets=targets, mask=mask)


def init_trainer(config: TrainConfig) -> TrainerState:
    rng = substream(config.seed, TAG_INIT)
    dqn1 = nn.init_params(
        config.env.num_channels, config.input_layer_width, config.hidden_width, rng
    )
    dqn2 = nn.clone_params(dqn1)
    opt = nn.AdamState.for_params(
        dqn1, learning_rate=config.learning_rate,
        beta1=config.adam_beta1, beta2=config.adam_beta2, eps=config.adam_eps,
    )
    return TrainerState(dqn1=dqn1, dqn2=dqn2, optimizer=opt)


def train_iteration(state: TrainerState, config: TrainConfig) -> dict:
    """One outer-loop pass: collect M fresh episodes, fit, maybe sync.

    Episodes are discarded when the call returns; nothing is replayed.
    """
    i = state.iteration
    policy = config.policy_at(i)
    rngs = [
        substream(config.seed, TAG_TRAIN_EPISODE, i, e)
        for e in range(config.episodes_per_iteration)
    ]
    env_cfgs = [episode_env_config(config, rng) for rng in rngs]
    traces = collect_episodes(state.dqn1, env_cfgs, policy, config.reward, rngs)
    merged = merge_traces(traces)

    batch = build_targets(merged, state.dqn1, state.dqn2, config.reward.gamma,
                          reuse_collected_q=True)
    loss_sum, grads = nn.backward_bptt(state.dqn1, merged.inputs, batch.targets, batch.mask)
    n_entries = int(batch.mask.sum())
    for g in grads.values():
        g /= n_entries
    nn.clip_global_norm(grads, config.grad_clip)
    state.optimizer.learning_rate = config.learning_rate_at(i)
    nn.adam_step(state.dqn1, grads, state.optimizer)

    state.iteration += 1
    if state.iteration % config.target_sync_period == 0:
        nn.copy_into(state.dqn2, state.dqn1)

    # Reporting uses raw (unscaled) rewards.
    returns = []
    usage = {"success": 0, "collision": 0, "idle": 0, "total": 0}
    for tr in traces:
        raw = reward_trace(tr.success, config.reward)
        returns.extend(
            accumulated_reward(raw[:, n], config.reward.gamma)
            for n in range(raw.shape[1])
        )
        counts = channel_usage_counts(tr.actions, tr.clique_ids, config.env.num_channels)
        for key in usage:
            usage[key] += counts[key]
    return {
        "iteration": state.iteration,
        "mean_reward": float(np.mean(returns)),
        "throughput": usage["success"] / usage["total"],
        "idle_frac": usage["idle"] / usage["total"],
        "collision_frac": usage["collision"] / usage["total"],
        "loss": loss_sum / n_entries,
        "alpha_explore": policy.alpha_explore,
        "beta": policy.beta,
    }


def train(config: TrainConfig, progress=None, checkpoint_dir=None) -> TrainResult:
    """Run the configured number of iterations from a fresh network.

    ``progress``, if given, is called with each iteration's metrics row.
    With ``checkpoint_dir`` set and ``config.checkpoint_every`` > 0,
    intermediate checkpoints land there as checkpoint-NNNNNN.net.
    Returns the acting network and the training curve.
    """
    state = init_trainer(config)
    curve = []
    for _ in range(config.iterations):
        row = train_iteration(state, config)
        curve.append(row)
        if progress is not None:
            progress(row)
        if (checkpoint_dir is not None and config.checkpoint_every > 0
                and state.iteration % config.checkpoint_every == 0):
            from pathlib import Path

            path = Path(checkpoint_dir) / f"checkpoint-{state.iteration:06d}.net"
            nn.save_params(state.dqn1, path)
    return TrainResult(params=state.dqn1, curve=curve)
