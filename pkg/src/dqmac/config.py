"""Experiment configuration: YAML schema, scenario presets, provenance hash.

A config file is a YAML document with sections ``env``, ``reward``,
``train``, ``policy``, ``eval`` plus a top-level ``seed`` (see
``configs/`` for one versioned example per scenario).  Every output file
embeds the sha256 of the resolved config so results can be traced back.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import yaml

from .env import EnvConfig
from .errors import ConfigError
from .rewards import RewardSpec
from .trainer import TrainConfig

SCHEMA_VERSION = 1

SCENARIOS = ("cliques", "sumrate-4x2", "competitive-3x2", "lograte-4x2")


@dataclass(frozen=True)
class EvalSettings:
    episodes: int = 20
    # Classification / rate window (slots); capped at the horizon.
    window: int = 100

    def __post_init__(self) -> None:
        if self.episodes < 1:
            raise ConfigError("eval episodes must be >= 1")
        if self.window < 50:
            raise ConfigError("evaluation window must span at least 50 slots")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    env: EnvConfig
    reward: RewardSpec
    train: dict = field(default_factory=dict)       # TrainConfig overrides
    eval_settings: EvalSettings = EvalSettings()
    eval_alpha_explore: float = 0.005
    eval_beta: float = 20.0
    seed: int = 0

    def train_config(self, seed: int | None = None) -> TrainConfig:
        overrides = dict(self.train)
        env = self.env
        # Training may run shorter episodes than evaluation: the learned
        # per-slot conventions transfer, and credit propagates faster.
        horizon = overrides.pop("horizon", None)
        if horizon is not None:
            env = replace(env, horizon=horizon)
        return TrainConfig(
            env=env,
            reward=self.reward,
            seed=self.seed if seed is None else seed,
            **overrides,
        )

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "scenario": self.name,
            "env": {k: v for k, v in asdict(self.env).items() if v is not None},
            "reward": asdict(self.reward),
            "train": dict(self.train),
            "policy": {
                "eval_alpha_explore": self.eval_alpha_explore,
                "eval_beta": self.eval_beta,
            },
            "eval": asdict(self.eval_settings),
            "seed": self.seed,
        }


def config_hash(config: ExperimentConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def _tupled(value):
    if isinstance(value, list):
        return tuple(_tupled(v) for v in value)
    return value


def from_dict(doc: dict, name: str = "custom") -> ExperimentConfig:
    if doc.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError(f"unsupported config schema {doc.get('schema')}")
    try:
        env_doc = {k: _tupled(v) for k, v in doc["env"].items()}
        env = EnvConfig(**env_doc)
        reward = RewardSpec(**doc["reward"])
    except KeyError as exc:
        raise ConfigError(f"config missing section {exc}") from exc
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    train = {k: _tupled(v) for k, v in doc.get("train", {}).items()}
    policy = doc.get("policy", {})
    train.update({k: policy[k] for k in (
        "alpha_explore_init", "alpha_explore_decay", "alpha_explore_floor",
        "beta_start", "beta_end",
    ) if k in policy})
    eval_doc = doc.get("eval", {})
    return ExperimentConfig(
        name=doc.get("scenario", name),
        env=env,
        reward=reward,
        train=train,
        eval_settings=EvalSettings(**eval_doc),
        eval_alpha_explore=policy.get("eval_alpha_explore", 0.005),
        eval_beta=policy.get("eval_beta", 20.0),
        seed=doc.get("seed", 0),
    )


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path} is not a mapping")
    return from_dict(doc, name=Path(path).stem)


# Scenario presets.  The published experiments specify the network shapes
# and objectives; horizons, batch sizes and training lengths are runtime
# choices sized for a desktop CPU and exposed here as ordinary config.
_COMMON_TRAIN = {
    "episodes_per_iteration": 32,
    "target_sync_period": 5,
    "learning_rate": 3e-3,
    "input_layer_width": 16,
    "hidden_width": 32,
}


def scenario_config(name: str, seed: int = 0) -> ExperimentConfig:
    if name == "cliques":
        # Single shared channel per clique, clique size redrawn every episode.
        return ExperimentConfig(
            name=name,
            env=EnvConfig(num_users=7, num_channels=1, horizon=50),
            reward=RewardSpec.competitive(),
            train={**_COMMON_TRAIN, "iterations": 3000, "clique_size_range": (3, 11)},
            seed=seed,
        )
    if name == "sumrate-4x2":
        return ExperimentConfig(
            name=name,
            env=EnvConfig(num_users=4, num_channels=2, horizon=50),
            reward=RewardSpec.alpha_fair(alpha=0.0),
            train={**_COMMON_TRAIN, "iterations": 1500},
            seed=seed,
        )
    if name == "competitive-3x2":
        return ExperimentConfig(
            name=name,
            env=EnvConfig(num_users=3, num_channels=2, horizon=50),
            reward=RewardSpec.competitive(),
            train={**_COMMON_TRAIN, "iterations": 1500},
            seed=seed,
        )
    if name == "lograte-4x2":
        return ExperimentConfig(
            name=name,
            env=EnvConfig(num_users=4, num_channels=2, horizon=50),
            reward=RewardSpec.alpha_fair(alpha=1.0),
            train={**_COMMON_TRAIN, "iterations": 2000},
            seed=seed,
        )
    raise ConfigError(f"unknown scenario {name!r}; choose from {SCENARIOS}")


def resolve_config(name_or_path: str, seed: int | None = None) -> ExperimentConfig:
    """Accept either a scenario name or a YAML config path."""
    if name_or_path in SCENARIOS:
        cfg = scenario_config(name_or_path)
    else:
        cfg = load_config(name_or_path)
    if seed is not None:
        cfg = ExperimentConfig(**{**cfg.__dict__, "seed": seed})
    return cfg


def dump_config(config: ExperimentConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=True)
