"""Experiment orchestration: evaluation, scenario runs, seed sweeps, files.

All outputs are plain CSV/JSON with the resolved config's hash embedded; a
seeded run writes byte-identical files on every repeat, and sweeps produce
the same numbers for any worker count (each seed's work is an independent,
fully seeded computation; results are reduced in seed order).
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import nn
from .agent import PolicyParams
from .config import ExperimentConfig, config_hash, resolve_config
from .env import EnvConfig
from .errors import ConfigError
from .metrics import (
    Metrics,
    channel_fractions,
    classify_allocation,
    mean_stderr,
    per_user_rates,
)
from .baseline import aloha_throughput_analytic, optimal_attempt_prob
from .rewards import RewardSpec, jain_index, log_sum_rate
from .seeding import TAG_EVAL_EPISODE, substream
from .trainer import EpisodeTrace, collect_episode, episode_env_config, train


def _episode_config(config: ExperimentConfig, rng: np.random.Generator) -> EnvConfig:
    tc = config.train_config()
    return episode_env_config(tc, rng)


def evaluate_policy(
    params: nn.NetworkParams,
    config: ExperimentConfig,
    episodes: int | None = None,
    seed: int | None = None,
) -> tuple[Metrics, list[EpisodeTrace]]:
    """Play frozen-network episodes under the evaluation policy.

    Returns aggregate metrics (means with standard errors across episodes)
    plus the raw traces for occupancy dumps and classification.
    """
    if params.num_channels != config.env.num_channels:
        raise ConfigError(
            f"checkpoint is for {params.num_channels} channels, "
            f"config asks for {config.env.num_channels}"
        )
    episodes = config.eval_settings.episodes if episodes is None else episodes
    seed = config.seed if seed is None else seed
    policy = PolicyParams(config.eval_alpha_explore, config.eval_beta)
    window = min(config.eval_settings.window, config.env.horizon)

    traces = []
    full, wnd = [], []
    labels = {}
    rate_rows = []
    for e in range(episodes):
        rng = substream(seed, TAG_EVAL_EPISODE, e)
        env_cfg = _episode_config(config, rng)
        trace = collect_episode(env_cfg, params, policy, config.reward, rng)
        traces.append(trace)
        full.append(channel_fractions(trace.actions, trace.clique_ids, env_cfg.num_channels))
        wnd.append(channel_fractions(trace.actions[-window:], trace.clique_ids, env_cfg.num_channels))
        rate_rows.append(per_user_rates(trace.success, window))
        if env_cfg.num_cliques == 1:
            label = classify_allocation(
                trace.actions[-window:], trace.success[-window:], env_cfg.num_channels
            )
            labels[label] = labels.get(label, 0) + 1

    thr_mean, thr_err = mean_stderr([f["throughput"] for f in full])
    wnd_mean, wnd_err = mean_stderr([f["throughput"] for f in wnd])
    # Per-user rates are only comparable across episodes of equal size.
    sizes = {r.shape[0] for r in rate_rows}
    if len(sizes) == 1:
        rates = np.mean(rate_rows, axis=0)
    else:
        rates = np.array([float(np.mean(r)) for r in rate_rows])
    metrics = Metrics(
        episodes=episodes,
        throughput=thr_mean,
        throughput_stderr=thr_err,
        idle_frac=float(np.mean([f["idle_frac"] for f in full])),
        collision_frac=float(np.mean([f["collision_frac"] for f in full])),
        window_throughput=wnd_mean,
        window_throughput_stderr=wnd_err,
        window_idle_frac=float(np.mean([f["idle_frac"] for f in wnd])),
        window_collision_frac=float(np.mean([f["collision_frac"] for f in wnd])),
        rates=[float(r) for r in rates],
        sum_rate=float(np.sum(rates)),
        log_sum_rate=log_sum_rate(rates, config.reward.log_floor),
        jain=jain_index(rates),
        labels=labels,
    )
    return metrics, traces


def aloha_benchmark(config: ExperimentConfig, episodes: int | None = None,
                    seed: int | None = None) -> float:
    """Mean analytic optimal-Aloha throughput over the evaluation's realized
    clique sizes (the comparison line for the cliques scenario)."""
    episodes = config.eval_settings.episodes if episodes is None else episodes
    seed = config.seed if seed is None else seed
    values = []
    for e in range(episodes):
        rng = substream(seed, TAG_EVAL_EPISODE, e)
        env_cfg = _episode_config(config, rng)
        for members in env_cfg.cliques or (tuple(range(env_cfg.num_users)),):
            n = len(members)
            values.append(aloha_throughput_analytic(n, optimal_attempt_prob(n)))
    return float(np.mean(values))


def write_training_curve(curve: list[dict], out_dir: Path, chash: str) -> None:
    columns = ["iteration", "mean_reward", "throughput", "idle_frac",
               "collision_frac", "loss", "alpha_explore", "beta"]
    with open(out_dir / "training_curve.csv", "w", newline="") as fh:
        fh.write(f"# config_hash: {chash}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in curve:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c]
                             for c in columns])
    with open(out_dir / "training_curve.json", "w") as fh:
        json.dump({"config_hash": chash, "curve": curve}, fh, sort_keys=True)
        fh.write("\n")


def occupancy_trace(trace: EpisodeTrace) -> list[tuple[int, int, int, int]]:
    """Flat (slot, user, action, success) rows for one episode."""
    horizon, n_users = trace.actions.shape
    rows = []
    for t in range(horizon):
        for n in range(n_users):
            rows.append((t, n, int(trace.actions[t, n]), int(trace.success[t, n])))
    return rows


def write_occupancy(trace: EpisodeTrace, path, chash: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash: {chash}\n")
        writer = csv.writer(fh)
        writer.writerow(["slot", "user", "action", "success"])
        writer.writerows(occupancy_trace(trace))


def write_metrics(metrics: Metrics, out_dir: Path, chash: str, extra: dict | None = None) -> dict:
    doc = {"config_hash": chash, **metrics.to_dict()}
    if extra:
        doc.update(extra)
    with open(out_dir / "metrics.json", "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")
    with open(out_dir / "metrics.csv", "w", newline="") as fh:
        fh.write(f"# config_hash: {chash}\n")
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for key, value in sorted(doc.items()):
            if isinstance(value, (int, float, str)):
                writer.writerow([key, repr(value) if isinstance(value, float) else value])
            elif key == "rates":
                for idx, rate in enumerate(value):
                    writer.writerow([f"rate_{idx}", repr(rate)])
    return doc


def run_scenario(
    name_or_config: str | ExperimentConfig,
    out_dir,
    seed: int | None = None,
    checkpoint: str | None = None,
) -> dict:
    """Train (or load a checkpoint), evaluate, and write all report files.

    Produces: config.json, checkpoint.net, training_curve.{csv,json},
    metrics.{csv,json}, occupancy.csv and summary.json under ``out_dir``.
    """
    if isinstance(name_or_config, ExperimentConfig):
        config = name_or_config if seed is None else replace(name_or_config, seed=seed)
    else:
        config = resolve_config(name_or_config, seed=seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chash = config_hash(config)

    with open(out_dir / "config.json", "w") as fh:
        json.dump({"config_hash": chash, **config.to_dict()}, fh, sort_keys=True, indent=1)
        fh.write("\n")

    if checkpoint is not None:
        params, _ = nn.load_params(checkpoint)
        curve = []
    else:
        result = train(config.train_config(), checkpoint_dir=out_dir)
        params, curve = result.params, result.curve
        write_training_curve(curve, out_dir, chash)
    nn.save_params(params, out_dir / "checkpoint.net", config_hash=chash)

    metrics, traces = evaluate_policy(params, config)
    extra: dict = {"scenario": config.name, "seed": config.seed}
    if config.name == "cliques" or config.train.get("clique_size_range"):
        benchmark = aloha_benchmark(config)
        extra["aloha_benchmark"] = benchmark
        extra["aloha_margin"] = metrics.window_throughput - benchmark
    summary = write_metrics(metrics, out_dir, chash, extra)
    write_occupancy(traces[0], out_dir / "occupancy.csv", chash)
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return summary


def _sweep_one(args) -> dict:
    config_doc, scenario, seed, out_dir = args
    from .config import from_dict  # local import keeps the worker picklable

    config = replace(from_dict(config_doc, name=scenario), seed=seed)
    return run_scenario(config, out_dir)


def sweep(
    name_or_config: str | ExperimentConfig,
    seeds: list[int],
    out_dir,
    workers: int = 1,
) -> dict:
    """Run one scenario under several master seeds and aggregate.

    Seeds are independent end-to-end runs; with ``workers`` > 1 they execute
    in separate processes.  The aggregate is reduced in seed order, so the
    numbers do not depend on the worker count.
    """
    config = (name_or_config if isinstance(name_or_config, ExperimentConfig)
              else resolve_config(name_or_config))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [
        (config.to_dict(), config.name, seed, str(out_dir / f"seed-{seed:04d}"))
        for seed in seeds
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(job) for job in jobs]

    per_seed = []
    for seed, summary in zip(seeds, results):
        labels = summary.get("labels", {})
        majority = max(labels, key=lambda k: (labels[k], k)) if labels else None
        row = {
            "seed": seed,
            "window_throughput": summary["window_throughput"],
            "throughput": summary["throughput"],
            "labels": labels,
            "majority_label": majority,
        }
        if "aloha_margin" in summary:
            row["aloha_benchmark"] = summary["aloha_benchmark"]
            row["aloha_margin"] = summary["aloha_margin"]
        per_seed.append(row)
    aggregate = {
        "scenario": config.name,
        "config_hash": config_hash(config),
        "seeds": list(seeds),
        "per_seed": per_seed,
        "mean_window_throughput": float(np.mean([r["window_throughput"] for r in per_seed])),
    }
    with open(out_dir / "sweep_summary.json", "w") as fh:
        json.dump(aggregate, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return aggregate
