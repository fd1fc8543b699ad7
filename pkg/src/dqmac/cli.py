"""Command-line interface.

Subcommands: train, evaluate, baseline, verify-equilibria, sweep, trace.
``--config`` accepts either a scenario name (cliques, sumrate-4x2,
competitive-3x2, lograte-4x2) or a path to a YAML config file.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import nn
from .baseline import AlohaPolicy, aloha_throughput_analytic, optimal_attempt_prob, simulate_aloha
from .config import SCENARIOS, config_hash, resolve_config
from .errors import ConfigError
from .gametheory import (
    GameSpec,
    THEOREM_TEMPLATES,
    is_nash,
    is_pareto,
    is_spe_openloop,
    profile_rewards,
    theorem_profile,
)
from .harness import evaluate_policy, run_scenario, sweep, write_occupancy
from .rewards import RewardSpec
from .trainer import collect_episode
from .agent import PolicyParams
from .seeding import TAG_EVAL_EPISODE, substream


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help=f"scenario name {SCENARIOS} or YAML path")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--workers", type=int, default=1, help="parallel workers")
    parser.add_argument("--checkpoint", default=None, help="network checkpoint path")


def _need_config(args) -> str:
    if not args.config:
        raise ConfigError("--config is required (scenario name or YAML path)")
    return args.config


def cmd_train(args) -> int:
    summary = run_scenario(_need_config(args), args.out, seed=args.seed)
    print(json.dumps(summary, sort_keys=True, indent=1))
    return 0


def cmd_evaluate(args) -> int:
    if not args.checkpoint:
        raise ConfigError("evaluate requires --checkpoint")
    config = resolve_config(_need_config(args), seed=args.seed)
    params, _ = nn.load_params(args.checkpoint)
    metrics, _ = evaluate_policy(params, config)
    doc = {"config_hash": config_hash(config), **metrics.to_dict()}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.json", "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")
    print(json.dumps(doc, sort_keys=True, indent=1))
    return 0


def cmd_baseline(args) -> int:
    p = args.attempt_prob if args.attempt_prob is not None else optimal_attempt_prob(args.users)
    policy = AlohaPolicy(attempt_prob=p, num_channels=args.channels)
    analytic = aloha_throughput_analytic(args.users, p) if args.channels == 1 else None
    result = simulate_aloha(args.users, policy, args.slots, seed=args.seed or 0)
    doc = {
        "users": args.users,
        "attempt_prob": p,
        "channels": args.channels,
        "slots": args.slots,
        "simulated_throughput": result["throughput"],
        "analytic_throughput": analytic,
    }
    print(json.dumps(doc, sort_keys=True, indent=1))
    return 0


def _read_profile(path: str) -> np.ndarray:
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        rows.append([int(tok) for tok in line.split()])
    if not rows:
        raise ConfigError(f"profile file {path} is empty")
    return np.array(rows, dtype=np.int64)


def cmd_verify(args) -> int:
    reward = (RewardSpec.alpha_fair(alpha=args.alpha, gamma=args.gamma)
              if args.reward == "alpha_fair"
              else RewardSpec.competitive(gamma=args.gamma))
    spec = GameSpec(args.users, args.channels, args.horizon, reward)
    if args.template:
        profile = theorem_profile(args.template, spec)
        source = f"template {args.template}"
    elif args.profile:
        profile = _read_profile(args.profile)
        source = f"file {args.profile}"
    else:
        raise ConfigError("verify-equilibria needs --profile FILE or --template NAME")

    rewards = profile_rewards(profile, spec)
    nash = is_nash(profile, spec, budget=args.budget)
    spe = is_spe_openloop(profile, spec, budget=args.budget)
    report = {
        "source": source,
        "profile": profile.tolist(),
        "rewards": [float(r) for r in rewards],
        "is_nash": nash.is_nash,
        "is_spe": spe.is_spe,
    }
    if not nash.is_nash:
        w = nash.witness
        report["nash_witness"] = {
            "user": w.user,
            "deviation": list(w.deviation),
            "deviation_reward": w.deviation_reward,
            "profile_reward": w.profile_reward,
        }
    if not spe.is_spe:
        report["spe_failing_start"] = spe.failing_start
    try:
        pareto = is_pareto(profile, spec, budget=args.budget)
        report["is_pareto"] = pareto.is_pareto
        if not pareto.is_pareto:
            report["pareto_dominator"] = pareto.dominator.tolist()
    except Exception as exc:  # enumeration too large: report, don't guess
        report["is_pareto"] = None
        report["pareto_error"] = str(exc)
    print(json.dumps(report, sort_keys=True, indent=1))
    return 0


def cmd_sweep(args) -> int:
    seeds = list(range(args.first_seed, args.first_seed + args.seeds))
    aggregate = sweep(_need_config(args), seeds, args.out, workers=args.workers)
    print(json.dumps(aggregate, sort_keys=True, indent=1))
    return 0


def cmd_trace(args) -> int:
    if not args.checkpoint:
        raise ConfigError("trace requires --checkpoint")
    config = resolve_config(_need_config(args), seed=args.seed)
    params, _ = nn.load_params(args.checkpoint)
    rng = substream(config.seed, TAG_EVAL_EPISODE, 0)
    from .harness import _episode_config

    env_cfg = _episode_config(config, rng)
    policy = PolicyParams(config.eval_alpha_explore, config.eval_beta)
    trace = collect_episode(env_cfg, params, policy, config.reward, rng)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "occupancy.csv"
    write_occupancy(trace, path, config_hash(config))
    print(str(path))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dqmac",
        description="Multi-user deep Q-learning for slotted multichannel random access",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one scenario and write reports")
    _common_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint")
    _common_flags(p)
    p.add_argument("--episodes", type=int, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline", help="slotted-Aloha reference numbers")
    _common_flags(p)
    p.add_argument("--users", type=int, required=True)
    p.add_argument("--attempt-prob", type=float, default=None,
                   help="default: the optimal 1/n")
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--slots", type=int, default=100_000)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("verify-equilibria", help="check a strategy profile")
    _common_flags(p)
    p.add_argument("--users", type=int, required=True)
    p.add_argument("--channels", type=int, required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--reward", choices=["competitive", "alpha_fair"], default="competitive")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--profile", help="whitespace-separated N x T action matrix")
    p.add_argument("--template", choices=list(THEOREM_TEMPLATES))
    p.add_argument("--budget", type=int, default=10_000_000)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="run a scenario over several master seeds")
    _common_flags(p)
    p.add_argument("--seeds", type=int, default=10, help="number of seeds")
    p.add_argument("--first-seed", type=int, default=0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("trace", help="dump per-slot channel occupancy")
    _common_flags(p)
    p.set_defaults(func=cmd_trace)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
