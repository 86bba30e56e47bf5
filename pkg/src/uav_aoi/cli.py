"""Command line entry point: ``python -m uav_aoi <command> ...``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import bounds, dp
from .config import load_scenario, load_trainer_config
from .dqn import DQNPolicy, TrainerConfig, load_weights, save_weights, train
from .env import run_episode, write_trace_csv
from .harness import build_policy, evaluate, get_scenario, run_comparison, write_report


def _scenario_and_env(args):
    if args.config:
        scenario = load_scenario(args.config)
    elif args.scenario:
        scenario = get_scenario(args.scenario)
    else:
        raise SystemExit("one of --scenario or --config is required")
    specs = scenario.sweep_specs()
    return scenario, specs[args.sweep_index][1]


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _trainer_config(args, scenario) -> TrainerConfig:
    if args.trainer_config:
        cfg = load_trainer_config(args.trainer_config)
    else:
        cfg = scenario.train_config or TrainerConfig()
    cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.episodes:
        cfg = dataclasses.replace(cfg, episodes=args.episodes)
    return cfg


def cmd_bounds(args):
    w = csv.writer(sys.stdout, lineterminator="\n")
    cols = ["num_nodes", "horizon", "aoi_cap", "theorem1_min", "theorem1_max", "min_schedule_oracle", "max_schedule_oracle"]
    w.writerow(cols)
    row = bounds.bounds_row(bounds.BoundInputs(args.nodes, args.horizon, args.aoi_cap))
    w.writerow(["" if row[c] is None else row[c] for c in cols])


def cmd_dp_solve(args):
    _, env = _scenario_and_env(args)
    out = _out_dir(args)
    sol = dp.solve(env)
    print(f"value_s0,{sol.initial_value!r}")
    total, trace = sol.greedy_trajectory()
    write_trace_csv(env, trace, out / "dp_trace.csv")
    if args.dump_values:
        with open(out / "dp_values.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "value", "action"])
            for i, (v, a) in enumerate(zip(sol.values.reshape(-1), sol.actions.reshape(-1))):
                w.writerow([i, repr(float(v)), int(a)])


def cmd_train(args):
    scenario, env = _scenario_and_env(args)
    out = _out_dir(args)
    cfg = _trainer_config(args, scenario)
    result = train(env, cfg)
    with open(out / "curve.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode", "total_cost", "epsilon", "wall_ms"])
        for p in result.curve:
            w.writerow([p.episode, repr(p.total_cost), repr(p.epsilon), f"{p.wall_ms:.3f}"])
    save_weights(result.net, out / "weights.txt")
    print(f"trained {cfg.episodes} episodes; last-episode cost {result.curve[-1].total_cost!r}")


def _policy_for(args, scenario, env):
    if args.policy == "dqn" and args.weights:
        return DQNPolicy(load_weights(args.weights))
    return build_policy(args.policy, env, scenario, args.seed)[0]


def cmd_evaluate(args):
    scenario, env = _scenario_and_env(args)
    policy = _policy_for(args, scenario, env)
    row = evaluate(env, policy, args.episodes or scenario.eval_episodes, np.random.default_rng(args.seed))
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["policy", "mean_total", "mean_per_slot", "std", "episodes"])
    w.writerow([args.policy, repr(row.mean_total), repr(row.mean_per_slot), repr(row.std), row.episodes])


def cmd_compare(args):
    scenario, _ = _scenario_and_env(args)
    report = run_comparison(scenario, args.seed, args.episodes, progress=lambda m: print(m, file=sys.stderr))
    for path in write_report(report, _out_dir(args)):
        print(path)


def cmd_trace(args):
    scenario, env = _scenario_and_env(args)
    policy = _policy_for(args, scenario, env)
    total, trace = run_episode(env, policy, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trace_csv(env, trace, out)
    print(f"total_cost,{total!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uav_aoi", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default="out"):
        p.add_argument("--scenario", help="builtin scenario name")
        p.add_argument("--config", help="TOML environment/scenario file")
        p.add_argument("--sweep-index", type=int, default=0, help="sweep point for single-environment commands")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--episodes", type=int, default=None)
        p.add_argument("--out", default=out_default)

    p = sub.add_parser("bounds", help="closed-form and simulated cost extremes as CSV")
    p.add_argument("--nodes", "-M", type=int, required=True)
    p.add_argument("--horizon", "-T", type=int, required=True)
    p.add_argument("--aoi-cap", "-A", type=int, required=True)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("dp-solve", help="exact backward induction on a micro instance")
    common(p)
    p.add_argument("--dump-values", action="store_true")
    p.set_defaults(func=cmd_dp_solve)

    p = sub.add_parser("train", help="train the deep Q-network")
    common(p)
    p.add_argument("--trainer-config", help="TOML file with a [trainer] table")
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (
        ("evaluate", cmd_evaluate, "evaluate one policy"),
        ("trace", cmd_trace, "write one episode trace CSV"),
    ):
        p = sub.add_parser(name, help=helptext)
        common(p, "out/trace.csv" if name == "trace" else "out")
        p.add_argument("--policy", required=True, choices=("distance", "random", "dp", "tabular-q", "dqn"))
        p.add_argument("--weights", help="trained weights for --policy dqn")
        p.set_defaults(func=func)

    p = sub.add_parser("compare", help="run every policy of a scenario and write CSV reports")
    common(p)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0
