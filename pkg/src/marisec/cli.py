"""Command line: train | eval | sweep | sim | plot.

Exit codes: 0 success, 1 configuration error, 2 runtime fault.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import baselines
from .config import ConfigError, build_scenario, load_config, parse_overrides
from .env import MaritimeJammingEnv, write_trace
from .evaluation import POLICIES, SUMMARY_COLUMNS, evaluate, summarize, write_episodes, write_summary
from .experiments import SWEEP_AXES, output_root, policy_config, run_dir, sweep, write_sweep
from .plotting import PlotError, plot_files
from .training import CheckpointError, Trainer, load_agent
from .vessel import VesselState, export_trajectory

EXIT_OK, EXIT_CONFIG, EXIT_FAULT = 0, 1, 2


def _config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat key = value config file")
    p.add_argument("--profile", choices=["smoke", "desk", "full"])
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, help="output directory (default: $MARISEC_OUT or run.out_dir)")


def _load(args):
    ov = parse_overrides(args.overrides)
    if args.seed is not None:
        ov["run.seed"] = args.seed
    cfg = load_config(args.config, ov, args.profile)
    policy = getattr(args, "policy", None)
    if getattr(args, "no_transformer", False):
        policy = "sac"
    if policy in ("transsac", "sac"):
        cfg = policy_config(cfg, policy)
    return cfg, policy


def _root(args, cfg) -> Path:
    return args.out if args.out is not None else output_root(cfg)


def _tag(cfg) -> str:
    return f"config_hash={cfg.config_hash()} seed={cfg.run.seed}"


def cmd_train(args) -> int:
    cfg, _ = _load(args)
    d = run_dir(cfg, _root(args, cfg))
    Trainer(cfg, d, resume=args.resume).run()
    print(f"trained {cfg.run.total_steps} steps -> {d}")
    return EXIT_OK


def _print_table(rows):
    print("  ".join(f"{c:>16}" for c in SUMMARY_COLUMNS))
    for r in rows:
        print("  ".join(f"{r[c]:>16.4f}" if isinstance(r[c], float) else f"{r[c]:>16}" for c in SUMMARY_COLUMNS))


def cmd_eval(args) -> int:
    cfg, policy = _load(args)
    agent = None
    if policy in ("transsac", "sac"):
        if args.checkpoint is None:
            raise ConfigError(f"--policy {policy} needs --checkpoint")
        agent, ckpt_cfg = load_agent(args.checkpoint)
        cfg = ckpt_cfg.with_overrides(parse_overrides(args.overrides))
    out = _root(args, cfg) / "eval"
    out.mkdir(parents=True, exist_ok=True)
    env = MaritimeJammingEnv(build_scenario(cfg))
    oracle_rows = []

    def sink(ep, trace):
        if ep == 0:
            write_trace(out / f"trace_{policy}.csv", trace, _tag(cfg))
            bound = baselines.optimal_secrecy_oracle(env, trace, cfg.eval.oracle_grid_m)
            oracle_rows.extend((i["t_slot"], i["r_sec"], b) for i, b in zip(trace, bound))

    stats = evaluate(cfg, policy, agent, args.episodes, trace_sink=sink)
    row = summarize(policy, stats)
    write_summary(out / f"summary_{policy}.csv", [row], _tag(cfg))
    write_episodes(out / f"episodes_{policy}.csv", stats, _tag(cfg))
    with open(out / f"oracle_{policy}.csv", "w", newline="") as fh:
        fh.write(f"# {_tag(cfg)}\n")
        w = csv.writer(fh)
        w.writerow(["t", "R_sec", "R_opt"])
        w.writerows(oracle_rows)
    _print_table([row])
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, policy = _load(args)
    grid = [float(v) for v in args.grid.split(",") if v.strip()]
    if not grid:
        raise ConfigError("--grid must list at least one value")
    if args.checkpoint is not None:
        _, ckpt_cfg = load_agent(args.checkpoint)
        cfg = ckpt_cfg.with_overrides(parse_overrides(args.overrides))
    root = _root(args, cfg)
    rows = sweep(cfg, args.axis, grid, args.checkpoint, policy, args.jobs, root)
    root.mkdir(parents=True, exist_ok=True)
    path = root / f"sweep_{args.axis}_{policy}.csv"
    write_sweep(path, rows, _tag(cfg))
    for r in rows:
        print(f"{r['axis']}={r['value']:g} secrecy={r['secrecy_mean']:.4f} energy={r['energy_j_mean']:.1f}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_sim(args) -> int:
    cfg, _ = _load(args)
    env = MaritimeJammingEnv(build_scenario(cfg))
    env.reset(cfg.run.seed)
    rng = np.random.default_rng(cfg.run.seed)
    infos, alice, eve, times = [], [env.alice.state], [env.eve.state], [0.0]
    while not env.done:
        if args.policy == "nonuav":
            a = baselines.non_uav_policy(env.state)
        elif args.policy == "random":
            a = baselines.random_policy(env.state, rng)
        else:
            a = baselines.tracking_policy(env)
        _, _, _, info = env.step(a)
        infos.append(info)
        alice.append(VesselState(env.state.eta_alice, env.state.nu_alice))
        eve.append(VesselState(env.state.eta_eve, env.state.nu_eve))
        times.append(info["t_slot"] * cfg.env.dt_s)
    out = _root(args, cfg) / "sim"
    out.mkdir(parents=True, exist_ok=True)
    write_trace(out / f"trace_{args.policy}.csv", infos, _tag(cfg))
    export_trajectory(out / "alice.csv", times, alice)
    export_trajectory(out / "eve.csv", times, eve)
    sec = np.mean([i["r_sec"] for i in infos])
    print(f"{len(infos)} slots, mean secrecy {sec:.4f} bit/s/Hz -> {out}")
    return EXIT_OK


def cmd_plot(args) -> int:
    out = args.out if args.out is not None else Path("figures")
    for p in plot_files(args.paths, out, args.smooth):
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="marisec", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("train", help="train an agent")
    _config_args(p)
    p.add_argument("--policy", choices=["transsac", "sac"], default="transsac")
    p.add_argument("--no-transformer", action="store_true", help="plain SAC on the raw observation")
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint or a baseline")
    _config_args(p)
    p.add_argument("--policy", choices=POLICIES, default="transsac")
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--episodes", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="sweep P_max or I0")
    _config_args(p)
    p.add_argument("--axis", choices=sorted(SWEEP_AXES), required=True)
    p.add_argument("--grid", required=True, help="comma-separated values in dBm")
    p.add_argument("--policy", choices=POLICIES, default="transsac")
    p.add_argument("--checkpoint", type=Path, help="evaluate this policy; omit to train per point")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("sim", help="run a scripted policy and dump traces")
    _config_args(p)
    p.add_argument("--policy", choices=["track", "nonuav", "random"], default="track")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("plot", help="render figures from CSV outputs")
    p.add_argument("paths", nargs="+", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--smooth", type=int, default=25)
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CheckpointError, PlotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
