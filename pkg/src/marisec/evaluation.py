"""Deterministic evaluation of trained agents and baselines on shared seeds."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from .agent import MOSACAgent, TokenWindow
from .baselines import non_uav_policy, optimal_secrecy_oracle, random_policy
from .config import RunConfig, build_scenario
from .env import MaritimeJammingEnv, scalarize

POLICIES = ("transsac", "sac", "nonuav", "random")
SUMMARY_COLUMNS = [
    "policy",
    "episodes",
    "secrecy_mean",
    "secrecy_std",
    "energy_j_mean",
    "energy_j_std",
    "c6_rate",
    "c7_rate",
    "c1_c5_ok_rate",
    "oracle_ratio_mean",
    "scalarized_mean",
]


class AgentPolicy:
    """Greedy (mean) action of a trained agent with its own token window."""

    def __init__(self, agent: MOSACAgent):
        self.agent = agent
        c = agent.cfg
        self.window = TokenWindow(c.window, c.obs_dim, c.act_dim)
        self.t = 0

    def reset(self, env: MaritimeJammingEnv, episode: int) -> None:
        self.window.reset(env.observe())
        self.t = 0

    def __call__(self, env: MaritimeJammingEnv):
        return self.agent.act(self.window.tokens, self.window.positions, deterministic=True)

    def observe(self, env: MaritimeJammingEnv, action) -> None:
        self.t += 1
        self.window.push(TokenWindow.token(env.observe(), action), self.t)


class NonUavPolicy:
    def reset(self, env, episode):
        pass

    def __call__(self, env):
        return non_uav_policy(env.state)

    def observe(self, env, action):
        pass


class RandomPolicy:
    def __init__(self, seed_base: int):
        self.seed_base = seed_base

    def reset(self, env, episode):
        self.rng = np.random.default_rng([self.seed_base, 2, episode])

    def __call__(self, env):
        return random_policy(env.state, self.rng)

    def observe(self, env, action):
        pass


def eval_seed(seed_base: int, episode: int) -> int:
    return int(np.random.SeedSequence([seed_base, 0, episode]).generate_state(1)[0])


def run_episode(env: MaritimeJammingEnv, policy, seed: int, episode: int = 0):
    env.reset(seed)
    policy.reset(env, episode)
    trace, rewards = [], []
    while not env.done:
        a = policy(env)
        _, r, _, info = env.step(a)
        policy.observe(env, a)
        trace.append(info)
        rewards.append(r)
    return trace, rewards


@dataclass
class EpisodeStats:
    secrecy_mean: float
    energy_j: float
    c6_rate: float
    c7_rate: float
    c1_c5_ok: float
    oracle_ratio: float
    scalarized: float
    slots: int


def episode_stats(env, trace, rewards, tau1: float, grid_m: float) -> EpisodeStats:
    sec = np.array([i["r_sec"] for i in trace])
    bound = optimal_secrecy_oracle(env, trace, grid_m)
    total_bound = bound.sum()
    hard = [all(i[f"c{k}"] for k in range(1, 6)) for i in trace]
    return EpisodeStats(
        secrecy_mean=float(sec.mean()),
        energy_j=float(sum(i["e_u"] for i in trace)),
        c6_rate=float(np.mean([not i["c6"] for i in trace])),
        c7_rate=float(np.mean([not i["c7"] for i in trace])),
        c1_c5_ok=float(np.mean(hard)),
        oracle_ratio=float(sec.sum() / total_bound) if total_bound > 0 else 1.0,
        scalarized=float(np.mean([scalarize(r, (tau1, 1.0 - tau1)) for r in rewards])),
        slots=len(trace),
    )


def make_policy(kind: str, cfg: RunConfig, agent: Optional[MOSACAgent] = None):
    if kind in ("transsac", "sac"):
        if agent is None:
            raise ValueError(f"policy {kind!r} needs a checkpoint")
        return AgentPolicy(agent)
    if kind == "nonuav":
        return NonUavPolicy()
    if kind == "random":
        return RandomPolicy(cfg.eval.seed_base)
    raise ValueError(f"unknown policy {kind!r}; choose from {POLICIES}")


def evaluate(
    cfg: RunConfig,
    kind: str,
    agent: Optional[MOSACAgent] = None,
    episodes: Optional[int] = None,
    trace_sink: Optional[Callable[[int, list], None]] = None,
) -> List[EpisodeStats]:
    """Roll out ``episodes`` deterministic episodes on the shared evaluation seeds."""
    n = cfg.eval.episodes if episodes is None else episodes
    env = MaritimeJammingEnv(build_scenario(cfg))
    policy = make_policy(kind, cfg, agent)
    out = []
    for ep in range(n):
        trace, rewards = run_episode(env, policy, eval_seed(cfg.eval.seed_base, ep), ep)
        if trace_sink is not None:
            trace_sink(ep, trace)
        out.append(episode_stats(env, trace, rewards, cfg.eval.tau1, cfg.eval.oracle_grid_m))
    return out


def summarize(kind: str, stats: List[EpisodeStats]) -> Dict[str, object]:
    def col(name):
        return np.array([getattr(s, name) for s in stats])

    return {
        "policy": kind,
        "episodes": len(stats),
        "secrecy_mean": float(col("secrecy_mean").mean()),
        "secrecy_std": float(col("secrecy_mean").std()),
        "energy_j_mean": float(col("energy_j").mean()),
        "energy_j_std": float(col("energy_j").std()),
        "c6_rate": float(col("c6_rate").mean()),
        "c7_rate": float(col("c7_rate").mean()),
        "c1_c5_ok_rate": float(col("c1_c5_ok").mean()),
        "oracle_ratio_mean": float(col("oracle_ratio").mean()),
        "scalarized_mean": float(col("scalarized").mean()),
    }


def write_summary(path, rows: List[Dict[str, object]], header_comment: Optional[str] = None) -> None:
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def write_episodes(path, stats: List[EpisodeStats], header_comment: Optional[str] = None) -> None:
    names = list(EpisodeStats.__dataclass_fields__)
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(["episode"] + names)
        for i, s in enumerate(stats):
            w.writerow([i] + [getattr(s, k) for k in names])
