"""Training loop: bandit-chosen weights, environment rollout, replay, updates."""

from __future__ import annotations

import csv
import math
import os
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from . import mab
from .agent import MOSACAgent, NonFiniteError, ReplayBuffer, TokenWindow
from .config import SECTIONS, RunConfig, build_agent_config, build_scenario, dump_config
from .env import MaritimeJammingEnv, scalarize

CHECKPOINT_VERSION = 1
METRICS_COLUMNS = [
    "step",
    "episode",
    "tau1",
    "loss_q1",
    "loss_q2",
    "loss_v1",
    "loss_v2",
    "loss_pi",
    "ep_secrecy_mean",
    "ep_energy_mean",
    "c6_violations",
    "c7_violations",
]
LOSS_KEYS = METRICS_COLUMNS[3:8]


class CheckpointError(RuntimeError):
    pass


def episode_seed(master: int, episode: int) -> int:
    return int(np.random.SeedSequence([master, 1, episode]).generate_state(1)[0])


def atomic_save(obj, path: Path) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(obj, tmp)
    os.replace(tmp, path)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


class _Window:
    """Accumulators between two metrics rows."""

    def __init__(self):
        self.losses = {k: [] for k in LOSS_KEYS}
        self.sec, self.energy = [], []
        self.c6 = self.c7 = 0

    @staticmethod
    def _mean(xs):
        return float(np.mean(xs)) if xs else float("nan")

    def row(self, step, episode, tau1):
        return [step, episode, tau1] + [self._mean(self.losses[k]) for k in LOSS_KEYS] + [
            self._mean(self.sec),
            self._mean(self.energy),
            self.c6,
            self.c7,
        ]


class Trainer:
    def __init__(self, cfg: RunConfig, run_dir, resume: bool = False):
        self.cfg = cfg
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.metrics_path = self.run_dir / "metrics.csv"
        self.ckpt_path = self.run_dir / "checkpoint.pt"
        self.hash = cfg.config_hash()
        torch.set_num_threads(cfg.run.threads)

        seed = cfg.run.seed
        ss = np.random.SeedSequence(seed)
        s_buf, s_bandit, s_start, s_torch, s_noise = ss.spawn(5)
        torch.manual_seed(int(s_torch.generate_state(1)[0]))
        self.acfg = build_agent_config(cfg)
        self.agent = MOSACAgent(self.acfg)
        self.noise = torch.Generator().manual_seed(int(s_noise.generate_state(1)[0]))
        self.buffer = ReplayBuffer(
            self.acfg.buffer_capacity,
            self.acfg.window,
            self.acfg.token_dim,
            self.acfg.act_dim,
            np.random.default_rng(s_buf),
        )
        self.bandit = mab.BanditState(list(cfg.mab.arms), cfg.mab.epsilon)
        self.bandit_rng = np.random.default_rng(s_bandit)
        self.start_rng = np.random.default_rng(s_start)
        self.env = MaritimeJammingEnv(build_scenario(cfg))
        self.step = 0
        self.episode = 0
        self.acc = _Window()
        self.tau = self.bandit.weights(0)
        if resume:
            self._load()
        else:
            self._start_metrics()

    # -- persistence ---------------------------------------------------------
    def _start_metrics(self):
        with open(self.metrics_path, "w", newline="") as fh:
            fh.write(f"# config_hash={self.hash} seed={self.cfg.run.seed}\n")
            csv.writer(fh).writerow(METRICS_COLUMNS)
        (self.run_dir / "config.cfg").write_text(
            f"# config_hash={self.hash} seed={self.cfg.run.seed}\n" + dump_config(self.cfg)
        )

    def _append_row(self, row):
        with open(self.metrics_path, "a", newline="") as fh:
            fh.write(",".join(_fmt(v) for v in row) + "\n")

    def checkpoint(self) -> None:
        state = {
            "version": CHECKPOINT_VERSION,
            "config": self.cfg.to_dict(),
            "config_hash": self.hash,
            "step": self.step,
            "episode": self.episode,
            "agent": self.agent.state_dict(),
            "opt_critic": self.agent.opt_critic.state_dict(),
            "opt_value": self.agent.opt_value.state_dict(),
            "opt_actor": self.agent.opt_actor.state_dict(),
            "bandit": self.bandit.to_dict(),
            "rng": {
                "buffer": self.buffer.rng.bit_generator.state,
                "bandit": self.bandit_rng.bit_generator.state,
                "start": self.start_rng.bit_generator.state,
                "noise": self.noise.get_state(),
                "torch": torch.get_rng_state(),
            },
            "window": self.acc.__dict__,
            "buffer": self.buffer.state_dict() if self.cfg.run.checkpoint_buffer else None,
        }
        atomic_save(state, self.ckpt_path)

    def _load(self):
        if not self.ckpt_path.exists():
            raise CheckpointError(f"no checkpoint at {self.ckpt_path}")
        st = torch.load(self.ckpt_path, weights_only=False)
        if st.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(f"checkpoint version {st.get('version')} is not {CHECKPOINT_VERSION}")
        if st["config_hash"] != self.hash:
            raise CheckpointError("checkpoint was written with a different config")
        self.agent.load_state_dict(st["agent"])
        self.agent.opt_critic.load_state_dict(st["opt_critic"])
        self.agent.opt_value.load_state_dict(st["opt_value"])
        self.agent.opt_actor.load_state_dict(st["opt_actor"])
        self.bandit = mab.BanditState.from_dict(st["bandit"])
        self.buffer.rng.bit_generator.state = st["rng"]["buffer"]
        self.bandit_rng.bit_generator.state = st["rng"]["bandit"]
        self.start_rng.bit_generator.state = st["rng"]["start"]
        self.noise.set_state(st["rng"]["noise"])
        torch.set_rng_state(st["rng"]["torch"])
        self.acc.__dict__.update(st["window"])
        if st["buffer"] is not None:
            self.buffer.load_state_dict(st["buffer"])
        self.step, self.episode = st["step"], st["episode"]

    # -- loop -----------------------------------------------------------------
    def _choose_weights(self):
        arm = mab.select_arm(self.bandit, self.bandit_rng)
        return arm, self.bandit.weights(arm)

    def _update(self):
        try:
            batch = self.buffer.sample(self.acfg.batch_size)
            losses = self.agent.update(batch, self.tau, self.noise)
        except NonFiniteError:
            atomic_save({"batch": batch, "step": self.step}, self.run_dir / "fault_batch.pt")
            self.checkpoint()
            raise
        for k in LOSS_KEYS:
            self.acc.losses[k].append(losses[k])

    def run(self, total_steps: Optional[int] = None) -> Path:
        cfg = self.cfg
        total = cfg.run.total_steps if total_steps is None else total_steps
        per_step = cfg.mab.per_step
        acfg = self.acfg
        window = TokenWindow(acfg.window, acfg.obs_dim, acfg.act_dim)
        next_ckpt = (self.step // cfg.run.checkpoint_every + 1) * cfg.run.checkpoint_every
        while self.step < total:
            if not per_step:
                arm, self.tau = self._choose_weights()
            self.env.reset(episode_seed(cfg.run.seed, self.episode))
            window.reset(self.env.observe())
            scal, secs, energies = [], [], []
            t = 0
            while not self.env.done and self.step < total:
                if per_step:
                    arm, self.tau = self._choose_weights()
                if self.step < cfg.agent.start_steps:
                    u = self.start_rng.uniform(-1.0, 1.0, size=acfg.act_dim)
                else:
                    u = self.agent.act(window.tokens, window.positions, self.noise)
                _, r, done, info = self.env.step(u)
                t += 1
                nxt = TokenWindow.token(self.env.observe(), u)
                self.buffer.add(window.tokens, window.positions, u, r.as_array(), nxt, t, done)
                window.push(nxt, t)
                s = scalarize(r, self.tau)
                if per_step:
                    mab.pull(self.bandit, arm, s)
                scal.append(s)
                secs.append(info["r_sec"])
                energies.append(info["e_u"])
                self.acc.c6 += int(not info["c6"])
                self.acc.c7 += int(not info["c7"])
                self.step += 1
                if self.step > cfg.agent.start_steps and len(self.buffer) >= acfg.batch_size:
                    for _ in range(cfg.agent.updates_per_step):
                        self._update()
                if self.env.done:
                    self.episode += 1
                    self.acc.sec.append(float(np.mean(secs)))
                    self.acc.energy.append(float(np.mean(energies)))
                    if not per_step:
                        mab.pull(self.bandit, arm, float(np.mean(scal)))
                if self.step % cfg.run.eval_every == 0:
                    self._append_row(self.acc.row(self.step, self.episode, self.tau[0]))
                    self.acc = _Window()
            if self.step >= next_ckpt or self.step >= total:
                self.checkpoint()
                next_ckpt = (self.step // cfg.run.checkpoint_every + 1) * cfg.run.checkpoint_every
        return self.run_dir


def load_agent(path) -> tuple:
    """Rebuild (agent, config) from a checkpoint for evaluation."""
    st = torch.load(path, weights_only=False)
    if st.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"incompatible checkpoint version {st.get('version')}")
    cfg = RunConfig(**{k: SECTIONS[k](**v) for k, v in st["config"].items()})
    agent = MOSACAgent(build_agent_config(cfg))
    agent.load_state_dict(st["agent"])
    agent.eval()
    return agent, cfg
