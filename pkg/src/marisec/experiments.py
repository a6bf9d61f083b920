"""Run orchestration shared by the CLI and the acceptance suite."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch

from .config import RunConfig
from .evaluation import evaluate, summarize
from .training import Trainer, load_agent

SWEEP_AXES = {"p_max": "env.p_max_dbm", "i0": "env.i0_dbm"}
SWEEP_COLUMNS = [
    "axis",
    "value",
    "mode",
    "secrecy_mean",
    "energy_j_mean",
    "c6_rate",
    "c7_rate",
    "oracle_ratio_mean",
    "scalarized_mean",
]


def output_root(cfg: Optional[RunConfig] = None) -> Path:
    env = os.environ.get("MARISEC_OUT")
    if env:
        return Path(env)
    return Path(cfg.run.out_dir if cfg is not None else "runs")


def policy_config(cfg: RunConfig, policy: str) -> RunConfig:
    if policy == "sac":
        return cfg.with_overrides({"agent.transformer": False})
    if policy == "transsac":
        return cfg.with_overrides({"agent.transformer": True})
    return cfg


def run_dir(cfg: RunConfig, root: Path) -> Path:
    tag = "transsac" if cfg.agent.transformer else "sac"
    return Path(root) / f"{tag}-s{cfg.run.seed}-{cfg.config_hash()}"


def completed_steps(path: Path) -> int:
    ckpt = Path(path) / "checkpoint.pt"
    if not ckpt.exists():
        return 0
    return int(torch.load(ckpt, weights_only=False)["step"])


def ensure_trained(cfg: RunConfig, root: Path) -> Path:
    """Train (or resume) until the checkpoint covers ``run.total_steps``."""
    d = run_dir(cfg, root)
    done = completed_steps(d)
    if done >= cfg.run.total_steps:
        return d
    Trainer(cfg, d, resume=done > 0).run()
    return d


def sweep(
    cfg: RunConfig,
    axis: str,
    grid: Sequence[float],
    checkpoint: Optional[Path] = None,
    policy: str = "transsac",
    jobs: int = 1,
    root: Optional[Path] = None,
) -> List[Dict[str, object]]:
    """Evaluate a fixed checkpoint (or train per point when none is given)."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {sorted(SWEEP_AXES)}")
    if len(grid) == 0:
        raise ValueError("empty sweep grid")
    tasks = [(cfg, axis, float(v), checkpoint, policy, root) for v in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_sweep_point, tasks))
    return [_sweep_point(t) for t in tasks]


def _sweep_point(task) -> Dict[str, object]:
    cfg, axis, value, checkpoint, policy, root = task
    torch.set_num_threads(cfg.run.threads)
    point = policy_config(cfg, policy).with_overrides({SWEEP_AXES[axis]: value})
    agent = None
    mode = "eval"
    if policy in ("transsac", "sac"):
        if checkpoint is not None:
            agent, _ = load_agent(checkpoint)
        else:
            mode = "train"
            agent, _ = load_agent(ensure_trained(point, root or output_root(point)) / "checkpoint.pt")
    s = summarize(policy, evaluate(point, policy, agent))
    row = {"axis": axis, "value": value, "mode": mode}
    row.update({k: s[k] for k in SWEEP_COLUMNS[3:]})
    return row


def write_sweep(path, rows, header_comment: Optional[str] = None) -> None:
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def sign_test_greater(a: Sequence[float], b: Sequence[float]) -> float:
    """One-sided sign test p-value for a > b on paired samples (ties dropped)."""
    from scipy.stats import binomtest

    d = np.asarray(a) - np.asarray(b)
    wins, losses = int((d > 0).sum()), int((d < 0).sum())
    if wins + losses == 0:
        return 1.0
    return float(binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue)
