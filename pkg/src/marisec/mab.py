"""Epsilon-greedy bandit over scalarisation weights."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

DEFAULT_ARMS = tuple(round(0.1 * i, 1) for i in range(1, 10))


@dataclass
class BanditState:
    arms: List[float] = field(default_factory=lambda: list(DEFAULT_ARMS))
    epsilon: float = 0.1
    values: np.ndarray = None
    counts: np.ndarray = None

    def __post_init__(self):
        if len(self.arms) == 0:
            raise ValueError("bandit needs at least one arm")
        if any(not 0.0 <= a <= 1.0 for a in self.arms):
            raise ValueError("every arm weight must lie in [0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        n = len(self.arms)
        if self.values is None:
            self.values = np.zeros(n)
        if self.counts is None:
            self.counts = np.zeros(n, dtype=np.int64)

    def weights(self, arm: int):
        t1 = float(self.arms[arm])
        return t1, 1.0 - t1

    @property
    def total_pulls(self) -> int:
        return int(self.counts.sum())

    def to_dict(self) -> dict:
        return {
            "arms": list(self.arms),
            "epsilon": self.epsilon,
            "values": self.values.tolist(),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BanditState":
        return cls(list(d["arms"]), d["epsilon"], np.array(d["values"], dtype=float), np.array(d["counts"], dtype=np.int64))


def select_arm(state: BanditState, rng: np.random.Generator) -> int:
    """Explore uniformly with probability epsilon, else exploit (lowest index wins ties)."""
    n = len(state.arms)
    if n == 0:
        raise ValueError("empty arm set")
    # always consume both variates so the stream does not depend on the branch
    u = rng.random()
    j = int(rng.integers(n))
    if u < state.epsilon:
        return j
    return int(np.argmax(state.values))


def record_pull(state: BanditState, arm: int) -> BanditState:
    state.counts[arm] += 1
    return state


def update_arm(state: BanditState, arm: int, reward: float) -> BanditState:
    """Incremental mean; the pull must already be counted."""
    n = state.counts[arm]
    if n <= 0:
        raise ValueError(f"arm {arm} has not been pulled")
    state.values[arm] += (reward - state.values[arm]) / n
    return state


def pull(state: BanditState, arm: int, reward: float) -> BanditState:
    """Count a pull of ``arm`` and fold in its reward."""
    return update_arm(record_pull(state, arm), arm, reward)
