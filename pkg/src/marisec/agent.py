"""Multi-objective soft actor-critic with a transformer state encoder.

Each objective m has its own soft-Q network, state-value network and a
softly-tracked target value network. The actor is a tanh-squashed Gaussian
over the unit action box, trained on the weighted sum of the per-objective
Q values. Networks of the two objectives are stored as stacked members of a
single module; the members never share parameters, so the loss of one
objective cannot move the other's weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
from torch import nn

from .neural import TransformerEncoder

LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0
N_OBJ = 2


class NonFiniteError(RuntimeError):
    pass


@dataclass(frozen=True)
class AgentConfig:
    obs_dim: int = 31
    act_dim: int = 4
    transformer: bool = True
    d_model: int = 64
    heads: int = 8
    ffn_mult: int = 8
    layers: int = 1
    window: int = 8
    varpi: float = 10000.0
    hidden: int = 128
    alpha: float = 0.2
    gamma: float = 0.9
    kappa: float = 0.005
    lr: float = 0.003
    batch_size: int = 128
    buffer_capacity: int = 100_000

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 < self.kappa <= 1.0:
            raise ValueError("kappa must lie in (0, 1]")
        if self.window < 1 or self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("window, batch size and capacity must be positive, capacity >= batch")

    @property
    def token_dim(self) -> int:
        return self.obs_dim + self.act_dim


class StackedMLP(nn.Module):
    """``members`` independent ReLU MLPs evaluated with batched matmuls."""

    def __init__(self, members: int, in_dim: int, hidden: int, out_dim: int, depth: int = 2):
        super().__init__()
        dims = [in_dim] + [hidden] * depth + [out_dim]
        self.weights = nn.ParameterList()
        self.biases = nn.ParameterList()
        for a, b in zip(dims[:-1], dims[1:]):
            bound = 1.0 / math.sqrt(a)
            self.weights.append(nn.Parameter(torch.empty(members, a, b).uniform_(-bound, bound)))
            self.biases.append(nn.Parameter(torch.empty(members, 1, b).uniform_(-bound, bound)))
        self.members = members

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """x: (members, B, in) or (B, in) shared by all members -> (members, B, out)."""
        if x.dim() == 2:
            x = x.unsqueeze(0).expand(self.members, -1, -1)
        n = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            x = torch.baddbmm(b, x, w)
            if i < n - 1:
                x = torch.relu(x)
        return x

    def member_parameters(self, m: int):
        return [p[m] for p in list(self.weights) + list(self.biases)]


class SquashedGaussianActor(nn.Module):
    def __init__(self, feat_dim: int, act_dim: int, hidden: int):
        super().__init__()
        self.net = StackedMLP(1, feat_dim, hidden, 2 * act_dim)
        self.act_dim = act_dim

    def forward(self, feat: torch.Tensor):
        out = self.net(feat)[0]
        mean, log_std = out.split(self.act_dim, dim=-1)
        return mean, log_std.clamp(LOG_STD_MIN, LOG_STD_MAX)

    def sample(self, feat: torch.Tensor, generator: Optional[torch.Generator] = None, deterministic: bool = False):
        """Reparameterised tanh-Gaussian sample and its log-density on the unit box."""
        mean, log_std = self(feat)
        if deterministic:
            return torch.tanh(mean), None
        std = log_std.exp()
        eps = torch.randn(mean.shape, generator=generator, dtype=mean.dtype)
        pre = mean + std * eps
        act = torch.tanh(pre)
        return act, squashed_log_prob(pre, mean, log_std)


def squashed_log_prob(pre: torch.Tensor, mean: torch.Tensor, log_std: torch.Tensor) -> torch.Tensor:
    """log N(pre; mean, std) minus log|d tanh/d pre|, summed over action dims."""
    z = (pre - mean) / log_std.exp()
    gauss = -0.5 * z**2 - log_std - 0.5 * math.log(2.0 * math.pi)
    # log(1 - tanh(x)^2) = 2 (log 2 - x - softplus(-2x)), stable for large |x|
    corr = 2.0 * (math.log(2.0) - pre - nn.functional.softplus(-2.0 * pre))
    return (gauss - corr).sum(dim=-1)


class ReplayBuffer:
    """FIFO ring buffer of windowed transitions with a seeded sampler."""

    def __init__(self, capacity: int, window: int, token_dim: int, act_dim: int, rng: np.random.Generator):
        self.capacity = capacity
        self.rng = rng
        self.tokens = np.zeros((capacity, window, token_dim), dtype=np.float32)
        self.positions = np.zeros((capacity, window), dtype=np.float32)
        self.next_token = np.zeros((capacity, token_dim), dtype=np.float32)
        self.next_position = np.zeros(capacity, dtype=np.float32)
        self.actions = np.zeros((capacity, act_dim), dtype=np.float32)
        self.rewards = np.zeros((capacity, N_OBJ), dtype=np.float32)
        self.dones = np.zeros(capacity, dtype=np.float32)
        self.size = 0
        self.ptr = 0

    def __len__(self) -> int:
        return self.size

    def add(self, tokens, positions, action, reward, next_token, next_position, done) -> None:
        i = self.ptr
        self.tokens[i] = tokens
        self.positions[i] = positions
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_token[i] = next_token
        self.next_position[i] = next_position
        self.dones[i] = float(done)
        self.ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, n: int) -> np.ndarray:
        if n > self.size:
            raise ValueError(f"cannot sample {n} from {self.size} transitions")
        return self.rng.choice(self.size, size=n, replace=False)

    def batch(self, idx: np.ndarray) -> dict:
        tok = self.tokens[idx]
        pos = self.positions[idx]
        next_tok = np.concatenate([tok[:, 1:], self.next_token[idx][:, None]], axis=1)
        next_pos = np.concatenate([pos[:, 1:], self.next_position[idx][:, None]], axis=1)
        t = torch.from_numpy
        return {
            "tokens": t(tok),
            "positions": t(pos),
            "next_tokens": t(next_tok),
            "next_positions": t(next_pos),
            "actions": t(self.actions[idx]),
            "rewards": t(self.rewards[idx]),
            "dones": t(self.dones[idx]),
        }

    def sample(self, n: int) -> dict:
        return self.batch(self.sample_indices(n))

    def state_dict(self) -> dict:
        n = self.size
        return {
            "size": n,
            "ptr": self.ptr,
            "tokens": self.tokens[:n].copy(),
            "positions": self.positions[:n].copy(),
            "next_token": self.next_token[:n].copy(),
            "next_position": self.next_position[:n].copy(),
            "actions": self.actions[:n].copy(),
            "rewards": self.rewards[:n].copy(),
            "dones": self.dones[:n].copy(),
        }

    def load_state_dict(self, d: dict) -> None:
        n = d["size"]
        for k in ("tokens", "positions", "next_token", "next_position", "actions", "rewards", "dones"):
            getattr(self, k)[:n] = d[k]
        self.size, self.ptr = n, d["ptr"]


class FeatureExtractor(nn.Module):
    """Window encoder, or the newest raw observation when the transformer is off."""

    def __init__(self, cfg: AgentConfig):
        super().__init__()
        self.obs_dim = cfg.obs_dim
        if cfg.transformer:
            self.encoder = TransformerEncoder(cfg.token_dim, cfg.d_model, cfg.heads, cfg.ffn_mult, cfg.layers, cfg.varpi)
            self.out_dim = cfg.d_model
        else:
            self.encoder = None
            self.out_dim = cfg.obs_dim

    def forward(self, tokens: torch.Tensor, positions: torch.Tensor) -> torch.Tensor:
        if self.encoder is None:
            return tokens[..., -1, : self.obs_dim]
        return self.encoder(tokens, positions)


def soft_update(target: nn.Module, source: nn.Module, kappa: float) -> None:
    """target <- kappa * source + (1 - kappa) * target."""
    if not 0.0 < kappa <= 1.0:
        raise ValueError("kappa must lie in (0, 1]")
    with torch.no_grad():
        for pt, ps in zip(target.parameters(), source.parameters()):
            pt.mul_(1.0 - kappa).add_(ps, alpha=kappa)


def q_targets(rewards: torch.Tensor, dones: torch.Tensor, v_next: torch.Tensor, gamma: float) -> torch.Tensor:
    """R_m + gamma * (1 - done) * V_target_m(s'); shapes (B, M) and (B,)."""
    return rewards + gamma * (1.0 - dones).unsqueeze(-1) * v_next


def q_loss(q_pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Per-objective half mean-squared error; inputs (B, M) -> (M,)."""
    return 0.5 * ((q_pred - target.detach()) ** 2).mean(dim=0)


def value_loss(v_pred: torch.Tensor, q_new: torch.Tensor, log_pi: torch.Tensor, alpha: float) -> torch.Tensor:
    """Per-objective half MSE to Q(s, a~) - alpha * log pi(a~|s)."""
    target = (q_new - alpha * log_pi.unsqueeze(-1)).detach()
    return 0.5 * ((v_pred - target) ** 2).mean(dim=0)


def policy_loss(q_new: torch.Tensor, log_pi: torch.Tensor, alpha: float, weights) -> torch.Tensor:
    """mean(alpha * log pi - sum_m tau_m Q_m) with weights on the simplex."""
    w = torch.as_tensor(weights, dtype=q_new.dtype)
    if torch.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-9:
        raise ValueError(f"weights must lie on the simplex, got {weights}")
    return (alpha * log_pi - (q_new * w).sum(dim=-1)).mean()


class MOSACAgent(nn.Module):
    """All learnable pieces plus their optimisers."""

    def __init__(self, cfg: AgentConfig):
        super().__init__()
        self.cfg = cfg
        self.features = FeatureExtractor(cfg)
        f = self.features.out_dim
        self.actor = SquashedGaussianActor(f, cfg.act_dim, cfg.hidden)
        self.q = StackedMLP(N_OBJ, f + cfg.act_dim, cfg.hidden, 1)
        self.v = StackedMLP(N_OBJ, f, cfg.hidden, 1)
        self.v_target = StackedMLP(N_OBJ, f, cfg.hidden, 1)
        self.v_target.load_state_dict(self.v.state_dict())
        for p in self.v_target.parameters():
            p.requires_grad_(False)
        self.opt_critic = torch.optim.Adam(list(self.q.parameters()) + list(self.features.parameters()), lr=cfg.lr, foreach=True)
        self.opt_value = torch.optim.Adam(self.v.parameters(), lr=cfg.lr, foreach=True)
        self.opt_actor = torch.optim.Adam(self.actor.parameters(), lr=cfg.lr, foreach=True)

    def q_values(self, feat: torch.Tensor, act: torch.Tensor) -> torch.Tensor:
        return self.q(torch.cat([feat, act], dim=-1))[..., 0].T  # (B, M)

    def v_values(self, feat: torch.Tensor, target: bool = False) -> torch.Tensor:
        net = self.v_target if target else self.v
        return net(feat)[..., 0].T

    @torch.no_grad()
    def act(self, tokens, positions, generator=None, deterministic=False) -> np.ndarray:
        tok = torch.as_tensor(tokens, dtype=torch.float32).unsqueeze(0)
        pos = torch.as_tensor(positions, dtype=torch.float32).unsqueeze(0)
        a, _ = self.actor.sample(self.features(tok, pos), generator, deterministic)
        return a[0].numpy().astype(np.float64)

    def update(self, batch: dict, weights, generator: Optional[torch.Generator] = None) -> dict:
        """One gradient step in the order value -> target -> critic -> actor."""
        cfg = self.cfg
        feat = self.features(batch["tokens"], batch["positions"])
        with torch.no_grad():
            feat_next = self.features(batch["next_tokens"], batch["next_positions"])
        fd = feat.detach()

        new_a, log_pi = self.actor.sample(fd, generator)

        with torch.no_grad():
            q_new_old = self.q_values(fd, new_a)
        lv = value_loss(self.v_values(fd), q_new_old, log_pi.detach(), cfg.alpha)
        self.opt_value.zero_grad(set_to_none=True)
        lv.sum().backward()
        self.opt_value.step()

        soft_update(self.v_target, self.v, cfg.kappa)

        with torch.no_grad():
            target = q_targets(batch["rewards"], batch["dones"], self.v_values(feat_next, target=True), cfg.gamma)
        lq = q_loss(self.q_values(feat, batch["actions"]), target)
        self.opt_critic.zero_grad(set_to_none=True)
        lq.sum().backward()
        self.opt_critic.step()

        for p in self.q.parameters():
            p.requires_grad_(False)
        lp = policy_loss(self.q_values(fd, new_a), log_pi, cfg.alpha, weights)
        self.opt_actor.zero_grad(set_to_none=True)
        lp.backward()
        self.opt_actor.step()
        for p in self.q.parameters():
            p.requires_grad_(True)

        out = {
            "loss_q1": float(lq[0].detach()),
            "loss_q2": float(lq[1].detach()),
            "loss_v1": float(lv[0].detach()),
            "loss_v2": float(lv[1].detach()),
            "loss_pi": float(lp.detach()),
        }
        if not all(math.isfinite(v) for v in out.values()):
            raise NonFiniteError(f"non-finite loss: {out}")
        return out


class TokenWindow:
    """Sliding window of (observation, previous action) tokens for one episode."""

    def __init__(self, window: int, obs_dim: int, act_dim: int):
        self.window = window
        self.act_dim = act_dim
        self.tokens = np.zeros((window, obs_dim + act_dim), dtype=np.float32)
        self.positions = np.zeros(window, dtype=np.float32)

    @staticmethod
    def token(obs, prev_action) -> np.ndarray:
        return np.concatenate([obs, prev_action]).astype(np.float32)

    def reset(self, obs) -> None:
        tok = self.token(obs, np.zeros(self.act_dim))
        self.tokens[:] = tok
        self.positions[:] = 0.0

    def push(self, token, position) -> None:
        self.tokens = np.concatenate([self.tokens[1:], token[None]], axis=0)
        self.positions = np.append(self.positions[1:], np.float32(position))
