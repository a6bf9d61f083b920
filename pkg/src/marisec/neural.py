"""Transformer building blocks written against plain tensors.

The functional forms (``self_attention``, ``multi_head_attention``,
``feed_forward``) are what the encoder module calls, so tests of the
functions also cover the module. Everything is dtype-agnostic; gradient
checks run in float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import torch
from torch import nn


def positional_encoding(positions, d_e: int, varpi: float = 10000.0, dtype=torch.float32) -> torch.Tensor:
    """Sinusoidal encoding: even dims sin(P / varpi^(2i/d_e)), odd dims cos(...)."""
    if d_e % 2:
        raise ValueError("d_e must be even")
    if not varpi > 0:
        raise ValueError("varpi must be positive")
    pos = torch.as_tensor(positions, dtype=dtype).unsqueeze(-1)
    i2 = torch.arange(0, d_e, 2, dtype=dtype)
    angle = pos / varpi ** (i2 / d_e)
    pe = torch.empty(*angle.shape[:-1], d_e, dtype=dtype)
    pe[..., 0::2] = torch.sin(angle)
    pe[..., 1::2] = torch.cos(angle)
    return pe


def attention_weights(q: torch.Tensor, k: torch.Tensor) -> torch.Tensor:
    if q.shape[-1] != k.shape[-1]:
        raise ValueError(f"query/key width mismatch: {q.shape} vs {k.shape}")
    return torch.softmax(q @ k.transpose(-1, -2) / math.sqrt(q.shape[-1]), dim=-1)


def self_attention(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
    """softmax(Q K^T / sqrt(d_k)) V over the last two dims."""
    if k.shape[-2] != v.shape[-2]:
        raise ValueError(f"key/value length mismatch: {k.shape} vs {v.shape}")
    return attention_weights(q, k) @ v


def layer_norm(x: torch.Tensor, gamma=None, beta=None, eps: float = 1e-5) -> torch.Tensor:
    mu = x.mean(dim=-1, keepdim=True)
    var = x.var(dim=-1, unbiased=False, keepdim=True)
    y = (x - mu) / torch.sqrt(var + eps)
    if gamma is not None:
        y = y * gamma
    if beta is not None:
        y = y + beta
    return y


def feed_forward(x: torch.Tensor, w1, b1, w2, b2) -> torch.Tensor:
    return torch.relu(x @ w1 + b1) @ w2 + b2


@dataclass
class AttentionParams:
    w_q: torch.Tensor  # (h, d_e, d_k)
    w_k: torch.Tensor
    w_v: torch.Tensor
    w_o: torch.Tensor  # (h * d_k, d_e)
    ln_gamma: Optional[torch.Tensor] = None
    ln_beta: Optional[torch.Tensor] = None

    def __post_init__(self):
        h, d_e, d_k = self.w_q.shape
        if self.w_k.shape != (h, d_e, d_k) or self.w_v.shape != (h, d_e, d_k):
            raise ValueError("per-head projections must share shape (h, d_e, d_k)")
        if self.w_o.shape != (h * d_k, d_e):
            raise ValueError(f"w_o must be {(h * d_k, d_e)}, got {tuple(self.w_o.shape)}")

    @property
    def heads(self) -> int:
        return self.w_q.shape[0]


def _heads(seq: torch.Tensor, w: torch.Tensor) -> torch.Tensor:
    # (..., L, d_e) x (h, d_e, d_k) -> (..., h, L, d_k)
    return torch.einsum("...ld,hdk->...hlk", seq, w)


def multi_head_attention(
    seq: torch.Tensor,
    params: AttentionParams,
    residual_norm: bool = True,
    query: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Concatenated per-head attention mapped through W^O.

    With ``residual_norm`` the result is LayerNorm(query + attention). If
    ``query`` is given, only those rows attend (keys/values still span
    ``seq``), which equals slicing the full output at those rows.
    """
    if seq.shape[-1] != params.w_q.shape[1]:
        raise ValueError(f"sequence width {seq.shape[-1]} does not match params {params.w_q.shape[1]}")
    qs = seq if query is None else query
    heads = self_attention(_heads(qs, params.w_q), _heads(seq, params.w_k), _heads(seq, params.w_v))
    concat = heads.transpose(-3, -2).reshape(*qs.shape[:-1], -1)
    out = concat @ params.w_o
    if residual_norm:
        out = layer_norm(qs + out, params.ln_gamma, params.ln_beta)
    return out


class EncoderBlock(nn.Module):
    """Attention with residual + layer norm, followed by a residual FFN."""

    def __init__(self, d_model: int = 64, heads: int = 8, ffn_mult: int = 8, dtype=torch.float32):
        super().__init__()
        if d_model % heads:
            raise ValueError("heads must divide d_model")
        d_k = d_model // heads
        s = 1.0 / math.sqrt(d_model)
        kw = dict(dtype=dtype)
        self.w_q = nn.Parameter(torch.randn(heads, d_model, d_k, **kw) * s)
        self.w_k = nn.Parameter(torch.randn(heads, d_model, d_k, **kw) * s)
        self.w_v = nn.Parameter(torch.randn(heads, d_model, d_k, **kw) * s)
        self.w_o = nn.Parameter(torch.randn(heads * d_k, d_model, **kw) * s)
        self.ln_gamma = nn.Parameter(torch.ones(d_model, **kw))
        self.ln_beta = nn.Parameter(torch.zeros(d_model, **kw))
        hid = ffn_mult * d_model
        self.w1 = nn.Parameter(torch.randn(d_model, hid, **kw) * s)
        self.b1 = nn.Parameter(torch.zeros(hid, **kw))
        self.w2 = nn.Parameter(torch.randn(hid, d_model, **kw) / math.sqrt(hid))
        self.b2 = nn.Parameter(torch.zeros(d_model, **kw))

    def attention_params(self) -> AttentionParams:
        return AttentionParams(self.w_q, self.w_k, self.w_v, self.w_o, self.ln_gamma, self.ln_beta)

    def forward(self, x: torch.Tensor, last_only: bool = False) -> torch.Tensor:
        query = x[..., -1:, :] if last_only else None
        a = multi_head_attention(x, self.attention_params(), residual_norm=True, query=query)
        out = a + feed_forward(a, self.w1, self.b1, self.w2, self.b2)
        return out[..., 0, :] if last_only else out


class TransformerEncoder(nn.Module):
    """Embeds a window of tokens and returns the representation of the newest one."""

    def __init__(
        self,
        in_dim: int,
        d_model: int = 64,
        heads: int = 8,
        ffn_mult: int = 8,
        layers: int = 1,
        varpi: float = 10000.0,
        dtype=torch.float32,
    ):
        super().__init__()
        if layers < 1:
            raise ValueError("need at least one layer")
        self.embed = nn.Linear(in_dim, d_model, dtype=dtype)
        self.blocks = nn.ModuleList(EncoderBlock(d_model, heads, ffn_mult, dtype) for _ in range(layers))
        self.d_model = d_model
        self.varpi = varpi
        self.out_dim = d_model

    def forward(self, tokens: torch.Tensor, positions: torch.Tensor) -> torch.Tensor:
        x = self.embed(tokens) + positional_encoding(positions, self.d_model, self.varpi, tokens.dtype)
        for blk in self.blocks[:-1]:
            x = blk(x)
        return self.blocks[-1](x, last_only=True)


def _rel_err(a: torch.Tensor, b: torch.Tensor) -> float:
    na, nb = float(a.norm()), float(b.norm())
    scale = max(na, nb)
    if scale < 1e-9:
        return 0.0
    return float((a - b).norm()) / scale


def grad_check(block, inputs: Sequence[torch.Tensor], epsilon: float = 1e-5) -> float:
    """Worst per-tensor relative error between autograd and central differences.

    The loss is 0.5 * sum(output**2). Returns ``inf`` if any analytic
    gradient is non-finite and 0.0 for a block without parameters.
    """
    if not 1e-7 <= epsilon <= 1e-4:
        raise ValueError("epsilon must lie in [1e-7, 1e-4]")
    params = [p for p in block.parameters() if p.requires_grad]
    if not params:
        return 0.0

    def loss():
        return 0.5 * (block(*inputs) ** 2).sum()

    block.zero_grad()
    loss().backward()
    analytic = [p.grad.detach().clone() for p in params]
    if any(not torch.isfinite(g).all() for g in analytic):
        return math.inf
    worst = 0.0
    with torch.no_grad():
        for p, g in zip(params, analytic):
            numeric = torch.zeros_like(p)
            flat, nflat = p.view(-1), numeric.view(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + epsilon
                up = loss().item()
                flat[i] = orig - epsilon
                down = loss().item()
                flat[i] = orig
                nflat[i] = (up - down) / (2.0 * epsilon)
            if not torch.isfinite(numeric).all():
                return math.inf
            worst = max(worst, _rel_err(g, numeric))
    return worst
