import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from marisec.neural import (
    AttentionParams,
    EncoderBlock,
    TransformerEncoder,
    attention_weights,
    feed_forward,
    grad_check,
    layer_norm,
    multi_head_attention,
    positional_encoding,
    self_attention,
)

D = torch.float64


def ref_attention(q, k, v):
    """Two-loop softmax(QK^T/sqrt(d))V."""
    L, d = q.shape
    out = np.zeros((L, v.shape[1]))
    for i in range(L):
        logits = np.array([sum(q[i, c] * k[j, c] for c in range(d)) / math.sqrt(d) for j in range(k.shape[0])])
        w = np.exp(logits - logits.max())
        w /= w.sum()
        for j in range(k.shape[0]):
            out[i] += w[j] * v[j]
    return out


def ref_mha(x, wq, wk, wv, wo, gamma, beta, eps=1e-5):
    heads = [ref_attention(x @ wq[h], x @ wk[h], x @ wv[h]) for h in range(wq.shape[0])]
    y = x + np.concatenate(heads, axis=1) @ wo
    out = np.empty_like(y)
    for i, row in enumerate(y):
        mu = row.mean()
        var = ((row - mu) ** 2).mean()
        out[i] = (row - mu) / math.sqrt(var + eps) * gamma + beta
    return out


def random_params(rng, h, d_e, d_k):
    t = lambda *s: torch.tensor(rng.standard_normal(s), dtype=D)  # noqa: E731
    return AttentionParams(t(h, d_e, d_k), t(h, d_e, d_k), t(h, d_e, d_k), t(h * d_k, d_e), t(d_e), t(d_e))


def test_positional_encoding_examples():
    pe = positional_encoding([0, 3], 8, 10000.0, D)
    assert torch.all(pe[0, 0::2] == 0) and torch.all(pe[0, 1::2] == 1)
    assert float(pe[1, 0]) == pytest.approx(math.sin(3.0))
    assert float(pe[1, 1]) == pytest.approx(math.cos(3.0))
    assert float(pe[1, 2]) == pytest.approx(math.sin(3.0 / 10000 ** (2 / 8)))
    pairs = pe[..., 0::2] ** 2 + pe[..., 1::2] ** 2
    torch.testing.assert_close(pairs, torch.ones_like(pairs))
    assert pe.abs().max() <= 1.0
    with pytest.raises(ValueError):
        positional_encoding([0], 7)
    with pytest.raises(ValueError):
        positional_encoding([0], 8, varpi=0.0)


def test_attention_trivial_cases(rng):
    v = torch.tensor(rng.standard_normal((1, 5)), dtype=D)
    q = torch.tensor(rng.standard_normal((3, 4)), dtype=D)
    k1 = torch.tensor(rng.standard_normal((1, 4)), dtype=D)
    torch.testing.assert_close(self_attention(q, k1, v), v.expand(3, 5))
    k = torch.ones(4, 4, dtype=D)
    v4 = torch.tensor(rng.standard_normal((4, 5)), dtype=D)
    torch.testing.assert_close(self_attention(q, k, v4), v4.mean(0).expand(3, 5))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 16), st.integers(0, 2**32 - 1))
def test_attention_rows_are_convex(L, d, seed):
    g = np.random.default_rng(seed)
    q, k, v = (torch.tensor(g.standard_normal((L, d)) * 3, dtype=D) for _ in range(3))
    w = attention_weights(q, k)
    assert torch.all(w >= 0)
    torch.testing.assert_close(w.sum(-1), torch.ones(L, dtype=D), atol=1e-12, rtol=0)
    out = self_attention(q, k, v)
    assert torch.all(out <= v.max(0).values + 1e-12) and torch.all(out >= v.min(0).values - 1e-12)


def test_attention_matches_reference(rng):
    q, k, v = (rng.standard_normal((4, 8)) for _ in range(3))
    out = self_attention(*(torch.tensor(a, dtype=D) for a in (q, k, v)))
    np.testing.assert_allclose(out.numpy(), ref_attention(q, k, v), atol=1e-10)


def test_attention_shape_errors():
    with pytest.raises(ValueError):
        self_attention(torch.zeros(2, 3), torch.zeros(2, 4), torch.zeros(2, 4))
    with pytest.raises(ValueError):
        self_attention(torch.zeros(2, 3), torch.zeros(2, 3), torch.zeros(3, 4))
    with pytest.raises(ValueError):
        AttentionParams(torch.zeros(2, 4, 2), torch.zeros(2, 4, 2), torch.zeros(2, 4, 2), torch.zeros(3, 4))


def test_mha_matches_reference_50_instances():
    g = np.random.default_rng(2024)
    for _ in range(50):
        L = int(g.integers(1, 7))
        h = int(g.choice([1, 2, 4]))
        d_e = int(g.choice([x for x in (4, 8, 12, 16) if x % h == 0]))
        p = random_params(g, h, d_e, d_e // h)
        x = g.standard_normal((L, d_e))
        out = multi_head_attention(torch.tensor(x, dtype=D), p)
        ref = ref_mha(x, *(t.numpy() for t in (p.w_q, p.w_k, p.w_v, p.w_o, p.ln_gamma, p.ln_beta)))
        np.testing.assert_allclose(out.numpy(), ref, atol=1e-10, rtol=0)


def test_single_head_is_attention_then_output_map(rng):
    p = random_params(rng, 1, 6, 6)
    x = torch.tensor(rng.standard_normal((5, 6)), dtype=D)
    want = self_attention(x @ p.w_q[0], x @ p.w_k[0], x @ p.w_v[0]) @ p.w_o
    torch.testing.assert_close(multi_head_attention(x, p, residual_norm=False), want)


def test_mha_permutation_equivariance(rng):
    p = random_params(rng, 2, 8, 4)
    tokens = torch.tensor(rng.standard_normal((5, 8)), dtype=D)
    pe = positional_encoding(torch.arange(5), 8, dtype=D)
    perm = torch.tensor([1, 0, 2, 3, 4])
    a = multi_head_attention(tokens + pe, p)
    b = multi_head_attention((tokens + pe)[perm], p)
    torch.testing.assert_close(b, a[perm], atol=1e-12, rtol=0)


def test_query_rows_equal_slice(rng):
    p = random_params(rng, 2, 8, 4)
    x = torch.tensor(rng.standard_normal((3, 6, 8)), dtype=D)
    full = multi_head_attention(x, p)
    last = multi_head_attention(x, p, query=x[:, -1:, :])
    torch.testing.assert_close(last[:, 0], full[:, -1], atol=1e-12, rtol=0)


def test_layer_norm_statistics(rng):
    x = torch.tensor(rng.standard_normal((7, 16)) * 5 + 3, dtype=D)
    y = layer_norm(x)
    assert y.mean(-1).abs().max() < 1e-6
    assert (y.var(-1, unbiased=False) - 1).abs().max() < 1e-6


def test_feed_forward_examples():
    eye = torch.eye(2, dtype=D)
    z = torch.zeros(2, dtype=D)
    x = torch.tensor([[0.5, 2.0]], dtype=D)
    torch.testing.assert_close(feed_forward(x, eye, z, eye, z), x)
    b2 = torch.tensor([0.3, -0.7], dtype=D)
    torch.testing.assert_close(feed_forward(-x, eye, z, eye, b2), b2.unsqueeze(0))
    w1 = torch.tensor([[1.0, -2.0], [3.0, 1.0]], dtype=D)
    b1 = torch.tensor([0.5, -1.0], dtype=D)
    w2 = torch.tensor([[2.0, 0.0], [1.0, -1.0]], dtype=D)
    # hidden: [1*1 + 2*3 + 0.5, 1*-2 + 2*1 - 1] = [7.5, -1] -> relu [7.5, 0]; out = [15, 0] + b2
    out = feed_forward(torch.tensor([[1.0, 2.0]], dtype=D), w1, b1, w2, b2)
    torch.testing.assert_close(out, torch.tensor([[15.3, -0.7]], dtype=D))


def test_blocks_are_deterministic(rng):
    torch.manual_seed(0)
    enc = TransformerEncoder(in_dim=5, d_model=16, heads=4, ffn_mult=2, layers=2, dtype=D)
    tok = torch.tensor(rng.standard_normal((3, 8, 5)), dtype=D)
    pos = torch.arange(8)
    a, b = enc(tok, pos), enc(tok, pos)
    assert a.shape == (3, 16)
    assert torch.equal(a, b)
    with pytest.raises(ValueError):
        EncoderBlock(d_model=10, heads=4)


def test_grad_check_linear_quadratic():
    torch.manual_seed(1)
    lin = torch.nn.Linear(4, 3, dtype=D)
    x = torch.randn(5, 4, dtype=D)
    assert grad_check(lin, [x], 1e-5) < 1e-9


def test_grad_check_zero_params():
    assert grad_check(torch.nn.ReLU(), [torch.randn(3, dtype=D)], 1e-5) == 0.0


def test_grad_check_flags_nonfinite():
    class Bad(torch.nn.Module):
        def __init__(self):
            super().__init__()
            self.w = torch.nn.Parameter(torch.zeros(2, dtype=D))

        def forward(self, x):
            return torch.sqrt(self.w) * x

    assert grad_check(Bad(), [torch.ones(2, dtype=D)], 1e-5) == math.inf


def test_grad_check_epsilon_range():
    lin = torch.nn.Linear(2, 2, dtype=D)
    for eps in (1e-8, 1e-3):
        with pytest.raises(ValueError):
            grad_check(lin, [torch.randn(1, 2, dtype=D)], eps)


def test_grad_check_detects_wrong_gradient():
    class Wrong(torch.autograd.Function):
        @staticmethod
        def forward(ctx, x):
            return x * 2

        @staticmethod
        def backward(ctx, g):
            return g * 3

    class M(torch.nn.Module):
        def __init__(self):
            super().__init__()
            self.w = torch.nn.Parameter(torch.ones(3, dtype=D))

        def forward(self, x):
            return Wrong.apply(self.w) * x

    assert grad_check(M(), [torch.ones(3, dtype=D)], 1e-5) > 0.1


def test_grad_check_encoder_block():
    torch.manual_seed(3)
    blk = EncoderBlock(d_model=8, heads=2, ffn_mult=2, dtype=D)
    x = torch.randn(2, 4, 8, dtype=D)
    assert grad_check(blk, [x], 1e-5) < 1e-4


@pytest.mark.slow
def test_grad_check_default_width_block():
    torch.manual_seed(4)
    blk = EncoderBlock(d_model=64, heads=8, ffn_mult=8, dtype=D)
    x = torch.randn(1, 4, 64, dtype=D)
    assert grad_check(blk, [x], 1e-5) < 1e-4
