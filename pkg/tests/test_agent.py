import math

import numpy as np
import pytest
import torch

from marisec.agent import (
    AgentConfig,
    MOSACAgent,
    NonFiniteError,
    ReplayBuffer,
    SquashedGaussianActor,
    StackedMLP,
    TokenWindow,
    policy_loss,
    q_loss,
    q_targets,
    soft_update,
    squashed_log_prob,
    value_loss,
)
from marisec.neural import grad_check

D = torch.float64


def small_cfg(**kw):
    base = dict(d_model=16, heads=4, ffn_mult=2, window=4, hidden=32, batch_size=16, buffer_capacity=64)
    base.update(kw)
    return AgentConfig(**base)


def fill_buffer(buf, n, rng, token_dim=35, act_dim=4, window=4):
    for i in range(n):
        buf.add(
            rng.standard_normal((window, token_dim)),
            np.arange(window, dtype=float) + i,
            rng.uniform(-1, 1, act_dim),
            rng.standard_normal(2),
            rng.standard_normal(token_dim),
            window + i,
            i % 10 == 9,
        )


def test_q_target_examples():
    t = q_targets(torch.tensor([[1.0, 1.0]]), torch.tensor([0.0]), torch.tensor([[2.0, 2.0]]), 0.9)
    torch.testing.assert_close(t, torch.tensor([[2.8, 2.8]]))
    t = q_targets(torch.tensor([[1.0, -3.0]]), torch.tensor([1.0]), torch.tensor([[2.0, 5.0]]), 0.9)
    torch.testing.assert_close(t, torch.tensor([[1.0, -3.0]]))


def test_q_loss_examples():
    q = torch.tensor([[1.0, 2.0], [3.0, 4.0]])
    assert torch.equal(q_loss(q, q.clone()), torch.zeros(2))
    # per objective: 0.5 * mean([1, 9]) = 2.5 and 0.5 * mean([0, 4]) = 1.0
    torch.testing.assert_close(q_loss(q, torch.tensor([[0.0, 2.0], [0.0, 2.0]])), torch.tensor([2.5, 1.0]))


def test_value_loss_examples():
    q = torch.tensor([[1.0, -2.0]])
    logp = torch.tensor([-0.7])
    assert torch.equal(value_loss(q.clone(), q, logp, 0.0), torch.zeros(2))
    # single transition: target = Q - alpha log pi = (1.14, -1.86); V = (1, -2)
    torch.testing.assert_close(value_loss(q, q, logp, 0.2), torch.tensor([0.5 * 0.14**2] * 2))
    b1 = (q - 0.2 * logp.unsqueeze(-1)) - q
    b2 = (q - 0.4 * logp.unsqueeze(-1)) - q
    torch.testing.assert_close(b2, 2 * b1)


def test_policy_loss_examples():
    q = torch.tensor([[2.0, 7.0], [4.0, -1.0]])
    logp = torch.tensor([0.5, -0.5])
    torch.testing.assert_close(policy_loss(q, logp, 0.2, (1.0, 0.0)), (0.2 * logp - q[:, 0]).mean())
    shifted = policy_loss(q + 3.0, logp, 0.2, (0.3, 0.7))
    torch.testing.assert_close(shifted, policy_loss(q, logp, 0.2, (0.3, 0.7)) - 3.0)
    assert policy_loss(q + 0.1, logp, 0.2, (0.3, 0.7)) < policy_loss(q, logp, 0.2, (0.3, 0.7))
    with pytest.raises(ValueError):
        policy_loss(q, logp, 0.2, (0.6, 0.6))


def test_soft_update_examples():
    tgt, src = StackedMLP(2, 3, 4, 1), StackedMLP(2, 3, 4, 1)
    with torch.no_grad():
        for p in tgt.parameters():
            p.zero_()
        for p in src.parameters():
            p.fill_(1.0)
    soft_update(tgt, src, 0.005)
    assert all(torch.allclose(p, torch.full_like(p, 0.005)) for p in tgt.parameters())
    soft_update(tgt, src, 1.0)
    assert all(torch.equal(p, torch.ones_like(p)) for p in tgt.parameters())
    with pytest.raises(ValueError):
        soft_update(tgt, src, 0.0)


def test_target_lag_is_geometric():
    torch.manual_seed(0)
    tgt, src = StackedMLP(2, 3, 4, 1).double(), StackedMLP(2, 3, 4, 1).double()
    gap0 = torch.cat([(a - b).detach().flatten() for a, b in zip(tgt.parameters(), src.parameters())]).norm()
    for _ in range(50):
        soft_update(tgt, src, 0.05)
    gap = torch.cat([(a - b).detach().flatten() for a, b in zip(tgt.parameters(), src.parameters())]).norm()
    assert float(gap) == pytest.approx(0.95**50 * float(gap0), rel=1e-9)


def test_stacked_members_are_independent():
    net = StackedMLP(2, 3, 8, 1)
    x = torch.randn(5, 3)
    out = net(x)
    for m in range(2):
        solo = x
        for i, (w, b) in enumerate(zip(net.weights, net.biases)):
            solo = solo @ w[m] + b[m]
            if i < len(net.weights) - 1:
                solo = torch.relu(solo)
        torch.testing.assert_close(out[m], solo)


def test_actor_deterministic_and_zero_std_limit():
    torch.manual_seed(1)
    actor = SquashedGaussianActor(6, 4, 16)
    feat = torch.randn(3, 6)
    mean, _ = actor(feat)
    det, logp = actor.sample(feat, deterministic=True)
    assert logp is None
    torch.testing.assert_close(det, torch.tanh(mean))
    with torch.no_grad():
        actor.net.biases[-1][..., 4:] = -1e4  # log_std clamps to its floor
        actor.net.weights[-1][..., 4:] = 0.0
    a, logp = actor.sample(feat, torch.Generator().manual_seed(0))
    torch.testing.assert_close(a, torch.tanh(mean), atol=1e-6, rtol=0)
    assert torch.isfinite(logp).all()


def test_actions_inside_unit_box():
    torch.manual_seed(2)
    actor = SquashedGaussianActor(6, 4, 16)
    with torch.no_grad():
        actor.net.biases[-1][..., :4] = 5.0
    a, logp = actor.sample(torch.randn(1000, 6) * 10, torch.Generator().manual_seed(1))
    assert torch.all(a.abs() <= 1.0)
    assert torch.isfinite(logp).all()


def test_squashed_density_integrates_to_one():
    mean, log_std = torch.tensor([[0.4]], dtype=D), torch.tensor([[-0.3]], dtype=D)
    a = torch.linspace(-1 + 1e-9, 1 - 1e-9, 400_001, dtype=D)
    pre = torch.atanh(a).unsqueeze(-1)
    dens = squashed_log_prob(pre, mean.expand(len(a), 1), log_std.expand(len(a), 1)).exp()
    assert float(torch.trapezoid(dens, a)) == pytest.approx(1.0, abs=1e-4)
    # brute-force density of tanh(N(mean, std)) at one point
    x = 0.3
    std = math.exp(-0.3)
    ref = math.exp(-0.5 * ((x - 0.4) / std) ** 2) / (std * math.sqrt(2 * math.pi)) / (1 - math.tanh(x) ** 2)
    got = squashed_log_prob(torch.tensor([[x]], dtype=D), mean, log_std).exp()
    assert float(got) == pytest.approx(ref, rel=1e-12)
    assert float(got) <= float(dens.max()) * (1 + 1e-9)


def test_policy_loss_gradient_check():
    torch.manual_seed(3)
    actor = SquashedGaussianActor(3, 2, 8).double()
    q = StackedMLP(2, 5, 8, 1).double()
    for p in q.parameters():
        p.requires_grad_(False)

    class Loss(torch.nn.Module):
        def __init__(self):
            super().__init__()
            self.actor = actor

        def forward(self, feat, eps):
            mean, log_std = self.actor(feat)
            pre = mean + log_std.exp() * eps
            logp = squashed_log_prob(pre, mean, log_std)
            qv = q(torch.cat([feat, torch.tanh(pre)], -1))[..., 0].T
            return policy_loss(qv, logp, 0.2, (0.3, 0.7))

    feat, eps = torch.randn(6, 3, dtype=D), torch.randn(6, 2, dtype=D)
    assert grad_check(Loss(), [feat, eps], 1e-6) < 1e-4


def test_critic_gradients_do_not_mix():
    torch.manual_seed(4)
    agent = MOSACAgent(small_cfg())
    tok = torch.randn(8, 4, 35)
    pos = torch.arange(4.0).expand(8, 4)
    feat = agent.features(tok, pos)
    lq = q_loss(agent.q_values(feat, torch.rand(8, 4)), torch.randn(8, 2))
    lq[0].backward()
    for p in agent.q.parameters():
        assert p.grad[0].abs().sum() > 0
        assert torch.count_nonzero(p.grad[1]) == 0


def test_replay_fifo_and_sampling(rng):
    buf = ReplayBuffer(10, 4, 35, 4, np.random.default_rng(0))
    fill_buffer(buf, 15, rng)
    assert len(buf) == 10 and buf.ptr == 5
    # slots 0..4 were overwritten by transitions 10..14
    assert buf.next_position[0] == 4 + 10 and buf.next_position[5] == 4 + 5
    idx = buf.sample_indices(10)
    assert sorted(idx) == list(range(10))
    with pytest.raises(ValueError):
        buf.sample_indices(11)


def test_replay_sampler_deterministic(rng):
    a = ReplayBuffer(50, 4, 35, 4, np.random.default_rng(7))
    b = ReplayBuffer(50, 4, 35, 4, np.random.default_rng(7))
    fill_buffer(a, 40, np.random.default_rng(1))
    fill_buffer(b, 40, np.random.default_rng(1))
    for _ in range(5):
        np.testing.assert_array_equal(a.sample_indices(16), b.sample_indices(16))


def test_replay_next_window_shift(rng):
    buf = ReplayBuffer(8, 4, 35, 4, np.random.default_rng(0))
    fill_buffer(buf, 3, rng)
    bt = buf.batch(np.array([1]))
    torch.testing.assert_close(bt["next_tokens"][0, :3], bt["tokens"][0, 1:])
    torch.testing.assert_close(bt["next_tokens"][0, 3], torch.from_numpy(buf.next_token[1]))
    assert bt["next_positions"][0].tolist() == [2.0, 3.0, 4.0, 5.0]


def test_replay_state_round_trip(rng):
    a = ReplayBuffer(8, 4, 35, 4, np.random.default_rng(0))
    fill_buffer(a, 5, rng)
    b = ReplayBuffer(8, 4, 35, 4, np.random.default_rng(0))
    b.load_state_dict(a.state_dict())
    assert (b.size, b.ptr) == (a.size, a.ptr)
    np.testing.assert_array_equal(b.tokens, a.tokens)


@pytest.mark.parametrize("transformer", [True, False])
def test_update_runs_and_targets_only_soft_track(transformer, rng):
    torch.manual_seed(5)
    agent = MOSACAgent(small_cfg(transformer=transformer))
    assert agent.features.out_dim == (16 if transformer else 31)
    buf = ReplayBuffer(64, 4, 35, 4, np.random.default_rng(0))
    fill_buffer(buf, 32, rng)
    before_v = [p.detach().clone() for p in agent.v.parameters()]
    before_t = [p.detach().clone() for p in agent.v_target.parameters()]
    out = agent.update(buf.sample(16), (0.4, 0.6), torch.Generator().manual_seed(0))
    assert set(out) == {"loss_q1", "loss_q2", "loss_v1", "loss_v2", "loss_pi"}
    assert all(math.isfinite(v) for v in out.values())
    k = agent.cfg.kappa
    for t0, v1, t1 in zip(before_t, agent.v.parameters(), agent.v_target.parameters()):
        torch.testing.assert_close(t1, (1 - k) * t0 + k * v1.detach())
    assert any(not torch.equal(a, b) for a, b in zip(before_v, agent.v.parameters()))
    assert all(p.requires_grad for p in agent.q.parameters())


def test_update_rejects_nonfinite(rng):
    agent = MOSACAgent(small_cfg())
    buf = ReplayBuffer(64, 4, 35, 4, np.random.default_rng(0))
    fill_buffer(buf, 20, rng)
    batch = buf.sample(16)
    batch["rewards"][0, 0] = float("nan")
    with pytest.raises(NonFiniteError):
        agent.update(batch, (0.5, 0.5))


def test_agent_config_validation():
    for kw in ({"alpha": 0.0}, {"gamma": 1.0}, {"kappa": 0.0}, {"buffer_capacity": 8, "batch_size": 16}):
        with pytest.raises(ValueError):
            AgentConfig(**kw)


def test_token_window():
    w = TokenWindow(3, 2, 1)
    w.reset(np.array([1.0, 2.0]))
    np.testing.assert_array_equal(w.tokens, [[1, 2, 0]] * 3)
    w.push(TokenWindow.token(np.array([3.0, 4.0]), np.array([0.5])), 1)
    np.testing.assert_array_equal(w.tokens[-1], [3, 4, 0.5])
    np.testing.assert_array_equal(w.tokens[0], [1, 2, 0])
    assert w.positions.tolist() == [0.0, 0.0, 1.0]
