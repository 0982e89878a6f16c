import math

import numpy as np
import pytest
from scipy import stats

from sentinel.ensemble import (
    AgentConfig, ReplayBuffer, SentinelAgent, composite_q, composite_values, ftrl_weights,
    ftrl_weights_batch, ftrl_weights_from_losses,
)
from sentinel.envs import CartPole, ThreeStateMDP
from sentinel.retdist import AtomSupport, CategoricalReturnDistribution as Cat
from sentinel.risk import RiskMeasureSpec

from .conftest import random_dist
from .reference_c51 import ReferenceC51

NEUTRAL = RiskMeasureSpec.neutral()
SUPPORT = AtomSupport(0.0, 2.0, 21)


def small_config(**kw):
    base = dict(k=4, support=SUPPORT, hidden=(16,), batch_size=8, eps_decay_steps=100,
                target_update_period=20, buffer_capacity=5000)
    base.update(kw)
    return AgentConfig(**base)


# -- FTRL ----------------------------------------------------------------------------------

def test_ftrl_hand_computed():
    w = ftrl_weights_from_losses([0.0, math.log(2)], 1.0)
    np.testing.assert_allclose(w, [2 / 3, 1 / 3], atol=1e-9)


def test_ftrl_lambda_zero_is_exactly_uniform():
    rng = np.random.default_rng(0)
    for k in (1, 2, 3, 4, 7):
        dists = [random_dist(rng, SUPPORT) for _ in range(k)]
        assert ftrl_weights(dists, 0.0).tolist() == [1.0 / k] * k


def test_ftrl_identical_members_uniform():
    d = random_dist(np.random.default_rng(1), SUPPORT)
    np.testing.assert_allclose(ftrl_weights([d] * 4, 3.0), 0.25, atol=1e-15)


def test_ftrl_greedy_limit():
    # exp(-50 l) gives the leader > 0.99 once every rival trails by ln(99 (K-1)) / 50
    from sentinel.ensemble import member_losses
    rng = np.random.default_rng(2)
    separated = 0
    for _ in range(200):
        dists = [random_dist(rng, SUPPORT, 0.3) for _ in range(4)]
        w = ftrl_weights(dists, 50.0)
        losses = member_losses(np.stack([d.masses for d in dists])[:, None, :])[:, 0]
        assert np.argmax(w) == np.argmin(losses)
        gap = np.sort(losses)[1] - losses.min()
        if gap >= math.log(99 * 3) / 50:
            separated += 1
            assert w.max() > 0.99
    assert separated >= 50


def test_ftrl_prefers_members_near_marginal():
    s = AtomSupport(0.0, 2.0, 3)
    a = Cat(s, [0.3, 0.4, 0.3])
    outlier = Cat(s, [0.98, 0.01, 0.01])
    w = ftrl_weights([a, a, a, outlier], 1.0)
    assert w[3] < w[0]
    np.testing.assert_allclose(w.sum(), 1.0)


def test_ftrl_on_simplex_random():
    rng = np.random.default_rng(3)
    for _ in range(100):
        probs = rng.dirichlet(np.ones(21), size=(5, 4, 3))
        w = ftrl_weights_batch(probs, rng.uniform(0, 20))
        assert np.all(w >= 0)
        np.testing.assert_allclose(w.sum(axis=-2), 1.0, atol=1e-12)


# -- composite Q ---------------------------------------------------------------------------

def test_composite_values_examples():
    atoms = np.array([0.0, 1.0, 3.0])
    # two members, one action; member Q^A values 1 and 3
    probs = np.array([[[0, 1.0, 0]], [[0, 0, 1.0]]])
    w = np.full((2, 1), 0.5)
    assert composite_values(probs, atoms, w, NEUTRAL, RiskMeasureSpec.cvar(0.5))[0] == 1.0
    assert composite_values(probs, atoms, w, NEUTRAL, NEUTRAL)[0] == 2.0


def test_composite_identical_members_ignores_u_e():
    rng = np.random.default_rng(4)
    p = rng.dirichlet(np.ones(21), size=3)
    probs = np.stack([p] * 4)
    w = rng.dirichlet(np.ones(4), size=3).T
    u_a = RiskMeasureSpec.cvar(0.3)
    ref = composite_values(probs, SUPPORT.atoms, w, u_a, NEUTRAL)
    for u_e in (RiskMeasureSpec.cvar(0.1), RiskMeasureSpec.cvar(0.7)):
        np.testing.assert_allclose(composite_values(probs, SUPPORT.atoms, w, u_a, u_e), ref, atol=1e-12)


def test_composite_neutral_u_e_is_weighted_average():
    rng = np.random.default_rng(5)
    u_a = RiskMeasureSpec.cvar(0.25)
    for _ in range(50):
        probs = rng.dirichlet(np.ones(21), size=(4, 3))
        w = rng.dirichlet(np.ones(4), size=3).T
        from sentinel.ensemble import aleatory_values
        expected = (w * aleatory_values(probs, SUPPORT.atoms, u_a)).sum(axis=0)
        np.testing.assert_allclose(composite_values(probs, SUPPORT.atoms, w, u_a, NEUTRAL), expected, atol=1e-9)


def test_single_member_neutral_is_expected_q():
    agent = SentinelAgent(small_config(k=1), 3, 2)
    s = np.array([1.0, 0, 0])
    means = [d.mean() for d in agent.members[0].value_net.forward(s)]
    np.testing.assert_allclose(agent.composite_q(s), means, atol=1e-12)
    assert composite_q(agent, None, s, 1) == pytest.approx(means[1])


# -- action selection ----------------------------------------------------------------------

def test_epsilon_one_is_uniform():
    agent = SentinelAgent(small_config(eps_start=1.0, eps_end=1.0), 4, 5)
    counts = np.bincount([agent.select_action(np.zeros(4)) for _ in range(10_000)], minlength=5)
    assert stats.chisquare(counts).pvalue > 0.01


def force_predictions(agent, per_action_logits):
    """Make every member ignore the state and emit fixed logits per action."""
    for m in agent.members:
        for p in m.value_net.params:
            p[:] = 0.0
        m.value_net.params[-1][:] = np.concatenate(per_action_logits)


def test_dominant_action_chosen():
    for u_a, u_e in [(NEUTRAL, NEUTRAL), (RiskMeasureSpec.cvar(0.1), RiskMeasureSpec.cvar(0.25))]:
        agent = SentinelAgent(small_config(eps_start=0, eps_end=0, u_a=u_a, u_e=u_e), 3, 3)
        low = np.linspace(2, -2, 21)
        force_predictions(agent, [low, low[::-1], low])
        assert agent.select_action(np.ones(3)) == 1


def test_ties_break_to_lowest_index():
    agent = SentinelAgent(small_config(eps_start=0, eps_end=0), 3, 3)
    z = np.zeros(21)
    force_predictions(agent, [z, z, z])
    assert agent.select_action(np.ones(3)) == 0


def test_member_permutation_invariance():
    cfg = small_config(eps_start=0, eps_end=0, u_a=RiskMeasureSpec.cvar(0.3), u_e=RiskMeasureSpec.cvar(0.5))
    agent = SentinelAgent(cfg, 3, 4)
    rng = np.random.default_rng(6)
    states = rng.normal(size=(30, 3))
    before = [agent.select_action(s) for s in states]
    q_before = [agent.composite_q(s) for s in states]
    agent.members = agent.members[::-1]
    after = [agent.select_action(s) for s in states]
    assert before == after
    np.testing.assert_allclose([agent.composite_q(s) for s in states], q_before, atol=1e-12)


# -- masking and replay --------------------------------------------------------------------

def test_mask_rates_and_determinism():
    def masks(seed):
        agent = SentinelAgent(small_config(seed=seed, buffer_capacity=30_000), 3, 2)
        env = ThreeStateMDP(seed)
        for _ in range(30_000):
            agent.act_and_record(env)
        return agent.buffer.masks[: agent.buffer.size].copy()
    m = masks(7)
    frac = m.mean(axis=0)
    assert np.all(np.abs(frac - 1 / 3) <= 0.01)
    np.testing.assert_array_equal(m, masks(7))


def test_mask_prob_one_shares_all_data():
    agent = SentinelAgent(small_config(mask_prob=1.0), 3, 2)
    env = ThreeStateMDP(0)
    for _ in range(200):
        agent.act_and_record(env)
    assert agent.buffer.masks[:200].all()


def test_buffer_ring_and_views():
    buf = ReplayBuffer(5, 2, 3)
    for t in range(8):
        buf.add(np.full(2, t), 0, float(t), np.full(2, t + 1), False, [t % 2 == 0, True, False])
    assert buf.size == 5 and buf.inserted == 8
    assert sorted(buf.rewards.tolist()) == [3, 4, 5, 6, 7]
    for i in buf.member_indices(0):
        assert buf.rewards[i] % 2 == 0
    assert len(buf.member_indices(1)) == 5 and len(buf.member_indices(2)) == 0
    with pytest.raises(ValueError):
        buf.add(np.zeros(2), 0, 0.0, np.zeros(2), False, [True])


def test_minibatches_respect_member_views():
    agent = SentinelAgent(small_config(), 3, 2)
    env = ThreeStateMDP(1)
    for t in range(1, 401):
        agent.act_and_record(env)
        info = agent.training_step(t)
        if info["updated"]:
            for i, picks in enumerate(agent.sampled_indices):
                assert agent.buffer.masks[picks, i].all()
    assert agent.updates > 0


# -- training step -------------------------------------------------------------------------

def test_no_update_before_data():
    agent = SentinelAgent(small_config(), 3, 2)
    before = [p.copy() for p in agent.members[0].value_net.params]
    for t in range(1, 20):
        info = agent.training_step(t)
        assert not info["updated"]
    assert agent.updates == 0 and agent.skipped_updates > 0
    for p, q in zip(before, agent.members[0].value_net.params):
        np.testing.assert_array_equal(p, q)


def test_terminal_target_is_projected_reward():
    # one-step episodes: whatever a* is, every target must be the point mass at r
    cfg = small_config(k=2, batch_size=4, value_update_period=1, mask_prob=1.0, lr=0.0)
    agent = SentinelAgent(cfg, 3, 2)
    env = ThreeStateMDP(2)
    for _ in range(10):
        agent.act_and_record(env)
    captured = []
    import sentinel.ensemble as ens
    original = ens.train_step

    def spy(net, opt, states, actions, targets):
        captured.append(np.array(targets))
        return original(net, opt, states, actions, targets)
    ens.train_step = spy
    try:
        agent.training_step(1)
    finally:
        ens.train_step = original
    from sentinel.retdist import project_batch
    for i, targets in enumerate(captured):
        sel = agent.sampled_indices[i]
        expected = project_batch(np.full((4, 21), 1 / 21), agent.buffer.rewards[sel], 0.0, True, SUPPORT)
        np.testing.assert_allclose(targets, expected, atol=1e-15)


def test_target_sync_schedule():
    cfg = small_config(target_update_period=10)
    agent = SentinelAgent(cfg, 3, 2)
    env = ThreeStateMDP(3)
    for t in range(1, 10):
        agent.act_and_record(env)
        agent.training_step(t)
    s = np.array([1.0, 0, 0])
    m = agent.members[0]
    assert not np.array_equal(m.value_net.probs(s), m.target_net.probs(s))
    agent.act_and_record(env)
    assert agent.training_step(10)["synced"]
    for m in agent.members:
        np.testing.assert_array_equal(m.value_net.probs(s), m.target_net.probs(s))


def run_agent(cfg, env, steps):
    agent = SentinelAgent(cfg, env.state_dim, env.n_actions)
    actions, losses = [], []
    for t in range(1, steps + 1):
        a, _ = agent.act_and_record(env)
        actions.append(a)
        if agent.training_step(t)["updated"]:
            losses.append(agent.last_losses[0])
    return agent, actions, losses


@pytest.mark.parametrize("seed", [0, 1])
def test_reduces_to_single_categorical_dqn(seed):
    from sentinel.envs import value_bounds
    cfg = AgentConfig(k=1, mask_prob=1.0, support=AtomSupport(*value_bounds(0.99), 51), hidden=(32, 32),
                      eps_decay_steps=500, target_update_period=100, seed=seed)
    agent, actions, losses = run_agent(cfg, CartPole(seed), 1500)
    ref = ReferenceC51(cfg, 4, 2)
    ref_actions = ref.run(CartPole(seed), 1500)
    assert actions == ref_actions
    assert losses == ref.losses
    for p, q in zip(agent.members[0].value_net.params, ref.net.params):
        np.testing.assert_array_equal(p, q)


def test_training_deterministic():
    cfg = small_config(u_a=RiskMeasureSpec.cvar(0.25), u_e=RiskMeasureSpec.cvar(0.25))
    _, a1, l1 = run_agent(cfg, CartPole(5), 600)
    _, a2, l2 = run_agent(cfg, CartPole(5), 600)
    assert a1 == a2 and l1 == l2


def test_checkpoint_roundtrip(tmp_path):
    cfg = small_config(u_a=RiskMeasureSpec.cvar(0.25))
    agent, _, _ = run_agent(cfg, ThreeStateMDP(0), 200)
    agent.save_checkpoint(tmp_path)
    restored = SentinelAgent.load_checkpoint(tmp_path)
    s = np.array([1.0, 0, 0])
    np.testing.assert_array_equal(agent.member_probs(s), restored.member_probs(s))
    np.testing.assert_array_equal(agent.member_probs(s, target=True), restored.member_probs(s, target=True))
    assert restored.config.u_a == cfg.u_a and restored.updates == agent.updates


def test_config_roundtrip_and_validation():
    cfg = small_config(u_e=RiskMeasureSpec.cvar(0.25), lam=4.6)
    d = cfg.to_dict()
    d["lambda"] = d.pop("lam")
    assert AgentConfig.from_dict(d) == cfg
    for bad in (dict(k=0), dict(lam=-1), dict(mask_prob=0), dict(value_update_period=0)):
        with pytest.raises(ValueError):
            small_config(**bad)


def test_epsilon_schedule():
    cfg = AgentConfig(eps_start=1.0, eps_end=0.05, eps_decay_steps=100)
    assert cfg.epsilon(0) == 1.0
    assert cfg.epsilon(50) == pytest.approx(0.525)
    assert cfg.epsilon(100) == cfg.epsilon(10_000) == 0.05
