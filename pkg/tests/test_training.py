import numpy as np
import numpy.testing as npt
import pytest

from attmarl import nn
from attmarl.config import ExperimentConfig
from attmarl.envs.base import Box, Simplex
from attmarl.errors import ConfigError, UsageError
from attmarl.networks import AttentionCritic, KheadCritic, MlpCritic
from attmarl.replay import ReplayBuffer
from attmarl.training import (Trainer, build_critic, explore_action,
                              make_trainer)


def small_cfg(**kw):
    base = dict(env="routing_small", algorithm="att_maddpg", episodes=3,
                seeds=(1,), warmup=32, batch_size=16, k_heads=3,
                vec_dim=8, hidden_width=8, critic_hidden=(16, 16))
    base.update(kw)
    cfg = ExperimentConfig(**base)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# replay buffer


def push_n(buf, n, n_agents=2, obs_dim=3, act_dim=2, start=0):
    for t in range(start, start + n):
        obs = [np.full(obs_dim, float(t) + i) for i in range(n_agents)]
        acts = [np.full(act_dim, float(t) - i) for i in range(n_agents)]
        buf.push(obs, acts, np.array([t, t]), obs, done=(t % 7 == 0))


def test_replay_never_exceeds_capacity_and_evicts_oldest():
    buf = ReplayBuffer(8, (3, 3), (2, 2), seed=0)
    push_n(buf, 11)
    assert len(buf) == 8
    # oldest three (t = 0, 1, 2) were overwritten by t = 8, 9, 10
    stored_t = sorted(buf._obs[0][:, 0].tolist())
    assert stored_t == [3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]


def test_replay_sampling_is_uniform_with_replacement():
    buf = ReplayBuffer(64, (1, 1), (1, 1), seed=3)
    for t in range(4):
        buf.push([np.array([t])] * 2, [np.array([0.0])] * 2,
                 np.zeros(2), [np.array([t])] * 2, False)
    batch = buf.sample(4096)
    values = batch["obs"][0][:, 0]
    counts = np.array([(values == t).sum() for t in range(4)])
    # with replacement across only 4 items, all items show up many times
    assert counts.min() > 800
    npt.assert_allclose(counts / counts.sum(), 0.25, atol=0.05)


def test_replay_sampling_deterministic_under_seed():
    def draw():
        buf = ReplayBuffer(32, (2, 2), (1, 1), seed=42)
        push_n(buf, 20, obs_dim=2, act_dim=1)
        return buf.sample(10)

    a, b = draw(), draw()
    npt.assert_array_equal(a["obs"][0], b["obs"][0])
    npt.assert_array_equal(a["rewards"], b["rewards"])


def test_replay_empty_sample_is_usage_error():
    buf = ReplayBuffer(4, (1,), (1,), seed=0)
    with pytest.raises(UsageError):
        buf.sample(2)


def test_replay_snapshot_roundtrip(tmp_path):
    path = tmp_path / "replay.npz"
    buf2 = ReplayBuffer(16, (3, 3), (2, 2), seed=0)
    push_n(buf2, 10)
    buf2.save(path)
    snap = ReplayBuffer.load_snapshot(path)
    assert snap["n_agents"] == 2
    assert snap["done"].shape == (10,)
    npt.assert_array_equal(snap["obs"][0], buf2._obs[0][:10])


# ---------------------------------------------------------------------------
# exploration


def test_explore_zero_scale_is_identity():
    a = np.array([0.3, 0.7])
    out = explore_action(a, Simplex(2), 0.0, np.random.default_rng(0))
    npt.assert_array_equal(out, a)


def test_explore_keeps_simplex_actions_on_simplex():
    rng = np.random.default_rng(1)
    space = Simplex(3)
    for _ in range(300):
        a = rng.dirichlet(np.ones(3))
        out = explore_action(a, space, 0.4, rng)
        assert space.contains(out)


def test_explore_keeps_box_actions_in_bounds():
    rng = np.random.default_rng(2)
    space = Box(2, 1.0)
    for _ in range(300):
        a = rng.uniform(-1, 1, 2)
        out = explore_action(a, space, 0.5, rng)
        assert space.contains(out)


def test_explore_deterministic_under_seed():
    a = np.array([0.5, 0.5])
    out1 = explore_action(a, Simplex(2), 0.3, np.random.default_rng(7))
    out2 = explore_action(a, Simplex(2), 0.3, np.random.default_rng(7))
    npt.assert_array_equal(out1, out2)


# ---------------------------------------------------------------------------
# algorithm wiring


def test_build_critic_classes():
    cfg = small_cfg()
    obs_dims, act_dims = (4, 4), (2, 2)
    rng = np.random.default_rng(0)
    assert isinstance(build_critic("att_maddpg", obs_dims, act_dims, 0, cfg, rng),
                      AttentionCritic)
    assert isinstance(build_critic("khead", obs_dims, act_dims, 0, cfg, rng),
                      KheadCritic)
    maddpg = build_critic("maddpg", obs_dims, act_dims, 0, cfg, rng)
    assert isinstance(maddpg, MlpCritic) and maddpg.scope == "joint"
    ddpg = build_critic("ddpg", obs_dims, act_dims, 0, cfg, rng)
    assert isinstance(ddpg, MlpCritic) and ddpg.scope == "local"


def test_trainer_rejects_rule_based_algorithms():
    cfg = small_cfg(algorithm="wcmp")
    with pytest.raises(ConfigError):
        make_trainer(cfg, seed=0)


def test_maddpg_critic_has_no_attention_structures():
    cfg = small_cfg(algorithm="maddpg")
    trainer = make_trainer(cfg, seed=0)
    for rt in trainer.runtimes:
        assert isinstance(rt.critic, MlpCritic)
        assert not any("heads" in n or "emb" in n for n in rt.critic.params.names())


def test_noise_anneals_linearly_to_floor():
    cfg = small_cfg(episodes=100, noise_start=0.3, noise_final=0.05)
    trainer = make_trainer(cfg, seed=0)
    assert trainer.noise_scale(0) == pytest.approx(0.3)
    assert trainer.noise_scale(25) == pytest.approx(0.175)
    assert trainer.noise_scale(50) == pytest.approx(0.05)
    assert trainer.noise_scale(99) == pytest.approx(0.05)


# ---------------------------------------------------------------------------
# TD targets and updates on a hand-built trainer


def make_batch(trainer, batch=8, seed=0):
    rng = np.random.default_rng(seed)
    n = trainer.n_agents
    return {
        "obs": [rng.standard_normal((batch, d)) for d in trainer.obs_dims],
        "acts": [rng.dirichlet(np.ones(d), size=batch)
                 for d in trainer.act_dims],
        "next_obs": [rng.standard_normal((batch, d)) for d in trainer.obs_dims],
        "rewards": rng.standard_normal((batch, n)),
        "done": np.zeros(batch),
    }


def td_targets_oracle(trainer, agent, batch, gamma):
    # independent recomputation of r + gamma * (1-done) * Q_target(s', a')
    rt = trainer.runtimes[agent]
    next_acts = [trainer.runtimes[j].actor.forward(
        None, batch["next_obs"][j], params=trainer.runtimes[j].actor_target).value
        for j in range(trainer.n_agents)]
    qn = rt.critic.forward(None, batch["next_obs"], next_acts,
                           params=rt.critic_target).value
    return batch["rewards"][:, agent] + gamma * (1 - batch["done"]) * qn


def test_terminal_transitions_mask_bootstrap():
    cfg = small_cfg(gamma=0.95)
    trainer = make_trainer(cfg, seed=3)
    batch = make_batch(trainer)
    batch["done"] = np.ones(8)
    y = td_targets_oracle(trainer, 0, batch, cfg.gamma)
    npt.assert_array_equal(y, batch["rewards"][:, 0])


def test_zero_gamma_is_myopic():
    cfg = small_cfg(gamma=0.0)
    trainer = make_trainer(cfg, seed=3)
    batch = make_batch(trainer)
    y = td_targets_oracle(trainer, 0, batch, 0.0)
    npt.assert_array_equal(y, batch["rewards"][:, 0])


def test_td_target_hand_case():
    # scalar critic: Q(s, a) = sum of own action entries; gamma = 0.5
    cfg = small_cfg(gamma=0.5)
    trainer = make_trainer(cfg, seed=3)
    rt = trainer.runtimes[0]
    # overwrite target critic so the scalar head just sums the contextual
    # vector and heads pass values straight through: simpler to hand-check
    # via the oracle itself against a frozen forward
    batch = make_batch(trainer, batch=4)
    y = td_targets_oracle(trainer, 0, batch, 0.5)
    next_acts = [trainer.runtimes[j].actor.forward(
        None, batch["next_obs"][j], params=trainer.runtimes[j].actor_target).value
        for j in range(trainer.n_agents)]
    qn = rt.critic.forward(None, batch["next_obs"], next_acts,
                           params=rt.critic_target).value
    npt.assert_allclose(y, batch["rewards"][:, 0] + 0.5 * qn, atol=1e-12)


def test_critic_update_drives_loss_down_on_frozen_batch():
    cfg = small_cfg(critic_lr=0.01)
    trainer = make_trainer(cfg, seed=5)
    batch = make_batch(trainer, batch=16, seed=9)
    first = trainer.critic_update(0, batch).critic_loss
    losses = [trainer.critic_update(0, batch).critic_loss for _ in range(99)]
    assert losses[-1] < first * 0.5, (first, losses[-1])


def test_critic_update_at_fixed_point_keeps_loss_near_zero():
    cfg = small_cfg(gamma=0.0)
    trainer = make_trainer(cfg, seed=6)
    rt = trainer.runtimes[0]
    batch = make_batch(trainer, batch=8)
    # targets equal predictions: set rewards to the critic's own predictions
    q = rt.critic.forward(None, batch["obs"], batch["acts"]).value
    batch["rewards"] = np.stack([q, q], axis=1)
    before = rt.critic.params.flat_values.copy()
    stats = trainer.critic_update(0, batch)
    assert stats.critic_loss < 1e-24
    # adam moves parameters by at most ~lr even at zero loss epsilons
    assert np.max(np.abs(rt.critic.params.flat_values - before)) <= cfg.critic_lr


def test_critic_update_rejects_empty_batch():
    cfg = small_cfg()
    trainer = make_trainer(cfg, seed=0)
    batch = make_batch(trainer, batch=0)
    with pytest.raises(UsageError):
        trainer.critic_update(0, batch)
    with pytest.raises(UsageError):
        trainer.actor_update(0, batch)


def test_actor_update_no_gradient_when_critic_ignores_action():
    cfg = small_cfg(algorithm="maddpg")
    trainer = make_trainer(cfg, seed=7)
    rt = trainer.runtimes[0]
    # zero the first-layer weight rows fed by agent 0's action entries
    w0 = rt.critic.params.value("W0")
    own_start = sum(trainer.obs_dims)
    w0[own_start : own_start + trainer.act_dims[0], :] = 0.0
    before = rt.actor.params.flat_values.copy()
    batch = make_batch(trainer, batch=8)
    grad_norm = trainer.actor_update(0, batch)
    assert grad_norm == 0.0
    npt.assert_array_equal(rt.actor.params.flat_values, before)


def test_actor_update_improves_mean_q():
    cfg = small_cfg(algorithm="maddpg", actor_lr=0.01)
    trainer = make_trainer(cfg, seed=8)
    rt = trainer.runtimes[0]
    batch = make_batch(trainer, batch=16, seed=4)

    def mean_q():
        acts = []
        for j in range(trainer.n_agents):
            rj = trainer.runtimes[j]
            acts.append(rj.actor.forward(None, batch["obs"][j]).value)
        return float(np.mean(rt.critic.forward(None, batch["obs"], acts).value))

    before = mean_q()
    for _ in range(50):
        trainer.actor_update(0, batch)
    assert mean_q() > before


def test_soft_updates_track_online_parameters():
    cfg = small_cfg(tau=0.5)
    trainer = make_trainer(cfg, seed=9)
    rt = trainer.runtimes[0]
    gap0 = np.abs(rt.actor_target.flat_values
                  - rt.actor.params.flat_values).max()
    assert gap0 == 0.0  # targets start as copies
    rt.actor.params.flat_values[:] += 1.0
    trainer.soft_updates(0)
    gap = np.abs(rt.actor_target.flat_values - rt.actor.params.flat_values)
    npt.assert_allclose(gap, 0.5, atol=1e-12)


# ---------------------------------------------------------------------------
# training loop behavior


def test_khead_ignores_teammates_but_ddpg_ignores_their_obs_too():
    cfg = small_cfg(algorithm="ddpg")
    trainer = make_trainer(cfg, seed=1)
    rt = trainer.runtimes[0]
    batch = make_batch(trainer)
    q1 = rt.critic.forward(None, batch["obs"], batch["acts"]).value
    obs2 = [o.copy() for o in batch["obs"]]
    obs2[1] += 3.0
    acts2 = [a.copy() for a in batch["acts"]]
    acts2[1] = np.roll(acts2[1], 1, axis=1)
    q2 = rt.critic.forward(None, obs2, acts2).value
    npt.assert_array_equal(q1, q2)


def test_training_runs_and_logs_all_algorithms():
    for algo in ("att_maddpg", "maddpg", "khead", "ddpg"):
        cfg = small_cfg(algorithm=algo, episodes=2, warmup=16, batch_size=8)
        trainer = make_trainer(cfg, seed=2)
        rows = trainer.train()
        assert [r["episode"] for r in rows] == [0, 1]
        for row in rows:
            assert np.isfinite(row["reward"])
            assert len(row["critic_losses"]) == trainer.n_agents
        if algo == "att_maddpg":
            assert rows[-1]["attention_means"] is not None
            npt.assert_allclose(rows[-1]["attention_means"].sum(), 1.0, atol=1e-9)
        else:
            assert rows[-1]["attention_means"] is None


def test_training_is_bitwise_deterministic():
    def log_for(seed):
        cfg = small_cfg(episodes=2, warmup=16, batch_size=8)
        return make_trainer(cfg, seed=seed).train()

    a, b = log_for(11), log_for(11)
    assert [r["reward"] for r in a] == [r["reward"] for r in b]
    assert [r["critic_losses"] for r in a] == [r["critic_losses"] for r in b]
    c = log_for(12)
    assert [r["reward"] for r in a] != [r["reward"] for r in c]


def test_particle_training_smoke():
    cfg = small_cfg(env="coop_nav", episodes=2, warmup=16, batch_size=8,
                    horizon=10)
    rows = make_trainer(cfg, seed=1).train()
    assert len(rows) == 2
    assert all(np.isfinite(r["reward"]) for r in rows)
