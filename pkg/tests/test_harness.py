import csv
import os

import numpy as np
import numpy.testing as npt
import pytest

from attmarl import cli
from attmarl.checkpoint import load_checkpoint, save_checkpoint
from attmarl.config import ExperimentConfig, config_to_text
from attmarl.envs import make_env
from attmarl.errors import ConfigError, ValidationError
from attmarl.harness import (actor_policies, aggregate_logs, dump_attention,
                             read_log, rollout, rule_policies, run, run_seed,
                             trace_rollout)
from attmarl.nn import ParameterStore


def tiny_cfg(tmp_path, **kw):
    base = dict(env="routing_small", algorithm="att_maddpg", episodes=3,
                seeds=(1, 2), warmup=20, batch_size=8, k_heads=3, vec_dim=8,
                hidden_width=8, critic_hidden=(12, 12), horizon=8,
                output_dir=str(tmp_path / "run"))
    base.update(kw)
    cfg = ExperimentConfig(**base)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# checkpoint container


def test_checkpoint_roundtrip(tmp_path):
    store = ParameterStore()
    rng = np.random.default_rng(0)
    store.add("W0", (3, 4), rng.standard_normal((3, 4)))
    store.add("b0", (4,), rng.standard_normal(4))
    other = ParameterStore()
    other.add("w", (2,), [1.5, -2.5])
    path = tmp_path / "test.ckpt"
    save_checkpoint(path, {"env": "coop_nav", "note": 7},
                    {"agent0/actor": store, "agent0/critic": other})
    meta, stores = load_checkpoint(path)
    assert meta == {"env": "coop_nav", "note": 7}
    assert set(stores) == {"agent0/actor", "agent0/critic"}
    npt.assert_array_equal(stores["agent0/actor"].value("W0"), store.value("W0"))
    npt.assert_array_equal(stores["agent0/critic"].value("w"), [1.5, -2.5])
    assert stores["agent0/actor"].manifest() == store.manifest()


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "garbage.ckpt"
    path.write_bytes(b"not a checkpoint at all")
    with pytest.raises(ValidationError, match="magic"):
        load_checkpoint(path)


# ---------------------------------------------------------------------------
# run() file contract


def test_run_writes_expected_artifacts(tmp_path):
    cfg = tiny_cfg(tmp_path)
    result = run(cfg)
    assert sorted(os.path.basename(p) for p in result["seed_csvs"]) == [
        "seed_1.csv", "seed_2.csv"]
    for p in result["seed_csvs"] + [result["aggregate_csv"]]:
        assert os.path.exists(p)
    for p in result["checkpoints"]:
        assert os.path.exists(p)
    assert os.path.exists(os.path.join(result["out_dir"], "config.txt"))

    log = read_log(result["seed_csvs"][0])
    assert list(log) == ["episode", "reward", "critic_loss_0", "critic_loss_1",
                         "noise", "att_w_0", "att_w_1", "att_w_2"]
    assert log["episode"].size == cfg.episodes

    agg = read_log(result["aggregate_csv"])
    assert list(agg) == ["episode", "mean_reward", "std_reward",
                         "smoothed_mean_reward", "n_seeds"]


def test_rerun_is_bitwise_identical(tmp_path):
    cfg = tiny_cfg(tmp_path, seeds=(5,))
    first = run(cfg)
    with open(first["aggregate_csv"], "rb") as fh:
        agg1 = fh.read()
    with open(first["seed_csvs"][0], "rb") as fh:
        seed1 = fh.read()
    second = run(cfg)
    with open(second["aggregate_csv"], "rb") as fh:
        agg2 = fh.read()
    with open(second["seed_csvs"][0], "rb") as fh:
        seed2 = fh.read()
    assert agg1 == agg2
    assert seed1 == seed2


def test_aggregate_matches_brute_force_recomputation(tmp_path):
    cfg = tiny_cfg(tmp_path)
    result = run(cfg)
    logs = [read_log(p) for p in result["seed_csvs"]]
    rewards = np.stack([l["reward"] for l in logs])
    agg = read_log(result["aggregate_csv"])
    npt.assert_array_equal(agg["mean_reward"], rewards.mean(axis=0))
    npt.assert_array_equal(agg["std_reward"], rewards.std(axis=0))
    for t in range(cfg.episodes):
        window = agg["mean_reward"][max(0, t - 19): t + 1]
        npt.assert_allclose(agg["smoothed_mean_reward"][t], window.mean(),
                            rtol=0, atol=1e-15)
    npt.assert_array_equal(agg["n_seeds"], 2.0)


def test_aggregate_rejects_mismatched_logs(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    for path, rows in ((a, 3), (b, 2)):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["episode", "reward"])
            for i in range(rows):
                w.writerow([i, 0.5])
    with pytest.raises(ValidationError, match="episode count"):
        aggregate_logs([str(a), str(b)], str(tmp_path / "agg.csv"))


def test_rule_based_runs_produce_logs(tmp_path):
    cfg = tiny_cfg(tmp_path, algorithm="wcmp", seeds=(3,))
    result = run(cfg)
    log = read_log(result["seed_csvs"][0])
    assert list(log) == ["episode", "reward", "noise"]
    assert np.all(log["noise"] == 0.0)
    assert result["checkpoints"] == []

    cfg2 = tiny_cfg(tmp_path, env="coop_nav", algorithm="greedy", seeds=(3,),
                    output_dir=str(tmp_path / "run2"))
    result2 = run(cfg2)
    assert np.all(np.isfinite(read_log(result2["seed_csvs"][0])["reward"]))


def test_parallel_workers_match_sequential(tmp_path):
    cfg_seq = tiny_cfg(tmp_path, seeds=(1, 2), episodes=2,
                       output_dir=str(tmp_path / "seq"))
    cfg_par = tiny_cfg(tmp_path, seeds=(1, 2), episodes=2, workers=2,
                       output_dir=str(tmp_path / "par"))
    r_seq = run(cfg_seq)
    r_par = run(cfg_par)
    for a, b in zip(r_seq["seed_csvs"], r_par["seed_csvs"]):
        with open(a, "rb") as fa, open(b, "rb") as fb:
            assert fa.read() == fb.read()


# ---------------------------------------------------------------------------
# rollouts / trace


def test_rollout_uses_only_actors(tmp_path):
    cfg = tiny_cfg(tmp_path, seeds=(1,))
    result = run(cfg)
    meta, stores = load_checkpoint(result["checkpoints"][0])
    # drop every critic store: decentralized execution must still work
    actor_only = {k: v for k, v in stores.items() if k.endswith("/actor")}
    env = make_env(cfg.env, horizon=5)
    policies = actor_policies(meta, actor_only, env)
    records = rollout(env, policies, seed=0)
    assert len(records) == 5
    assert all(np.isfinite(r["rewards"]).all() for r in records)


def test_trace_routing_schema_and_reward_identity(tmp_path):
    out = str(tmp_path / "trace.csv")
    trace_rollout("wcmp", "routing_small", seed=3, steps=6, out_path=out)
    log = read_log(out)
    assert "mlu" in log and "reward" in log
    npt.assert_allclose(log["reward"], 1.0 - log["mlu"], rtol=0, atol=1e-12)
    assert log["step"].size == 6


def test_trace_is_deterministic(tmp_path):
    a = trace_rollout("wcmp", "routing_small", 3, 5, str(tmp_path / "a.csv"))
    b = trace_rollout("wcmp", "routing_small", 3, 5, str(tmp_path / "b.csv"))
    with open(a, "rb") as fa, open(b, "rb") as fb:
        assert fa.read() == fb.read()


def test_trace_particle_with_checkpoint(tmp_path):
    cfg = tiny_cfg(tmp_path, env="coop_nav", algorithm="maddpg", seeds=(1,),
                   horizon=6)
    result = run(cfg)
    out = trace_rollout(result["checkpoints"][0], "coop_nav", 2, 6,
                        str(tmp_path / "nav.csv"))
    log = read_log(out)
    for col in ("agent0_x", "agent2_ay", "landmark2_y", "reward"):
        assert col in log
    assert log["step"].size == 6


def test_trace_rejects_dim_mismatch(tmp_path):
    cfg = tiny_cfg(tmp_path, env="coop_nav", algorithm="maddpg", seeds=(1,),
                   horizon=4)
    result = run(cfg)
    with pytest.raises(ValidationError, match="dims"):
        trace_rollout(result["checkpoints"][0], "predator_prey", 0, 4,
                      str(tmp_path / "bad.csv"))


def test_greedy_agents_on_landmarks_sit_still():
    env = make_env("coop_nav", horizon=3)
    env.reset(seed=0)
    env.agent_positions = env.landmark_positions.copy()
    policies = rule_policies("greedy", env)
    from attmarl.envs import JointAction
    actions = [policies[i](None, i) for i in range(3)]
    for a in actions:
        npt.assert_array_equal(a, [0.0, 0.0])
    result = env.step(JointAction(actions))
    npt.assert_allclose(result.rewards, 0.0, atol=1e-12)


# ---------------------------------------------------------------------------
# dump-attention


def test_dump_attention_contract(tmp_path):
    cfg = tiny_cfg(tmp_path, seeds=(1,), save_replay=True, episodes=4)
    result = run(cfg)
    replay = os.path.join(result["out_dir"], "seed_1_replay.npz")
    assert os.path.exists(replay)
    out = str(tmp_path / "dump.csv")
    dump_attention(result["checkpoints"][0], replay, out, n=30, agent=0, seed=1)
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    k = cfg.k_heads
    assert header == (["digest"] + [f"q_head_{i}" for i in range(k)]
                      + [f"w_head_{i}" for i in range(k)])
    assert len(body) == 30
    for row in body:
        weights = np.array([float(x) for x in row[1 + k:]])
        assert abs(weights.sum() - 1.0) <= 1e-6
        assert np.all(weights > 0)


def test_dump_attention_matches_direct_recomputation(tmp_path):
    cfg = tiny_cfg(tmp_path, seeds=(1,), save_replay=True, episodes=4)
    result = run(cfg)
    replay = os.path.join(result["out_dir"], "seed_1_replay.npz")
    out = str(tmp_path / "dump.csv")
    dump_attention(result["checkpoints"][0], replay, out, n=10, agent=1, seed=5)

    from attmarl.networks import AttentionCritic
    from attmarl.replay import ReplayBuffer
    meta, stores = load_checkpoint(result["checkpoints"][0])
    critic = AttentionCritic(meta["obs_dims"], meta["act_dims"], 1,
                             n_heads=meta["k_heads"], vec_dim=meta["vec_dim"],
                             hidden=meta["hidden_width"])
    critic.params = stores["agent1/critic"]
    snap = ReplayBuffer.load_snapshot(replay)
    idx = np.random.default_rng(5).choice(snap["done"].size, 10, replace=False)
    obs = [o[idx] for o in snap["obs"]]
    acts = [a[idx] for a in snap["acts"]]
    _, parts = critic.forward(None, obs, acts, return_parts=True)
    expected_q = critic.scalarize_heads(parts.head_qs)

    with open(out, newline="") as fh:
        body = list(csv.reader(fh))[1:]
    k = meta["k_heads"]
    got_q = np.array([[float(x) for x in row[1 : 1 + k]] for row in body])
    got_w = np.array([[float(x) for x in row[1 + k :]] for row in body])
    npt.assert_array_equal(got_q, expected_q)
    npt.assert_array_equal(got_w, parts.weights)


def test_dump_attention_rejects_non_attention_checkpoint(tmp_path):
    cfg = tiny_cfg(tmp_path, algorithm="maddpg", seeds=(1,), save_replay=True)
    result = run(cfg)
    replay = os.path.join(result["out_dir"], "seed_1_replay.npz")
    with pytest.raises(ConfigError, match="att_maddpg"):
        dump_attention(result["checkpoints"][0], replay,
                       str(tmp_path / "x.csv"), n=5)


def test_dump_attention_rejects_oversized_sample(tmp_path):
    cfg = tiny_cfg(tmp_path, seeds=(1,), save_replay=True, episodes=2)
    result = run(cfg)
    replay = os.path.join(result["out_dir"], "seed_1_replay.npz")
    with pytest.raises(ConfigError, match="snapshot holds"):
        dump_attention(result["checkpoints"][0], replay,
                       str(tmp_path / "x.csv"), n=10**6)


# ---------------------------------------------------------------------------
# CLI


def test_cli_validate_and_run(tmp_path, capsys):
    cfg = tiny_cfg(tmp_path, seeds=(1,), episodes=2)
    cfg_path = tmp_path / "exp.cfg"
    cfg_path.write_text(config_to_text(cfg))
    assert cli.main(["validate", str(cfg_path)]) == 0
    assert "ok" in capsys.readouterr().out
    assert cli.main(["run", str(cfg_path)]) == 0
    out = capsys.readouterr().out
    assert "aggregate.csv" in out


def test_cli_validation_failure_names_field(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("env = routing_small\nalgorithm = dqn\n")
    assert cli.main(["validate", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "algorithm" in err


def test_cli_trace(tmp_path, capsys):
    out = tmp_path / "t.csv"
    code = cli.main(["trace", "wcmp", "--env", "routing_small",
                     "--seed", "1", "--steps", "4", "--out", str(out)])
    assert code == 0
    assert out.exists()


def test_cli_missing_file_is_error(capsys):
    assert cli.main(["validate", "/nonexistent/exp.cfg"]) == 1
