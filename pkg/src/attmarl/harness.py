"""Experiment harness: seeded multi-run experiments and analysis tooling.

Artifacts per run directory (CSV schemas in docs/FORMATS.md):

* ``config.txt``          resolved copy of the experiment config
* ``seed_<s>.csv``        per-episode training log for one seed
* ``seed_<s>.ckpt``       final actor/critic parameters for one seed
* ``seed_<s>_replay.npz`` replay snapshot (only with save_replay = true)
* ``aggregate.csv``       per-episode mean/std across seeds + trailing mean
"""

from __future__ import annotations

import csv
import hashlib
import os

import numpy as np

from .baselines import greedy_navigate, greedy_pursue, wcmp_split
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, config_to_text
from .envs import JointAction, make_env
from .envs.particle import ParticleEnv
from .envs.routing import RoutingEnv
from .errors import ConfigError, ValidationError
from .networks import Actor, AttentionCritic
from .replay import ReplayBuffer
from .training import Trainer, make_trainer

SMOOTH_WINDOW = 20


# ---------------------------------------------------------------------------
# logging helpers


def _log_columns(cfg: ExperimentConfig, n_agents: int) -> list[str]:
    cols = ["episode", "reward"]
    if cfg.is_learned():
        cols += [f"critic_loss_{i}" for i in range(n_agents)]
    cols.append("noise")
    if cfg.algorithm == "att_maddpg":
        cols += [f"att_w_{k}" for k in range(cfg.k_heads)]
    return cols


def _fmt(v) -> str:
    # repr of a Python float round-trips bit-exactly
    return repr(float(v))


def _row_values(cfg: ExperimentConfig, row: dict, n_agents: int) -> list:
    vals = [row["episode"], _fmt(row["reward"])]
    if cfg.is_learned():
        vals += [_fmt(v) for v in row["critic_losses"]]
    vals.append(_fmt(row["noise"]))
    if cfg.algorithm == "att_maddpg":
        att = row.get("attention_means")
        if att is None:
            vals += ["nan"] * cfg.k_heads
        else:
            vals += [_fmt(v) for v in att]
    return vals


# ---------------------------------------------------------------------------
# rule-based rollouts


def rule_policies(algorithm: str, env) -> list:
    """Per-agent callables (obs, agent_index) -> action for wcmp/greedy."""
    if algorithm == "wcmp":
        if not isinstance(env, RoutingEnv):
            raise ConfigError("wcmp runs only on routing environments")

        def policy(_obs, i):
            return wcmp_split(env.path_costs()[i])

    elif algorithm == "greedy":
        if not isinstance(env, ParticleEnv):
            raise ConfigError("greedy runs only on particle environments")

        if env.task == "spread":
            def policy(_obs, i):
                return greedy_navigate(env.agent_positions[i],
                                       env.landmark_positions, env.v_max)
        else:
            def policy(_obs, i):
                return greedy_pursue(env.agent_positions[i],
                                     env.prey_position, env.v_max)
    else:
        raise ConfigError(f"{algorithm!r} is not a rule-based algorithm")
    return [policy] * env.n_agents


def actor_policies(meta: dict, stores: dict, env) -> list:
    """Decentralized policies from a checkpoint: actors only, no critic."""
    if list(meta["obs_dims"]) != list(env.obs_dims):
        raise ValidationError(
            f"checkpoint observation dims {meta['obs_dims']} do not match "
            f"environment dims {list(env.obs_dims)}")
    policies = []
    for i in range(env.n_agents):
        actor = Actor(env.obs_dims[i], env.action_spaces[i],
                      hidden=(meta["hidden_width"], meta["hidden_width"]))
        actor.params = stores[f"agent{i}/actor"]
        policies.append(lambda obs, _i, _a=actor: _a.act(obs))
    return policies


def rollout(env, policies, seed: int):
    """One deterministic no-noise episode; yields per-step records."""
    obs = env.reset(seed)
    records = []
    done = False
    step = 0
    while not done:
        actions = [policies[i](obs.per_agent[i], i) for i in range(env.n_agents)]
        result = env.step(JointAction(actions))
        records.append({
            "step": step,
            "actions": actions,
            "rewards": result.rewards,
            "info": result.info,
        })
        obs = result.observation
        done = result.done
        step += 1
    return records


# ---------------------------------------------------------------------------
# single-seed execution


def _checkpoint_meta(cfg: ExperimentConfig, env, seed: int) -> dict:
    return {
        "env": cfg.env,
        "algorithm": cfg.algorithm,
        "seed": seed,
        "k_heads": cfg.k_heads,
        "vec_dim": cfg.vec_dim,
        "hidden_width": cfg.hidden_width,
        "critic_hidden": list(cfg.critic_hidden),
        "obs_dims": list(env.obs_dims),
        "act_dims": [s.dim for s in env.action_spaces],
        "horizon": env.horizon,
    }


def run_seed(cfg: ExperimentConfig, seed: int, out_dir: str) -> str:
    """Execute one seed; returns the path of its training-log CSV."""
    csv_path = os.path.join(out_dir, f"seed_{seed}.csv")
    if cfg.is_learned():
        trainer = make_trainer(cfg, seed)
        env = trainer.env
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_log_columns(cfg, env.n_agents))

            def flush_row(row):
                writer.writerow(_row_values(cfg, row, env.n_agents))
                fh.flush()

            trainer.train(on_episode=flush_row)
        stores = {}
        for i, rt in enumerate(trainer.runtimes):
            stores[f"agent{i}/actor"] = rt.actor.params
            stores[f"agent{i}/critic"] = rt.critic.params
        save_checkpoint(os.path.join(out_dir, f"seed_{seed}.ckpt"),
                        _checkpoint_meta(cfg, env, seed), stores)
        if cfg.save_replay:
            trainer.buffer.save(os.path.join(out_dir, f"seed_{seed}_replay.npz"))
    else:
        env = make_env(cfg.env, horizon=cfg.horizon or None,
                       topology_path=cfg.topology or None,
                       bonus_beta=cfg.bonus_beta)
        policies = rule_policies(cfg.algorithm, env)
        episode_seeds = np.random.default_rng(np.random.SeedSequence(seed))
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_log_columns(cfg, env.n_agents))
            for ep in range(cfg.episodes):
                records = rollout(env, policies,
                                  int(episode_seeds.integers(2**63 - 1)))
                reward = float(np.mean([np.mean(r["rewards"]) for r in records]))
                writer.writerow(_row_values(
                    cfg, {"episode": ep, "reward": reward, "noise": 0.0},
                    env.n_agents))
                fh.flush()
    return csv_path


# ---------------------------------------------------------------------------
# multi-seed runner + aggregation


def read_log(csv_path: str) -> dict[str, np.ndarray]:
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader]
    data = np.array(rows) if rows else np.zeros((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}


def aggregate_logs(seed_csvs: list[str], out_path: str) -> str:
    """Per-episode mean/std across seeds plus a trailing smoothed mean."""
    logs = [read_log(p) for p in seed_csvs]
    lengths = {len(log["episode"]) for log in logs}
    if len(lengths) != 1:
        raise ValidationError(f"seed logs disagree on episode count: {lengths}")
    rewards = np.stack([log["reward"] for log in logs])  # (seeds, episodes)
    mean = rewards.mean(axis=0)
    std = rewards.std(axis=0)
    smoothed = np.array([
        mean[max(0, t + 1 - SMOOTH_WINDOW) : t + 1].mean()
        for t in range(mean.size)
    ])
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "mean_reward", "std_reward",
                         "smoothed_mean_reward", "n_seeds"])
        for t in range(mean.size):
            writer.writerow([t, _fmt(mean[t]), _fmt(std[t]),
                             _fmt(smoothed[t]), len(seed_csvs)])
    return out_path


def run(cfg: ExperimentConfig) -> dict:
    """Execute every seed (sequentially or in worker processes) and aggregate."""
    cfg.validate()
    out_dir = cfg.resolved_output_dir()
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.txt"), "w") as fh:
        fh.write(config_to_text(cfg))

    if cfg.workers > 1:
        import multiprocessing as mp

        from . import _worker
        ctx = mp.get_context("spawn")
        args = [(config_to_text(cfg), seed, out_dir) for seed in cfg.seeds]
        with ctx.Pool(min(cfg.workers, len(cfg.seeds))) as pool:
            seed_csvs = pool.starmap(_worker.run_one_seed, args)
    else:
        seed_csvs = [run_seed(cfg, seed, out_dir) for seed in cfg.seeds]

    aggregate_csv = aggregate_logs(seed_csvs,
                                   os.path.join(out_dir, "aggregate.csv"))
    return {
        "out_dir": out_dir,
        "seed_csvs": seed_csvs,
        "aggregate_csv": aggregate_csv,
        "checkpoints": [os.path.join(out_dir, f"seed_{s}.ckpt")
                        for s in cfg.seeds] if cfg.is_learned() else [],
    }


# ---------------------------------------------------------------------------
# attention analysis


def dump_attention(ckpt_path, replay_path, out_path, n: int = 3000,
                   agent: int = 0, seed: int = 0, chunk: int = 512) -> str:
    """Sample stored transitions and dump per-head values + attention weights.

    For each sampled (observations, actions) tuple the checkpointed critic
    reports each head's scalarized value (the head vector pushed through the
    final output unit) and the attention weight it received.
    """
    meta, stores = load_checkpoint(ckpt_path)
    if meta["algorithm"] != "att_maddpg":
        raise ConfigError(
            f"attention dump needs an att_maddpg checkpoint, got "
            f"{meta['algorithm']!r}")
    snapshot = ReplayBuffer.load_snapshot(replay_path)
    size = snapshot["done"].size
    if n > size:
        raise ConfigError(f"requested {n} samples but the snapshot holds {size}")
    critic = AttentionCritic(meta["obs_dims"], meta["act_dims"], agent,
                             n_heads=meta["k_heads"], vec_dim=meta["vec_dim"],
                             hidden=meta["hidden_width"])
    critic.params = stores[f"agent{agent}/critic"]

    idx = np.random.default_rng(seed).choice(size, size=n, replace=False)
    k = meta["k_heads"]
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["digest"]
                        + [f"q_head_{i}" for i in range(k)]
                        + [f"w_head_{i}" for i in range(k)])
        for lo in range(0, n, chunk):
            sel = idx[lo : lo + chunk]
            obs = [o[sel] for o in snapshot["obs"]]
            acts = [a[sel] for a in snapshot["acts"]]
            _, parts = critic.forward(None, obs, acts, return_parts=True)
            per_head = critic.scalarize_heads(parts.head_qs)
            for r in range(sel.size):
                h = hashlib.sha1()
                for arr in obs + acts:
                    h.update(arr[r].tobytes())
                writer.writerow([h.hexdigest()[:12]]
                                + [_fmt(v) for v in per_head[r]]
                                + [_fmt(v) for v in parts.weights[r]])
    return out_path


# ---------------------------------------------------------------------------
# rollout traces


def trace_rollout(source, env_name: str, seed: int, steps: int,
                  out_path: str) -> str:
    """Deterministic no-noise rollout written as a per-step CSV.

    `source` is a checkpoint path, or the literal 'greedy' / 'wcmp' for the
    rule-based policies.
    """
    env = make_env(env_name, horizon=steps)
    if source in ("greedy", "wcmp"):
        policies = rule_policies(source, env)
    else:
        meta, stores = load_checkpoint(source)
        policies = actor_policies(meta, stores, env)

    records = rollout(env, policies, seed)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if isinstance(env, RoutingEnv):
            cols = ["step"]
            for i, plist in enumerate(env.topology.paths):
                cols += [f"agent{i}_ratio_{p}" for p in range(len(plist))]
            cols += [f"util_{l.name}" for l in env.topology.links]
            cols += ["mlu", "reward"]
            writer.writerow(cols)
            for rec in records:
                row = [rec["step"]]
                for a in rec["actions"]:
                    row += [_fmt(x) for x in a]
                row += [_fmt(u) for u in rec["info"]["utilizations"]]
                row += [_fmt(rec["info"]["mlu"]), _fmt(rec["rewards"][0])]
                writer.writerow(row)
        else:
            cols = ["step"]
            for i in range(env.n_agents):
                cols += [f"agent{i}_x", f"agent{i}_y", f"agent{i}_ax", f"agent{i}_ay"]
            if env.task == "spread":
                cols += [f"landmark{j}_{ax}" for j in range(3) for ax in "xy"]
            else:
                cols += ["prey_x", "prey_y"]
            cols += ["reward"]
            writer.writerow(cols)
            # replay the episode to capture positions step by step
            env2 = make_env(env_name, horizon=steps)
            env2.reset(seed)
            for rec in records:
                env2.step(JointAction(rec["actions"]))
                row = [rec["step"]]
                for i in range(env2.n_agents):
                    row += [_fmt(env2.agent_positions[i][0]),
                            _fmt(env2.agent_positions[i][1]),
                            _fmt(rec["actions"][i][0]),
                            _fmt(rec["actions"][i][1])]
                if env2.task == "spread":
                    for j in range(3):
                        row += [_fmt(env2.landmark_positions[j][0]),
                                _fmt(env2.landmark_positions[j][1])]
                else:
                    row += [_fmt(env2.prey_position[0]),
                            _fmt(env2.prey_position[1])]
                row.append(_fmt(rec["rewards"][0]))
                writer.writerow(row)
    return out_path
