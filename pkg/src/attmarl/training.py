"""Training loops: centralized critics, decentralized actors.

One training step per agent per environment step (after warmup):

* critic — one Adam step on the mean squared TD error. Targets bootstrap
  through the target critic with every next action regenerated by the
  matching target actor; terminal transitions mask the bootstrap.
* actor — one Adam ascent step on the mean critic value, with the agent's
  own action flowing through the tape and every teammate action regenerated
  from that teammate's current online actor.
* both target networks then track their online twins by soft update.

Everything is driven by explicitly seeded generators (init, per-episode env
seeds, exploration noise, replay sampling), so a (config, seed) pair fully
determines the run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .config import ExperimentConfig
from .envs import JointAction, make_env
from .envs.base import Box, Env, Simplex
from .errors import ConfigError, UsageError
from .networks import Actor, AttentionCritic, KheadCritic, MlpCritic
from .replay import ReplayBuffer


@dataclass
class TrainStepStats:
    critic_loss: float
    actor_grad_norm: float
    mean_td_error: float
    attention_means: np.ndarray | None = None


@dataclass
class AgentRuntime:
    actor: Actor
    actor_target: nn.ParameterStore
    critic: object
    critic_target: nn.ParameterStore
    adam_actor: nn.Adam
    adam_critic: nn.Adam


def build_critic(algorithm: str, obs_dims, act_dims, agent: int,
                 cfg: ExperimentConfig, rng):
    if algorithm == "att_maddpg":
        return AttentionCritic(obs_dims, act_dims, agent, n_heads=cfg.k_heads,
                               vec_dim=cfg.vec_dim, hidden=cfg.hidden_width,
                               rng=rng)
    if algorithm == "khead":
        return KheadCritic(obs_dims, act_dims, agent, n_heads=cfg.k_heads,
                           vec_dim=cfg.vec_dim, hidden=cfg.hidden_width, rng=rng)
    if algorithm == "maddpg":
        return MlpCritic(obs_dims, act_dims, agent, hidden=cfg.critic_hidden,
                         scope="joint", rng=rng)
    if algorithm == "ddpg":
        return MlpCritic(obs_dims, act_dims, agent, hidden=cfg.critic_hidden,
                         scope="local", rng=rng)
    raise ConfigError(f"no critic for algorithm {algorithm!r}")


def _teammate_actions_used(critic) -> bool:
    if isinstance(critic, AttentionCritic):
        return True
    if isinstance(critic, MlpCritic):
        return critic.scope == "joint"
    return False  # KheadCritic


def explore_action(action: np.ndarray, space, scale: float, rng) -> np.ndarray:
    """Gaussian exploration noise projected back into the action space."""
    if scale <= 0.0:
        return action
    noisy = action + rng.normal(0.0, scale, action.shape)
    if isinstance(space, Simplex):
        noisy = np.clip(noisy, 1e-8, None)
        return noisy / noisy.sum()
    if isinstance(space, Box):
        return np.clip(noisy, -space.high, space.high)
    raise ConfigError(f"unsupported action space {space!r}")


class Trainer:
    """Runs one seeded training run of a learned algorithm on one env."""

    def __init__(self, cfg: ExperimentConfig, env: Env, seed: int):
        if not cfg.is_learned():
            raise ConfigError(f"{cfg.algorithm!r} is rule-based; nothing to train")
        self.cfg = cfg
        self.env = env
        self.seed = int(seed)
        self.n_agents = env.n_agents
        self.obs_dims = list(env.obs_dims)
        self.act_dims = [s.dim for s in env.action_spaces]

        ss = np.random.SeedSequence(self.seed)
        init_ss, env_ss, noise_ss, replay_ss = ss.spawn(4)
        init_rng = np.random.default_rng(init_ss)
        self._episode_seed_rng = np.random.default_rng(env_ss)
        self._noise_rng = np.random.default_rng(noise_ss)
        self.buffer = ReplayBuffer(cfg.buffer_capacity, self.obs_dims,
                                   self.act_dims, seed=replay_ss)

        self.runtimes: list[AgentRuntime] = []
        for i in range(self.n_agents):
            actor = Actor(self.obs_dims[i], env.action_spaces[i],
                          hidden=(cfg.hidden_width, cfg.hidden_width),
                          rng=init_rng)
            critic = build_critic(cfg.algorithm, self.obs_dims, self.act_dims,
                                  i, cfg, init_rng)
            self.runtimes.append(AgentRuntime(
                actor=actor,
                actor_target=actor.params.copy(),
                critic=critic,
                critic_target=critic.params.copy(),
                adam_actor=nn.Adam(actor.params, cfg.actor_lr),
                adam_critic=nn.Adam(critic.params, cfg.critic_lr),
            ))

    # -- schedule

    def noise_scale(self, episode: int) -> float:
        cfg = self.cfg
        ramp = max(1, cfg.episodes // 2)
        frac = min(1.0, episode / ramp)
        return cfg.noise_start + frac * (cfg.noise_final - cfg.noise_start)

    # -- updates

    def critic_update(self, agent: int, batch) -> TrainStepStats:
        if batch["done"].size == 0:
            raise UsageError("empty batch")
        rt = self.runtimes[agent]
        cfg = self.cfg
        uses_teammates = _teammate_actions_used(rt.critic)

        next_acts = []
        for j in range(self.n_agents):
            if j == agent or uses_teammates:
                rj = self.runtimes[j]
                next_acts.append(rj.actor.forward(
                    None, batch["next_obs"][j], params=rj.actor_target).value)
            else:
                next_acts.append(np.zeros_like(batch["acts"][j]))
        q_next = rt.critic.forward(None, batch["next_obs"], next_acts,
                                   params=rt.critic_target).value
        y = (batch["rewards"][:, agent]
             + cfg.gamma * (1.0 - batch["done"]) * q_next)

        tape = nn.Tape()
        att_means = None
        if isinstance(rt.critic, AttentionCritic):
            q, parts = rt.critic.forward(tape, batch["obs"], batch["acts"],
                                         return_parts=True)
            att_means = parts.weights.mean(axis=0)
        else:
            q = rt.critic.forward(tape, batch["obs"], batch["acts"])
        delta = q.value - y
        loss = float(np.mean(delta * delta))
        rt.critic.params.zero_grads()
        tape.backward(q, (2.0 / delta.size) * delta)
        rt.adam_critic.step()
        rt.critic.params.zero_grads()
        return TrainStepStats(critic_loss=loss, actor_grad_norm=0.0,
                              mean_td_error=float(np.mean(np.abs(delta))),
                              attention_means=att_means)

    def actor_update(self, agent: int, batch) -> float:
        if batch["done"].size == 0:
            raise UsageError("empty batch")
        rt = self.runtimes[agent]
        tape = nn.Tape()
        uses_teammates = _teammate_actions_used(rt.critic)
        acts = []
        for j in range(self.n_agents):
            if j == agent:
                acts.append(rt.actor.forward(tape, batch["obs"][j]))
            elif uses_teammates:
                rj = self.runtimes[j]
                acts.append(nn.Var(rj.actor.forward(None, batch["obs"][j]).value,
                                   track=False))
            else:
                acts.append(nn.Var(np.zeros_like(batch["acts"][j]), track=False))
        q = rt.critic.forward(tape, batch["obs"], acts)
        rt.actor.params.zero_grads()
        rt.critic.params.zero_grads()
        batch_size = q.value.shape[0]
        tape.backward(q, np.full(batch_size, -1.0 / batch_size))
        grad_norm = float(np.linalg.norm(rt.actor.params.flat_grads))
        rt.adam_actor.step()
        rt.actor.params.zero_grads()
        rt.critic.params.zero_grads()
        return grad_norm

    def soft_updates(self, agent: int) -> None:
        rt = self.runtimes[agent]
        nn.soft_update(rt.actor_target, rt.actor.params, self.cfg.tau)
        nn.soft_update(rt.critic_target, rt.critic.params, self.cfg.tau)

    # -- episodes

    def act(self, obs_list, scale: float) -> list[np.ndarray]:
        actions = []
        for i, rt in enumerate(self.runtimes):
            a = rt.actor.act(obs_list[i])
            actions.append(explore_action(a, self.env.action_spaces[i], scale,
                                          self._noise_rng))
        return actions

    def run_episode(self, episode: int) -> dict:
        cfg = self.cfg
        scale = self.noise_scale(episode)
        obs = self.env.reset(int(self._episode_seed_rng.integers(2**63 - 1)))
        rewards = []
        losses = [[] for _ in range(self.n_agents)]
        att_sums = None
        att_count = 0
        while True:
            actions = self.act(obs.per_agent, scale)
            result = self.env.step(JointAction(actions))
            self.buffer.push(obs.per_agent, actions, result.rewards,
                             result.observation.per_agent, result.done)
            rewards.append(float(np.mean(result.rewards)))
            if len(self.buffer) >= max(cfg.warmup, cfg.batch_size):
                for i in range(self.n_agents):
                    batch = self.buffer.sample(cfg.batch_size)
                    stats = self.critic_update(i, batch)
                    losses[i].append(stats.critic_loss)
                    if stats.attention_means is not None:
                        if att_sums is None:
                            att_sums = np.zeros_like(stats.attention_means)
                        att_sums += stats.attention_means
                        att_count += 1
                    self.actor_update(i, batch)
                    self.soft_updates(i)
            obs = result.observation
            if result.done:
                break
        return {
            "episode": episode,
            "reward": float(np.mean(rewards)),
            "noise": scale,
            "critic_losses": [float(np.mean(l)) if l else float("nan")
                              for l in losses],
            "attention_means": (att_sums / att_count if att_count else None),
        }

    def train(self, on_episode=None) -> list[dict]:
        rows = []
        for ep in range(self.cfg.episodes):
            row = self.run_episode(ep)
            rows.append(row)
            if on_episode is not None:
                on_episode(row)
        return rows


def make_trainer(cfg: ExperimentConfig, seed: int) -> Trainer:
    env = make_env(cfg.env, horizon=cfg.horizon or None,
                   topology_path=cfg.topology or None,
                   bonus_beta=cfg.bonus_beta)
    return Trainer(cfg, env, seed)
