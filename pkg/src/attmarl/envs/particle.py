"""Particle-world tasks on a bounded 2-D plane.

Two cooperative tasks over three agents with velocity actions:

* ``spread`` — cover three static landmarks; shared reward is the negative
  sum over landmarks of the distance to the closest agent.
* ``pursuit`` — chase one scripted prey; shared reward is the negative
  distance of the closest predator, plus a catch bonus when any predator
  is within the catch radius (which also ends the episode).

Kinematics are first order: the action IS the velocity, positions move by
v * dt and clamp at the walls. The prey flees the nearest predator at full
speed with probability ``flee_prob`` each step, otherwise it picks a
uniformly random direction.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .base import Box, Env, JointAction, JointObservation, StepResult

N_AGENTS = 3
CATCH_BONUS = 10.0


def spread_reward(agent_positions, landmark_positions) -> float:
    """Negative sum over landmarks of the nearest-agent distance."""
    agents = np.asarray(agent_positions, dtype=np.float64)
    marks = np.asarray(landmark_positions, dtype=np.float64)
    total = 0.0
    for m in marks:
        total += float(np.min(np.linalg.norm(agents - m, axis=1)))
    return -total


def pursuit_reward(predator_positions, prey_position, catch_flag: bool) -> float:
    """Negative nearest-predator distance, plus the bonus on a catch."""
    preds = np.asarray(predator_positions, dtype=np.float64)
    prey = np.asarray(prey_position, dtype=np.float64)
    nearest = float(np.min(np.linalg.norm(preds - prey, axis=1)))
    return -nearest + (CATCH_BONUS if catch_flag else 0.0)


class ParticleEnv(Env):
    """Cooperative navigation ('spread') or predator-prey ('pursuit').

    Observations are translation invariant: own velocity, teammate offsets
    and velocity differences, then landmark offsets (spread) or the prey
    offset and velocity difference (pursuit). Offsets are scaled by the
    plane extent.
    """

    def __init__(self, task: str, extent: float = 10.0, dt: float = 0.25,
                 v_max: float = 1.0, catch_radius: float = 0.5,
                 horizon: int = 25, flee_prob: float = 0.7):
        super().__init__()
        if task not in ("spread", "pursuit"):
            raise ConfigError(f"task must be 'spread' or 'pursuit', got {task!r}")
        self.task = task
        self.extent = float(extent)
        self.dt = float(dt)
        self.v_max = float(v_max)
        self.catch_radius = float(catch_radius)
        self.horizon = int(horizon)
        self.flee_prob = float(flee_prob)
        self.n_agents = N_AGENTS
        self.action_spaces = [Box(2, self.v_max) for _ in range(N_AGENTS)]
        # own vel + per-teammate offset and velocity difference
        base = 2 + (N_AGENTS - 1) * 4
        per_task = 3 * 2 if task == "spread" else 4
        self.obs_dims = [base + per_task] * N_AGENTS

    def reset(self, seed: int) -> JointObservation:
        self._rng = np.random.default_rng(seed)
        self.agent_positions = self._rng.uniform(0, self.extent, (N_AGENTS, 2))
        self.agent_velocities = np.zeros((N_AGENTS, 2))
        if self.task == "spread":
            self.landmark_positions = self._rng.uniform(0, self.extent, (3, 2))
        else:
            self.prey_position = self._rng.uniform(0, self.extent, 2)
            self.prey_velocity = np.zeros(2)
        self.step_count = 0
        self._begin_episode()
        return self._observe()

    def step(self, action: JointAction) -> StepResult:
        self._guard_step(action)
        vel = np.array([np.asarray(a, dtype=np.float64) for a in action.per_agent])
        self.agent_velocities = vel
        self.agent_positions = np.clip(
            self.agent_positions + vel * self.dt, 0.0, self.extent)

        caught = False
        if self.task == "pursuit":
            self._move_prey()
            dists = np.linalg.norm(self.agent_positions - self.prey_position, axis=1)
            caught = bool(np.min(dists) <= self.catch_radius)
            r = pursuit_reward(self.agent_positions, self.prey_position, caught)
            info = {"caught": caught}
        else:
            r = spread_reward(self.agent_positions, self.landmark_positions)
            info = {}

        self.step_count += 1
        done = caught or self.step_count >= self.horizon
        self._finish_step(done)
        return StepResult(self._observe(), np.full(N_AGENTS, r), done, info)

    def _move_prey(self):
        # one uniform draw decides flee-vs-wander, a second the wander angle;
        # drawing both keeps the stream layout fixed either way
        u = self._rng.random()
        angle = self._rng.uniform(0.0, 2.0 * np.pi)
        if u < self.flee_prob:
            dists = np.linalg.norm(self.agent_positions - self.prey_position, axis=1)
            away = self.prey_position - self.agent_positions[int(np.argmin(dists))]
            norm = np.linalg.norm(away)
            direction = away / norm if norm > 1e-12 else np.array(
                [np.cos(angle), np.sin(angle)])
        else:
            direction = np.array([np.cos(angle), np.sin(angle)])
        self.prey_velocity = direction * self.v_max
        self.prey_position = np.clip(
            self.prey_position + self.prey_velocity * self.dt, 0.0, self.extent)

    def _observe(self) -> JointObservation:
        per_agent = []
        for i in range(N_AGENTS):
            parts = [self.agent_velocities[i]]
            for j in range(N_AGENTS):
                if j == i:
                    continue
                parts.append((self.agent_positions[j] - self.agent_positions[i])
                             / self.extent)
                parts.append(self.agent_velocities[j] - self.agent_velocities[i])
            if self.task == "spread":
                for m in self.landmark_positions:
                    parts.append((m - self.agent_positions[i]) / self.extent)
            else:
                parts.append((self.prey_position - self.agent_positions[i])
                             / self.extent)
                parts.append(self.prey_velocity - self.agent_velocities[i])
            per_agent.append(np.concatenate(parts))
        return JointObservation(per_agent)
