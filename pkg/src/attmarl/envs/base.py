"""Shared multi-agent environment contract.

Environments are deterministic functions of (reset seed, action sequence).
Actions outside an agent's declared space raise ContractError — clipping or
projection is the caller's job, never the environment's.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..errors import ContractError, UsageError


@dataclass
class JointObservation:
    per_agent: list[np.ndarray]


@dataclass
class JointAction:
    per_agent: list[np.ndarray]


@dataclass
class StepResult:
    observation: JointObservation
    rewards: np.ndarray
    done: bool
    info: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Box:
    """Per-component bounded action space [-high, high]^dim (symmetric)."""

    dim: int
    high: float

    def contains(self, v, atol=1e-9) -> bool:
        v = np.asarray(v)
        return v.shape == (self.dim,) and bool(np.all(np.abs(v) <= self.high + atol))

    def describe(self) -> str:
        return f"box[-{self.high}, {self.high}]^{self.dim}"


@dataclass(frozen=True)
class Simplex:
    """Probability simplex: components in [0, 1], summing to 1 within 1e-9."""

    dim: int

    def contains(self, v, atol=1e-9) -> bool:
        v = np.asarray(v)
        return (v.shape == (self.dim,)
                and bool(np.all(v >= -atol))
                and bool(np.all(v <= 1.0 + atol))
                and abs(float(v.sum()) - 1.0) <= atol)

    def describe(self) -> str:
        return f"simplex^{self.dim}"


class Env:
    """Base lifecycle: reset(seed) then step(action) until done."""

    n_agents: int
    obs_dims: list[int]
    action_spaces: list
    horizon: int

    def __init__(self):
        self._needs_reset = True

    def reset(self, seed: int) -> JointObservation:
        raise NotImplementedError

    def step(self, action: JointAction) -> StepResult:
        raise NotImplementedError

    # helpers for subclasses

    def _begin_episode(self):
        self._needs_reset = False

    def _guard_step(self, action: JointAction):
        if self._needs_reset:
            raise UsageError("step() called before reset() or after a terminal step")
        if len(action.per_agent) != self.n_agents:
            raise ContractError(
                f"joint action has {len(action.per_agent)} entries, "
                f"env has {self.n_agents} agents")
        for i, (a, space) in enumerate(zip(action.per_agent, self.action_spaces)):
            if not space.contains(a):
                raise ContractError(
                    f"agent {i} action {np.asarray(a)!r} outside {space.describe()}")

    def _finish_step(self, done: bool):
        if done:
            self._needs_reset = True
