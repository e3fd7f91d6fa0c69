"""Fixed-capacity experience replay over preallocated per-agent rings."""

from __future__ import annotations

import numpy as np

from .errors import UsageError


class ReplayBuffer:
    """Ring buffer of joint transitions; uniform sampling with replacement."""

    def __init__(self, capacity: int, obs_dims, act_dims, seed=0):
        self.capacity = int(capacity)
        self.obs_dims = tuple(obs_dims)
        self.act_dims = tuple(act_dims)
        self.n_agents = len(self.obs_dims)
        self._obs = [np.zeros((capacity, d)) for d in self.obs_dims]
        self._acts = [np.zeros((capacity, d)) for d in self.act_dims]
        self._next_obs = [np.zeros((capacity, d)) for d in self.obs_dims]
        self._rewards = np.zeros((capacity, self.n_agents))
        self._done = np.zeros(capacity)
        self._size = 0
        self._cursor = 0
        self._rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return self._size

    def push(self, obs, acts, rewards, next_obs, done: bool) -> None:
        c = self._cursor
        for i in range(self.n_agents):
            self._obs[i][c] = obs[i]
            self._acts[i][c] = acts[i]
            self._next_obs[i][c] = next_obs[i]
        self._rewards[c] = rewards
        self._done[c] = 1.0 if done else 0.0
        self._cursor = (c + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int) -> dict:
        if self._size == 0:
            raise UsageError("cannot sample from an empty replay buffer")
        idx = self._rng.integers(0, self._size, int(batch_size))
        return {
            "obs": [o[idx] for o in self._obs],
            "acts": [a[idx] for a in self._acts],
            "next_obs": [o[idx] for o in self._next_obs],
            "rewards": self._rewards[idx],
            "done": self._done[idx],
        }

    # -- snapshots (used by the analysis tooling)

    def save(self, path) -> None:
        arrays = {"rewards": self._rewards[: self._size],
                  "done": self._done[: self._size]}
        for i in range(self.n_agents):
            arrays[f"obs_{i}"] = self._obs[i][: self._size]
            arrays[f"acts_{i}"] = self._acts[i][: self._size]
            arrays[f"next_obs_{i}"] = self._next_obs[i][: self._size]
        np.savez_compressed(path, n_agents=self.n_agents, **arrays)

    @staticmethod
    def load_snapshot(path) -> dict:
        """Load a saved snapshot as plain arrays (no ring bookkeeping)."""
        with np.load(path) as data:
            n = int(data["n_agents"])
            return {
                "n_agents": n,
                "obs": [data[f"obs_{i}"] for i in range(n)],
                "acts": [data[f"acts_{i}"] for i in range(n)],
                "next_obs": [data[f"next_obs_{i}"] for i in range(n)],
                "rewards": data["rewards"],
                "done": data["done"],
            }
