"""Environment registry."""

from ..errors import ConfigError
from .base import Box, Env, JointAction, JointObservation, Simplex, StepResult
from .particle import ParticleEnv, pursuit_reward, spread_reward
from .routing import (RoutingEnv, Topology, apply_split, builtin_topology,
                      compute_utilizations, load_topology, load_topology_file,
                      reward_from_mlu)

ENV_NAMES = ("routing_small", "routing_large", "coop_nav", "predator_prey")


def make_env(name: str, horizon: int | None = None, topology_path=None,
             bonus_beta: float = 0.0) -> Env:
    """Build a shipped environment by config name."""
    if name == "routing_small" or name == "routing_large":
        if topology_path is not None:
            topo = load_topology_file(topology_path)
        else:
            topo = builtin_topology("small" if name.endswith("small") else "large")
        return RoutingEnv(topo, horizon=horizon or 50, bonus_beta=bonus_beta)
    if name == "coop_nav":
        return ParticleEnv("spread", horizon=horizon or 25)
    if name == "predator_prey":
        return ParticleEnv("pursuit", horizon=horizon or 25)
    raise ConfigError(f"unknown env {name!r}; expected one of {ENV_NAMES}")
