"""Experiment configuration: one flat key=value text file per run.

Example::

    # routing experiment
    env = routing_small
    algorithm = att_maddpg
    seeds = 1 2 3 4 5
    episodes = 300
    output_dir = runs/small_att

Unknown keys are rejected. Defaults for everything else live in
:class:`ExperimentConfig` and match the reference training setup: actor lr
0.001, critic lr 0.01, tau 0.001, buffer 100000, batch 128, gamma 0.95,
4 heads, hidden width 32.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace

from .envs import ENV_NAMES
from .errors import ConfigError, ValidationError

LEARNED_ALGORITHMS = ("att_maddpg", "maddpg", "khead", "ddpg")
RULE_ALGORITHMS = ("wcmp", "greedy")
ALGORITHMS = LEARNED_ALGORITHMS + RULE_ALGORITHMS

OUTPUT_ROOT_ENV = "ATTMARL_OUTPUT_ROOT"


@dataclass
class ExperimentConfig:
    env: str = ""
    algorithm: str = ""
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    episodes: int = 300
    horizon: int = 0              # 0 = environment default
    k_heads: int = 4
    vec_dim: int = 32
    hidden_width: int = 32
    critic_hidden: tuple[int, ...] = (64, 64)
    actor_lr: float = 0.001
    critic_lr: float = 0.01
    tau: float = 0.001
    gamma: float = 0.95
    buffer_capacity: int = 100000
    batch_size: int = 128
    warmup: int = 1024
    noise_start: float = 0.3
    noise_final: float = 0.05
    bonus_beta: float = 0.0
    topology: str = ""            # optional topology file override
    save_replay: bool = False
    workers: int = 1
    output_dir: str = "runs/experiment"

    def validate(self) -> None:
        if self.env not in ENV_NAMES:
            raise ConfigError(f"env: {self.env!r} is not one of {ENV_NAMES}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(
                f"algorithm: {self.algorithm!r} is not one of {ALGORITHMS}")
        if self.algorithm in ("att_maddpg", "khead") and self.k_heads < 2:
            raise ConfigError(
                f"k_heads: {self.algorithm} needs at least 2 heads, got {self.k_heads}")
        if self.algorithm == "wcmp" and not self.env.startswith("routing"):
            raise ConfigError("algorithm: wcmp only applies to routing envs")
        if self.algorithm == "greedy" and self.env.startswith("routing"):
            raise ConfigError("algorithm: greedy only applies to particle envs")
        if not self.seeds:
            raise ConfigError("seeds: at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds: duplicates are not allowed")
        positive = ("episodes", "k_heads", "vec_dim", "hidden_width",
                    "buffer_capacity", "batch_size", "actor_lr", "critic_lr",
                    "workers")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name}: must be positive")
        if self.horizon < 0 or self.warmup < 0:
            raise ConfigError("horizon/warmup: must be nonnegative")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError(f"tau: must be in [0, 1], got {self.tau}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma: must be in [0, 1], got {self.gamma}")
        if self.batch_size > self.buffer_capacity:
            raise ConfigError("batch_size: cannot exceed buffer_capacity")
        if self.noise_start < 0 or self.noise_final < 0:
            raise ConfigError("noise_start/noise_final: must be nonnegative")
        if self.topology and not os.path.exists(self.topology):
            raise ConfigError(f"topology: file not found: {self.topology}")

    def resolved_output_dir(self) -> str:
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root:
            return os.path.join(root, self.output_dir)
        return self.output_dir

    def is_learned(self) -> bool:
        return self.algorithm in LEARNED_ALGORITHMS


def _parse_bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_int_tuple(s: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in s.replace(",", " ").split())


# field annotations are strings (postponed evaluation), so key on them
_PARSERS = {
    "int": int,
    "float": float,
    "str": str,
    "bool": _parse_bool,
    "tuple[int, ...]": _parse_int_tuple,
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse key=value text into a validated ExperimentConfig."""
    by_name = {f.name: f for f in fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in by_name:
            raise ValidationError(f"line {lineno}: unknown key {key!r}")
        parser = _PARSERS[by_name[key].type]
        try:
            values[key] = parser(val)
        except ValueError as exc:
            raise ValidationError(f"line {lineno}: bad value for {key}: {exc}") from exc
    for required in ("env", "algorithm"):
        if required not in values:
            raise ConfigError(f"{required}: missing required key")
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_to_text(cfg: ExperimentConfig) -> str:
    """Serialize a config back to the flat key=value format."""
    lines = []
    for f in fields(ExperimentConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = " ".join(str(x) for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
