"""Actor and critic networks.

The centralized attention critic for agent i decomposes its action value
around the teammates' joint behavior:

* a K-head module produces K action-conditional value vectors Q_i^k, each a
  function of the full observation set and the agent's OWN action only;
* an embedding of the teammates' joint action (the only path by which
  teammate actions enter) is dot-scored against every head and softmaxed
  into a weight simplex;
* the contextual value is the weight-averaged head vector, and one final
  linear unit maps it to the scalar value used in TD learning.

The weight vector therefore acts as an adaptive distribution over groups of
teammate joint actions, while each head can stay stable as teammates change
their policies.

Ablated variants: KheadCritic keeps the heads but merges them uniformly
(no attention, so teammate actions never reach the value); MlpCritic is a
plain fully-connected critic over either the joint (obs, action) vectors or
only the agent's own pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .envs.base import Box, Simplex
from .errors import ConfigError

DEFAULT_VEC_DIM = 32
DEFAULT_HIDDEN = 32


def _as_var(x, track=False) -> nn.Var:
    if isinstance(x, nn.Var):
        return x
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 1:
        v = v[None, :]
    return nn.Var(v, track=track)


def _cat(tape, parts):
    vs = [_as_var(p) for p in parts]
    if len(vs) == 1:
        return vs[0]
    return nn.concat_cols(tape, vs)


@dataclass
class AttentionCriticOutput:
    """All intermediate tensors of one attention-critic forward pass."""

    head_qs: np.ndarray            # (K, B, vec_dim)
    teammate_embedding: np.ndarray  # (B, vec_dim)
    weights: np.ndarray            # (B, K), rows on the simplex
    contextual_q: np.ndarray       # (B, vec_dim)
    scalar_q: np.ndarray           # (B,)


class AttentionCritic:
    """Centralized critic with K attention-weighted action-conditional heads."""

    def __init__(self, obs_dims, act_dims, agent: int, n_heads: int = 4,
                 vec_dim: int = DEFAULT_VEC_DIM, hidden: int = DEFAULT_HIDDEN,
                 rng: np.random.Generator | None = None):
        if n_heads < 2:
            raise ConfigError(f"attention critic needs >= 2 heads, got {n_heads}")
        if vec_dim < 1 or hidden < 1:
            raise ConfigError("vec_dim and hidden must be >= 1")
        self.obs_dims = tuple(int(d) for d in obs_dims)
        self.act_dims = tuple(int(d) for d in act_dims)
        self.agent = int(agent)
        self.n_heads = int(n_heads)
        self.vec_dim = int(vec_dim)
        self.hidden = int(hidden)
        self.state_dim = sum(self.obs_dims) + self.act_dims[self.agent]
        self.teammate_dim = sum(d for j, d in enumerate(self.act_dims)
                                if j != self.agent)
        rng = rng or np.random.default_rng()
        self.params = self._init_params(rng)

    def _init_params(self, rng) -> nn.ParameterStore:
        p = nn.ParameterStore()

        def uni(*shape, fan_in):
            b = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-b, b, shape)

        p.add("enc/W", (self.state_dim, self.hidden),
              uni(self.state_dim, self.hidden, fan_in=self.state_dim))
        p.add("enc/b", (self.hidden,), uni(self.hidden, fan_in=self.state_dim))
        k, h, d = self.n_heads, self.hidden, self.vec_dim
        p.add("heads/W1", (k, h, h), uni(k, h, h, fan_in=h))
        p.add("heads/b1", (k, h), uni(k, h, fan_in=h))
        p.add("heads/W2", (k, h, d), uni(k, h, d, fan_in=h))
        p.add("heads/b2", (k, d), uni(k, d, fan_in=h))
        p.add("emb/W0", (self.teammate_dim, h),
              uni(self.teammate_dim, h, fan_in=self.teammate_dim))
        p.add("emb/b0", (h,), uni(h, fan_in=self.teammate_dim))
        p.add("emb/W1", (h, d), uni(h, d, fan_in=h))
        p.add("emb/b1", (d,), uni(d, fan_in=h))
        p.add("out/W", (d, 1), uni(d, 1, fan_in=d))
        p.add("out/b", (1,), uni(1, fan_in=d))
        return p

    # -- building blocks (usable standalone for analysis and tests)

    def khead_forward(self, tape, observations, own_action, params=None) -> nn.Var:
        """K action-conditional value vectors from (all obs, own action) only."""
        store = params if params is not None else self.params
        s = _cat(tape, list(observations) + [own_action])
        if s.value.shape[1] != self.state_dim:
            raise ConfigError(
                f"state+action width {s.value.shape[1]} != expected {self.state_dim}")
        enc = nn.dense(tape, s, nn.param(store, "enc/W"), nn.param(store, "enc/b"),
                       "relu")
        return nn.head_stack(tape, enc,
                             nn.param(store, "heads/W1"), nn.param(store, "heads/b1"),
                             nn.param(store, "heads/W2"), nn.param(store, "heads/b2"))

    def teammate_embed(self, tape, teammate_actions, params=None) -> nn.Var:
        """Embedding of the concatenated teammate actions (and nothing else)."""
        store = params if params is not None else self.params
        a = _cat(tape, list(teammate_actions))
        if a.value.shape[1] != self.teammate_dim:
            raise ConfigError(
                f"teammate action width {a.value.shape[1]} != expected "
                f"{self.teammate_dim}")
        hid = nn.dense(tape, a, nn.param(store, "emb/W0"), nn.param(store, "emb/b0"),
                       "relu")
        return nn.dense(tape, hid, nn.param(store, "emb/W1"),
                        nn.param(store, "emb/b1"), "linear")

    def attention_weights(self, tape, h: nn.Var, head_qs: nn.Var) -> nn.Var:
        """Softmax over the dot score of the embedding against every head."""
        scores = nn.attention_scores(tape, h, head_qs)
        return nn.softmax_rows(tape, scores)

    def contextual_q(self, tape, weights: nn.Var, head_qs: nn.Var) -> nn.Var:
        return nn.weighted_head_sum(tape, weights, head_qs)

    def scalar_head(self, tape, contextual: nn.Var, params=None) -> nn.Var:
        store = params if params is not None else self.params
        q = nn.dense(tape, contextual, nn.param(store, "out/W"),
                     nn.param(store, "out/b"), "linear")
        return nn.reshape(tape, q, (-1,))

    # -- full forward

    def forward(self, tape, observations, actions, params=None,
                return_parts=False):
        """Scalar value of (all obs, all actions) for this agent.

        `observations` and `actions` are per-agent lists (arrays or Vars,
        batch-first). Returns the scalar-value Var, plus an
        AttentionCriticOutput when return_parts is set.
        """
        acts = [_as_var(a) for a in actions]
        own = acts[self.agent]
        teammates = [a for j, a in enumerate(acts) if j != self.agent]
        heads = self.khead_forward(tape, observations, own, params)
        h = self.teammate_embed(tape, teammates, params)
        w = self.attention_weights(tape, h, heads)
        ctx = self.contextual_q(tape, w, heads)
        q = self.scalar_head(tape, ctx, params)
        if not return_parts:
            return q
        parts = AttentionCriticOutput(
            head_qs=heads.value, teammate_embedding=h.value,
            weights=w.value, contextual_q=ctx.value, scalar_q=q.value)
        return q, parts

    def scalarize_heads(self, head_qs, params=None) -> np.ndarray:
        """Push each head vector through the scalar output unit independently.

        head_qs: (K, B, vec_dim) -> (B, K). This is the analysis-time view
        of what each head alone would say.
        """
        store = params if params is not None else self.params
        head_qs = np.asarray(head_qs, dtype=np.float64)
        w, b = store.value("out/W"), store.value("out/b")
        return np.stack([hq @ w[:, 0] + b[0] for hq in head_qs], axis=1)


class KheadCritic:
    """Ablation: the K heads merged with fixed uniform weights.

    No attention module exists, so teammate actions have no route into the
    value estimate at all; the critic is a function of (all obs, own action).
    """

    def __init__(self, obs_dims, act_dims, agent: int, n_heads: int = 4,
                 vec_dim: int = DEFAULT_VEC_DIM, hidden: int = DEFAULT_HIDDEN,
                 rng: np.random.Generator | None = None):
        if n_heads < 2:
            raise ConfigError(f"K-head critic needs >= 2 heads, got {n_heads}")
        self.obs_dims = tuple(int(d) for d in obs_dims)
        self.act_dims = tuple(int(d) for d in act_dims)
        self.agent = int(agent)
        self.n_heads = int(n_heads)
        self.vec_dim = int(vec_dim)
        self.hidden = int(hidden)
        self.state_dim = sum(self.obs_dims) + self.act_dims[self.agent]
        rng = rng or np.random.default_rng()
        p = nn.ParameterStore()

        def uni(*shape, fan_in):
            b = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-b, b, shape)

        p.add("enc/W", (self.state_dim, hidden),
              uni(self.state_dim, hidden, fan_in=self.state_dim))
        p.add("enc/b", (hidden,), uni(hidden, fan_in=self.state_dim))
        p.add("heads/W1", (n_heads, hidden, hidden), uni(n_heads, hidden, hidden,
                                                         fan_in=hidden))
        p.add("heads/b1", (n_heads, hidden), uni(n_heads, hidden, fan_in=hidden))
        p.add("heads/W2", (n_heads, hidden, vec_dim), uni(n_heads, hidden, vec_dim,
                                                          fan_in=hidden))
        p.add("heads/b2", (n_heads, vec_dim), uni(n_heads, vec_dim, fan_in=hidden))
        p.add("out/W", (vec_dim, 1), uni(vec_dim, 1, fan_in=vec_dim))
        p.add("out/b", (1,), uni(1, fan_in=vec_dim))
        self.params = p

    def forward(self, tape, observations, actions, params=None,
                return_parts=False):
        store = params if params is not None else self.params
        acts = [_as_var(a) for a in actions]
        own = acts[self.agent]
        s = _cat(tape, list(observations) + [own])
        enc = nn.dense(tape, s, nn.param(store, "enc/W"), nn.param(store, "enc/b"),
                       "relu")
        heads = nn.head_stack(tape, enc,
                              nn.param(store, "heads/W1"), nn.param(store, "heads/b1"),
                              nn.param(store, "heads/W2"), nn.param(store, "heads/b2"))
        batch = heads.value.shape[1]
        uniform = nn.Var(np.full((batch, self.n_heads), 1.0 / self.n_heads),
                         track=False)
        ctx = nn.weighted_head_sum(tape, uniform, heads)
        q = nn.dense(tape, ctx, nn.param(store, "out/W"), nn.param(store, "out/b"),
                     "linear")
        q = nn.reshape(tape, q, (-1,))
        if return_parts:
            return q, heads.value
        return q


class MlpCritic:
    """Plain fully-connected critic.

    scope='joint' consumes every agent's observation and action (the
    standard centralized baseline); scope='local' consumes only the owner's
    pair, which turns the learner into an independent one.
    """

    def __init__(self, obs_dims, act_dims, agent: int, hidden=(64, 64),
                 scope: str = "joint", rng: np.random.Generator | None = None):
        if scope not in ("joint", "local"):
            raise ConfigError(f"scope must be 'joint' or 'local', got {scope!r}")
        self.obs_dims = tuple(int(d) for d in obs_dims)
        self.act_dims = tuple(int(d) for d in act_dims)
        self.agent = int(agent)
        self.scope = scope
        if scope == "joint":
            in_dim = sum(self.obs_dims) + sum(self.act_dims)
        else:
            in_dim = self.obs_dims[agent] + self.act_dims[agent]
        self.spec = nn.MlpSpec(in_dim, tuple(hidden), 1, "relu", "linear")
        self.params = nn.ParameterStore()
        nn.init_mlp(self.params, self.spec, rng or np.random.default_rng())

    def forward(self, tape, observations, actions, params=None,
                return_parts=False):
        store = params if params is not None else self.params
        obs = [_as_var(o) for o in observations]
        acts = [_as_var(a) for a in actions]
        if self.scope == "local":
            parts = [obs[self.agent], acts[self.agent]]
        else:
            parts = obs + acts
        x = _cat(tape, parts)
        q = nn.mlp_forward(self.spec, store, x, tape)
        q = nn.reshape(tape, q, (-1,))
        if return_parts:
            return q, None
        return q


class Actor:
    """Deterministic policy: an MLP squashed into the agent's action space.

    Simplex spaces get a softmax output; box spaces get tanh scaled to the
    bound, so outputs always satisfy the space contract.
    """

    def __init__(self, obs_dim: int, space, hidden=(32, 32),
                 rng: np.random.Generator | None = None):
        self.space = space
        if isinstance(space, Simplex):
            out_act, self._scale = "softmax", None
        elif isinstance(space, Box):
            out_act = "tanh"
            self._scale = None if space.high == 1.0 else float(space.high)
        else:
            raise ConfigError(f"unsupported action space {space!r}")
        self.spec = nn.MlpSpec(int(obs_dim), tuple(hidden), space.dim,
                               "relu", out_act)
        self.params = nn.ParameterStore()
        nn.init_mlp(self.params, self.spec, rng or np.random.default_rng())

    def forward(self, tape, obs, params=None) -> nn.Var:
        store = params if params is not None else self.params
        out = nn.mlp_forward(self.spec, store, _as_var(obs), tape)
        if self._scale is not None:
            out = nn.scale(tape, out, self._scale)
        return out

    def act(self, obs: np.ndarray, params=None) -> np.ndarray:
        """Single-observation convenience wrapper (no tape)."""
        return self.forward(None, obs[None, :], params).value[0]
