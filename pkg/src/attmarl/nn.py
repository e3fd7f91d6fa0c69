"""Minimal reverse-mode differentiable core for small dense networks.

Design notes:

* All numerics are float64. Tolerance-heavy tests downstream rely on it.
* A :class:`ParameterStore` keeps every weight array of one network in a
  single flat buffer (values + matching gradient buffer) with a
  name/shape/offset manifest. Optimizer steps, soft updates, checkpointing
  and gradient norms then run over one contiguous array each.
* Autodiff is a recorded tape: ops compute values eagerly and append a
  backward closure. :meth:`Tape.backward` replays the closures in reverse.
  Gradients on leaf variables (parameters, inputs) accumulate additively
  across backward calls; gradients on op outputs are transient per call.
* Batching: data vectors are rows, so inputs are ``(B, n)``; single vectors
  are accepted by the public MLP entry points and squeezed back on return.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .backend import K
from .errors import ConfigError, NumericsError, ShapeError, UsageError

HIDDEN_ACTIVATIONS = ("relu", "tanh")
OUTPUT_ACTIVATIONS = ("linear", "tanh", "softmax")


# ---------------------------------------------------------------------------
# parameter storage


class ParameterStore:
    """Named float64 arrays in one flat buffer, with matching gradient slots.

    Entry order is insertion order; names are unique. ``value(name)`` /
    ``grad(name)`` return live views into the flat buffers, so in-place
    edits through a view are visible to optimizers and checkpoints.
    """

    def __init__(self):
        self._flat = np.zeros(0)
        self._gflat = np.zeros(0)
        self._manifest: list[tuple[str, tuple[int, ...], int]] = []
        self._views: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def add(self, name: str, shape: Sequence[int], values=None) -> None:
        if name in self._views:
            raise ConfigError(f"duplicate parameter entry {name!r}")
        shape = tuple(int(d) for d in shape)
        n = int(np.prod(shape)) if shape else 1
        offset = self._flat.size
        self._flat = np.concatenate([self._flat, np.zeros(n)])
        self._gflat = np.concatenate([self._gflat, np.zeros(n)])
        self._manifest.append((name, shape, offset))
        self._rebuild_views()
        if values is not None:
            values = np.asarray(values, dtype=np.float64)
            if values.shape != shape:
                raise ShapeError(
                    f"entry {name!r}: values shape {values.shape} != {shape}"
                )
            self._views[name][0][...] = values

    def _rebuild_views(self):
        self._views = {}
        for name, shape, off in self._manifest:
            n = int(np.prod(shape)) if shape else 1
            self._views[name] = (
                self._flat[off : off + n].reshape(shape),
                self._gflat[off : off + n].reshape(shape),
            )

    def value(self, name: str) -> np.ndarray:
        return self._views[name][0]

    def grad(self, name: str) -> np.ndarray:
        return self._views[name][1]

    def names(self) -> list[str]:
        return [name for name, _, _ in self._manifest]

    def manifest(self) -> list[tuple[str, tuple[int, ...], int]]:
        return list(self._manifest)

    @property
    def flat_values(self) -> np.ndarray:
        return self._flat

    @property
    def flat_grads(self) -> np.ndarray:
        return self._gflat

    @property
    def size(self) -> int:
        return self._flat.size

    def zero_grads(self) -> None:
        self._gflat[:] = 0.0

    def copy(self) -> "ParameterStore":
        dup = ParameterStore()
        dup._flat = self._flat.copy()
        dup._gflat = self._gflat.copy()
        dup._manifest = list(self._manifest)
        dup._rebuild_views()
        return dup

    def load_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != self._flat.shape:
            raise ShapeError(
                f"flat buffer has {flat.size} elements, store holds {self.size}"
            )
        self._flat[:] = flat

    def same_layout(self, other: "ParameterStore") -> bool:
        return self._manifest == other._manifest

    def __contains__(self, name: str) -> bool:
        return name in self._views

    def __repr__(self):
        return f"ParameterStore({len(self._manifest)} entries, {self.size} scalars)"


def soft_update(target: ParameterStore, online: ParameterStore, tau: float) -> None:
    """target <- tau*online + (1-tau)*target, elementwise over all entries."""
    if not 0.0 <= tau <= 1.0:
        raise ConfigError(f"tau must be in [0, 1], got {tau}")
    if not target.same_layout(online):
        raise ShapeError("soft_update requires stores with identical manifests")
    K.lerp_inplace(target.flat_values, online.flat_values, tau)


class Adam:
    """Adam with bias correction over a store's flat buffers.

    Gradients are read, never written: the caller zeroes them.
    """

    def __init__(self, store: ParameterStore, lr: float,
                 betas=(0.9, 0.999), eps: float = 1e-8):
        if lr <= 0.0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        self.store = store
        self.lr = float(lr)
        self.beta1, self.beta2 = float(betas[0]), float(betas[1])
        self.eps = float(eps)
        self.t = 0
        self._m = np.zeros(store.size)
        self._v = np.zeros(store.size)

    def step(self) -> None:
        self.t += 1
        K.adam_update(self.store.flat_values, self.store.flat_grads,
                      self._m, self._v, self.t,
                      self.lr, self.beta1, self.beta2, self.eps)


# ---------------------------------------------------------------------------
# tape autodiff


class Var:
    """A node in a recorded computation: a value plus an optional gradient.

    ``track=False`` marks constants whose gradient nobody reads (e.g. stored
    observations); ops skip accumulating into them.
    """

    __slots__ = ("value", "grad", "track")

    def __init__(self, value, grad=None, track=True):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = grad
        self.track = track

    @property
    def shape(self):
        return self.value.shape


def _acc(var: Var, g: np.ndarray) -> None:
    if not var.track:
        return
    if var.grad is None:
        var.grad = g
    else:
        var.grad += g


class Tape:
    """Ordered record of ops; backward() replays it in reverse.

    Leaf gradients accumulate additively across backward calls; every call
    first clears the gradients of tape-owned (non-leaf) variables so each
    pass is independent — running the same backward twice exactly doubles
    leaf gradients.
    """

    def __init__(self):
        self._backs: list = []
        self._owned: list[Var] = []
        self.output: Var | None = None

    def _record(self, out: Var, back) -> Var:
        self._owned.append(out)
        if back is not None:
            self._backs.append(back)
        return out

    def backward(self, out: Var | None = None, output_grad=None) -> None:
        out = out if out is not None else self.output
        if out is None or not self._owned:
            raise UsageError("backward called without a recorded forward pass")
        for v in self._owned:
            v.grad = None
        g = (np.ones_like(out.value) if output_grad is None
             else np.asarray(output_grad, dtype=np.float64))
        if g.shape != out.value.shape:
            raise ShapeError(
                f"output_grad shape {g.shape} != output shape {out.value.shape}"
            )
        out.grad = g.copy()
        for back in reversed(self._backs):
            back()


def backward(tape: Tape, output_grad) -> None:
    """Accumulate d(output_grad . output)/d(leaves) for the tape's output."""
    tape.backward(None, output_grad)


# --- ops -------------------------------------------------------------------
# Each op takes the tape first; with tape=None it only computes the value.


def _maybe(tape, out, back):
    if tape is not None:
        tape._record(out, back)
        tape.output = out
    return out


def dense(tape, x: Var, w: Var, b: Var, activation: str = "linear") -> Var:
    """y = act(x @ w + b); activation in {'linear','relu','tanh'}."""
    if x.value.shape[1] != w.value.shape[0]:
        raise ShapeError(
            f"dense: input width {x.value.shape[1]} != weight rows {w.value.shape[0]}"
        )
    if activation == "linear":
        fwd, bwd = K.affine, None
    elif activation == "relu":
        fwd, bwd = K.affine_relu, K.affine_relu_bwd
    elif activation == "tanh":
        fwd, bwd = K.affine_tanh, K.affine_tanh_bwd
    else:
        raise ConfigError(f"unknown dense activation {activation!r}")
    out = Var(fwd(x.value, w.value, b.value))
    if tape is None:
        return out

    def back():
        if out.grad is None:
            return
        if bwd is None:
            gx, gw, gb = K.affine_bwd(x.value, w.value, out.grad, x.track)
        else:
            gx, gw, gb = bwd(x.value, w.value, out.value, out.grad, x.track)
        _acc(x, gx)
        _acc(w, gw)
        _acc(b, gb)

    return _maybe(tape, out, back)


def softmax_rows(tape, z: Var) -> Var:
    out = Var(K.softmax_rows(z.value))
    if tape is None:
        return out

    def back():
        if out.grad is None:
            return
        _acc(z, K.softmax_rows_bwd(out.value, out.grad))

    return _maybe(tape, out, back)


def head_stack(tape, x: Var, w1: Var, b1: Var, w2: Var, b2: Var) -> Var:
    """K per-head two-layer nets over a shared input; output (K, B, d)."""
    y, hid = K.heads_mlp(x.value, w1.value, b1.value, w2.value, b2.value)
    out = Var(y)
    if tape is None:
        return out

    def back():
        if out.grad is None:
            return
        gx, gw1, gb1, gw2, gb2 = K.heads_mlp_bwd(
            x.value, w1.value, w2.value, hid, out.grad)
        _acc(x, gx)
        _acc(w1, gw1)
        _acc(b1, gb1)
        _acc(w2, gw2)
        _acc(b2, gb2)

    return _maybe(tape, out, back)


def attention_scores(tape, h: Var, q: Var) -> Var:
    """Dot score of the query against each head: (B, d) x (K, B, d) -> (B, K)."""
    if h.value.shape[1] != q.value.shape[2]:
        raise ShapeError("attention_scores: query width != head width")
    out = Var(K.attn_scores(h.value, q.value))
    if tape is None:
        return out

    def back():
        if out.grad is None:
            return
        gh, gq = K.attn_scores_bwd(h.value, q.value, out.grad)
        _acc(h, gh)
        _acc(q, gq)

    return _maybe(tape, out, back)


def weighted_head_sum(tape, w: Var, q: Var) -> Var:
    """Per-row weighted sum of heads: (B, K) x (K, B, d) -> (B, d)."""
    out = Var(K.weighted_sum(w.value, q.value))
    if tape is None:
        return out

    def back():
        if out.grad is None:
            return
        gw, gq = K.weighted_sum_bwd(w.value, q.value, out.grad)
        _acc(w, gw)
        _acc(q, gq)

    return _maybe(tape, out, back)


def concat_cols(tape, parts: Sequence[Var]) -> Var:
    out = Var(np.concatenate([p.value for p in parts], axis=1))
    if tape is None:
        return out
    widths = [p.value.shape[1] for p in parts]

    def back():
        if out.grad is None:
            return
        o = 0
        for p, wd in zip(parts, widths):
            if p.track:
                _acc(p, out.grad[:, o : o + wd].copy())
            o += wd

    return _maybe(tape, out, back)


def scale(tape, x: Var, c: float) -> Var:
    out = Var(x.value * c)
    if tape is None:
        return out

    def back():
        if out.grad is not None:
            _acc(x, out.grad * c)

    return _maybe(tape, out, back)


def add_const(tape, x: Var, c) -> Var:
    out = Var(x.value + c)
    if tape is None:
        return out

    def back():
        if out.grad is not None:
            _acc(x, out.grad.copy())

    return _maybe(tape, out, back)


def multiply(tape, a: Var, b: Var) -> Var:
    out = Var(a.value * b.value)
    if tape is None:
        return out

    def back():
        if out.grad is None:
            return
        _acc(a, out.grad * b.value)
        _acc(b, out.grad * a.value)

    return _maybe(tape, out, back)


def reshape(tape, x: Var, shape) -> Var:
    out = Var(x.value.reshape(shape))
    if tape is None:
        return out
    orig = x.value.shape

    def back():
        if out.grad is not None:
            _acc(x, out.grad.reshape(orig))

    return _maybe(tape, out, back)


# ---------------------------------------------------------------------------
# feed-forward networks


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of one fully-connected network."""

    input_dim: int
    hidden_dims: tuple[int, ...]
    output_dim: int
    hidden_activation: str = "relu"
    output_activation: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        if any(int(d) < 1 for d in dims):
            raise ConfigError(f"all MLP dimensions must be >= 1, got {dims}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ConfigError(
                f"hidden_activation must be one of {HIDDEN_ACTIVATIONS}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ConfigError(
                f"output_activation must be one of {OUTPUT_ACTIVATIONS}")

    def layer_dims(self) -> list[tuple[int, int]]:
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        return list(zip(dims[:-1], dims[1:]))


def init_mlp(store: ParameterStore, spec: MlpSpec, rng: np.random.Generator,
             prefix: str = "") -> None:
    """Add this MLP's entries to the store, uniform +-1/sqrt(fan_in)."""
    for i, (fan_in, fan_out) in enumerate(spec.layer_dims()):
        bound = 1.0 / np.sqrt(fan_in)
        store.add(f"{prefix}W{i}", (fan_in, fan_out),
                  rng.uniform(-bound, bound, (fan_in, fan_out)))
        store.add(f"{prefix}b{i}", (fan_out,),
                  rng.uniform(-bound, bound, fan_out))


def param(store: ParameterStore, name: str) -> Var:
    """Leaf Var over a store entry; backward accumulates into store grads."""
    return Var(store.value(name), grad=store.grad(name))


def _check_mlp_params(spec: MlpSpec, store: ParameterStore, prefix: str):
    for i, (fan_in, fan_out) in enumerate(spec.layer_dims()):
        for nm, shape in ((f"{prefix}W{i}", (fan_in, fan_out)),
                          (f"{prefix}b{i}", (fan_out,))):
            if nm not in store:
                raise ConfigError(f"parameter store is missing entry {nm!r}")
            if store.value(nm).shape != shape:
                raise ConfigError(
                    f"entry {nm!r} has shape {store.value(nm).shape}, "
                    f"spec requires {shape}")


def mlp_forward(spec: MlpSpec, store: ParameterStore, x, tape: Tape | None = None,
                prefix: str = "") -> Var:
    """Run the MLP; x is (n,) or (B, n). Returns a Var of matching rank.

    With a tape, the pass is recorded and ``backward(tape, g)`` afterwards
    accumulates d(g . y)/d(params) into the store's gradient slots.
    """
    _check_mlp_params(spec, store, prefix)
    xv = x if isinstance(x, Var) else Var(x, track=False)
    single = xv.value.ndim == 1
    if single:
        xv = reshape(tape, xv, (1, -1))
    if xv.value.shape[1] != spec.input_dim:
        raise ShapeError(
            f"input has width {xv.value.shape[1]}, spec.input_dim is {spec.input_dim}")
    n_layers = len(spec.layer_dims())
    h = xv
    for i in range(n_layers):
        last = i == n_layers - 1
        act = spec.output_activation if last else spec.hidden_activation
        w, b = param(store, f"{prefix}W{i}"), param(store, f"{prefix}b{i}")
        if act == "softmax":
            h = dense(tape, h, w, b, "linear")
            h = softmax_rows(tape, h)
        else:
            h = dense(tape, h, w, b, act)
    if single:
        h = reshape(tape, h, (-1,))
    return h


# ---------------------------------------------------------------------------
# scalar primitives


def softmax(scores) -> np.ndarray:
    """Stable softmax of a 1-D score vector (max-subtracted)."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise ShapeError("softmax expects a non-empty 1-D vector")
    if not np.all(np.isfinite(s)):
        raise NumericsError("softmax scores must be finite")
    e = np.exp(s - s.max())
    return e / e.sum()


def dot_score(h, q) -> float:
    """Inner product score between two equal-length vectors."""
    h = np.asarray(h, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if h.shape != q.shape or h.ndim != 1:
        raise ShapeError(f"dot_score needs equal-length vectors, got {h.shape} and {q.shape}")
    return float(np.dot(h, q))


# ---------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_entry: tuple[str, int]
    probes: int
    details: list = field(default_factory=list, repr=False)


def _rel_error(a: float, n: float, floor: float = 1e-10) -> float:
    # central differences cannot resolve magnitudes near float noise;
    # below the floor both sides are treated as zero
    if abs(a - n) < floor:
        return 0.0
    return abs(a - n) / max(abs(a), abs(n))


def grad_check(spec: MlpSpec, store: ParameterStore, probes: int = 100,
               eps: float = 1e-5, seed: int = 0, prefix: str = "") -> GradCheckReport:
    """Compare tape gradients to central finite differences on random scalars.

    A random input and a random output weighting g define the scalar
    objective f = g . mlp(x); `probes` parameter coordinates are then
    perturbed by +-eps. Deterministic for a fixed seed.
    """
    if probes < 1:
        raise ConfigError("probes must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(spec.input_dim)
    g = rng.standard_normal(spec.output_dim)

    tape = Tape()
    out = mlp_forward(spec, store, x, tape, prefix)
    store.zero_grads()
    backward(tape, g)
    analytic = store.flat_grads.copy()
    store.zero_grads()

    flat = store.flat_values
    manifest = store.manifest()

    def entry_of(flat_idx):
        for name, shape, off in reversed(manifest):
            if flat_idx >= off:
                return name, flat_idx - off
        return manifest[0][0], flat_idx

    idxs = rng.integers(0, flat.size, size=probes)
    worst = (0.0, manifest[0][0], 0)
    details = []
    for idx in idxs:
        old = flat[idx]
        flat[idx] = old + eps
        f_plus = float(np.dot(g, mlp_forward(spec, store, x, None, prefix).value))
        flat[idx] = old - eps
        f_minus = float(np.dot(g, mlp_forward(spec, store, x, None, prefix).value))
        flat[idx] = old
        numeric = (f_plus - f_minus) / (2.0 * eps)
        err = _rel_error(analytic[idx], numeric)
        details.append((int(idx), analytic[idx], numeric, err))
        if err >= worst[0]:
            name, local = entry_of(int(idx))
            worst = (err, name, local)
    return GradCheckReport(max_rel_error=worst[0], worst_entry=(worst[1], worst[2]),
                           probes=probes, details=details)
