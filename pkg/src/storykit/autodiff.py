"""Dense-tensor math with reverse-mode automatic differentiation.

Everything above this module (LSTM encoder/decoder, attention, attribute
embeddings, frame predictor) is built from the primitives here. Values are
numpy arrays; the graph is recorded implicitly as each op runs and replayed
in reverse topological order by :func:`backward`.

Tests run in 64-bit floats. Training may switch to 32-bit via
:func:`set_default_dtype`.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

_DEFAULT_DTYPE = np.float64
_GRAD_ENABLED = True


def set_default_dtype(dtype) -> None:
    global _DEFAULT_DTYPE
    if dtype not in (np.float32, np.float64):
        raise ValueError("dtype must be float32 or float64")
    _DEFAULT_DTYPE = dtype


def default_dtype():
    return _DEFAULT_DTYPE


@contextmanager
def no_grad():
    """Disable graph recording (inference mode)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    """A graph node holding a numpy value and, after backward(), a gradient."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, value, requires_grad=False, _parents=(), _backward=None):
        self.value = np.asarray(value, dtype=_DEFAULT_DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"

    # convenience operator sugar
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(value, rng=None) -> Tensor:
    return Tensor(value, requires_grad=True)


def _track(*inputs: Tensor) -> bool:
    return _GRAD_ENABLED and any(t.requires_grad for t in inputs)


def _make(value, inputs, backward_fn):
    if _track(*inputs):
        return Tensor(value, requires_grad=True, _parents=tuple(inputs), _backward=backward_fn)
    return Tensor(value)


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum `grad` down to `shape` (reverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.value + b.value

    def bwd(g):
        return _unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape)

    return _make(out, (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.value - b.value

    def bwd(g):
        return _unbroadcast(g, a.value.shape), _unbroadcast(-g, b.value.shape)

    return _make(out, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.value * b.value

    def bwd(g):
        return (_unbroadcast(g * b.value, a.value.shape),
                _unbroadcast(g * a.value, b.value.shape))

    return _make(out, (a, b), bwd)


def scale(a, k: float) -> Tensor:
    a = as_tensor(a)

    def bwd(g):
        return (g * k,)

    return _make(a.value * k, (a,), bwd)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.value.ndim != 2 or b.value.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.value.shape} @ {b.value.shape}")
    out = a.value @ b.value

    def bwd(g):
        return g @ b.value.T, a.value.T @ g

    return _make(out, (a, b), bwd)


def transpose(a) -> Tensor:
    a = as_tensor(a)

    def bwd(g):
        return (g.T,)

    return _make(a.value.T, (a,), bwd)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    # stable two-branch form
    out = np.empty_like(a.value)
    pos = a.value >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a.value[pos]))
    ex = np.exp(a.value[~pos])
    out[~pos] = ex / (1.0 + ex)

    def bwd(g):
        return (g * out * (1.0 - out),)

    return _make(out, (a,), bwd)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.value)

    def bwd(g):
        return (g * (1.0 - out * out),)

    return _make(out, (a,), bwd)


def concat(tensors, axis=-1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.value for t in tensors], axis=axis)
    sizes = [t.value.shape[axis] for t in tensors]

    def bwd(g):
        splits = np.cumsum(sizes)[:-1]
        return tuple(np.split(g, splits, axis=axis))

    return _make(out, tuple(tensors), bwd)


def slice_axis(a, start, stop, axis=-1) -> Tensor:
    a = as_tensor(a)
    idx = [slice(None)] * a.value.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    out = a.value[idx]

    def bwd(g):
        full = np.zeros_like(a.value)
        full[idx] = g
        return (full,)

    return _make(out, (a,), bwd)


def stack(tensors, axis=1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.stack([t.value for t in tensors], axis=axis)

    def bwd(g):
        parts = np.split(g, len(tensors), axis=axis)
        return tuple(p.squeeze(axis=axis) for p in parts)

    return _make(out, tuple(tensors), bwd)


def tsum(a) -> Tensor:
    a = as_tensor(a)
    out = np.asarray(a.value.sum())

    def bwd(g):
        return (np.full_like(a.value, float(g)),)

    return _make(out, (a,), bwd)


def rows(table, ids) -> Tensor:
    """Embedding lookup: select rows `ids` (int array) from a 2-D table."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    out = table.value[ids]

    def bwd(g):
        full = np.zeros_like(table.value)
        np.add.at(full, ids, g)
        return (full,)

    return _make(out, (table,), bwd)


def masked_softmax(scores, mask=None) -> Tensor:
    """Row-wise softmax with max-subtraction; masked positions get weight 0.

    `mask` is a constant 0/1 array broadcastable to `scores`.
    """
    scores = as_tensor(scores)
    v = scores.value
    if mask is not None:
        v = np.where(np.asarray(mask, dtype=bool), v, -1e30)
    v = v - v.max(axis=-1, keepdims=True)
    e = np.exp(v)
    out = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - dot),)

    return _make(out, (scores,), bwd)


def softmax_np(v: np.ndarray) -> np.ndarray:
    """Plain numpy stable softmax over the last axis (no graph)."""
    v = v - v.max(axis=-1, keepdims=True)
    e = np.exp(v)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy_logits(logits, targets, mask=None) -> Tensor:
    """Sum of masked per-row negative log-likelihoods.

    logits: (B, V); targets: (B,) int ids; mask: (B,) 0/1 constants.
    Gradient at the logits is softmax(logits) - onehot(target), masked.
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if np.any(targets < 0) or np.any(targets >= logits.value.shape[-1]):
        raise ValueError("cross_entropy target id out of vocabulary range")
    m = np.ones(len(targets), dtype=logits.value.dtype) if mask is None \
        else np.asarray(mask, dtype=logits.value.dtype)
    v = logits.value - logits.value.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(v).sum(axis=-1))
    logp = v[np.arange(len(targets)), targets] - lse
    out = np.asarray(-(logp * m).sum())
    probs = np.exp(v - lse[:, None])

    def bwd(g):
        d = probs.copy()
        d[np.arange(len(targets)), targets] -= 1.0
        return (float(g) * d * m[:, None],)

    return _make(out, (logits,), bwd)


def bdot(a, s) -> Tensor:
    """Batched dot products: out[b, t] = a[b] . s[b, t].

    a: (B, Z), s: (B, T, Z) -> (B, T). Used for attention scores.
    """
    a, s = as_tensor(a), as_tensor(s)
    out = np.einsum("bz,btz->bt", a.value, s.value)

    def bwd(g):
        da = np.einsum("bt,btz->bz", g, s.value)
        ds = np.einsum("bt,bz->btz", g, a.value)
        return da, ds

    return _make(out, (a, s), bwd)


def wsum(w, s) -> Tensor:
    """Weighted sum over source positions: out[b] = sum_t w[b,t] * s[b,t].

    w: (B, T), s: (B, T, Z) -> (B, Z). Used for attention context vectors.
    """
    w, s = as_tensor(w), as_tensor(s)
    out = np.einsum("bt,btz->bz", w.value, s.value)

    def bwd(g):
        dw = np.einsum("bz,btz->bt", g, s.value)
        ds = np.einsum("bt,bz->btz", w.value, g)
        return dw, ds

    return _make(out, (w, s), bwd)


def lerp_mask(new, old, mask) -> Tensor:
    """mask * new + (1 - mask) * old with a constant (B, 1) mask.

    Carries recurrent state through padded batch positions.
    """
    new, old = as_tensor(new), as_tensor(old)
    m = np.asarray(mask, dtype=new.value.dtype)
    out = m * new.value + (1.0 - m) * old.value

    def bwd(g):
        return _unbroadcast(g * m, new.value.shape), _unbroadcast(g * (1.0 - m), old.value.shape)

    return _make(out, (new, old), bwd)


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------

def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(node) into .grad over the recorded graph.

    Topological order is rebuilt by depth-first search from the loss node;
    leaves outside the reachable graph keep grad None (treated as zero).
    """
    if loss.value.size != 1:
        raise ValueError("backward() requires a scalar loss")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack_: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack_.append((p, False))

    loss.grad = np.ones_like(loss.value)
    for node in reversed(order):
        if node._backward is None or node.grad is None:
            continue
        grads = node._backward(node.grad)
        for p, g in zip(node._parents, grads):
            if not p.requires_grad:
                continue
            if p.grad is None:
                p.grad = np.array(g, dtype=p.value.dtype)
            else:
                p.grad = p.grad + g


def zero_grads(params) -> None:
    for t in (params.values() if isinstance(params, dict) else params):
        t.grad = None


# ---------------------------------------------------------------------------
# LSTM cell
# ---------------------------------------------------------------------------

@dataclass
class LstmWeights:
    """Gate weights for one LSTM layer: input dim a, state dim d.

    Each gate matrix is (d, a + d), applied to [x; h_prev]; biases are (d,).
    """

    w_i: Tensor
    w_f: Tensor
    w_o: Tensor
    w_g: Tensor
    b_i: Tensor
    b_f: Tensor
    b_o: Tensor
    b_g: Tensor

    @property
    def state_dim(self) -> int:
        return self.w_i.value.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_i.value.shape[1] - self.w_i.value.shape[0]

    def tensors(self) -> dict:
        return {"w_i": self.w_i, "w_f": self.w_f, "w_o": self.w_o, "w_g": self.w_g,
                "b_i": self.b_i, "b_f": self.b_f, "b_o": self.b_o, "b_g": self.b_g}

    def stacked(self) -> tuple[Tensor, Tensor]:
        """(a+d, 4d) weight and (4d,) bias, gate order i|f|o|g.

        Build once per sequence so every timestep shares the same nodes.
        """
        w = transpose(concat([self.w_i, self.w_f, self.w_o, self.w_g], axis=0))
        b = concat([self.b_i, self.b_f, self.b_o, self.b_g], axis=0)
        return w, b


def init_lstm_weights(input_dim: int, state_dim: int, rng: np.random.Generator,
                      init_scale: float = 0.08) -> LstmWeights:
    """Uniform [-init_scale, init_scale] initialization for all gate blocks."""
    def u(*shape):
        return Tensor(rng.uniform(-init_scale, init_scale, shape), requires_grad=True)

    d, a = state_dim, input_dim
    return LstmWeights(u(d, a + d), u(d, a + d), u(d, a + d), u(d, a + d),
                       u(d), u(d), u(d), u(d))


def lstm_step(x, h_prev, c_prev, w_stacked, b_stacked, d: int):
    """One LSTM step with the pre-stacked (a+d, 4d) weight matrix.

    x: (B, a), h_prev/c_prev: (B, d). Returns (h, c), each (B, d).
    """
    xh = concat([x, h_prev], axis=-1)
    gates = add(matmul(xh, w_stacked), b_stacked)
    i = sigmoid(slice_axis(gates, 0, d))
    f = sigmoid(slice_axis(gates, d, 2 * d))
    o = sigmoid(slice_axis(gates, 2 * d, 3 * d))
    g = tanh(slice_axis(gates, 3 * d, 4 * d))
    c = add(mul(f, c_prev), mul(i, g))
    h = mul(o, tanh(c))
    return h, c


def lstm_cell(x, h_prev, c_prev, w: LstmWeights):
    """Standard LSTM cell on a single vector (or a (B, a) batch).

    i, f, o = sigmoid gates; g = tanh candidate; c = f*c_prev + i*g;
    h = o * tanh(c).
    """
    x, h_prev, c_prev = as_tensor(x), as_tensor(h_prev), as_tensor(c_prev)
    d = w.state_dim
    if x.value.shape[-1] != w.input_dim:
        raise ValueError(f"lstm_cell: input dim {x.value.shape[-1]} != weights input dim {w.input_dim}")
    if h_prev.value.shape[-1] != d or c_prev.value.shape[-1] != d:
        raise ValueError(f"lstm_cell: state dim mismatch, expected {d}")

    single = x.value.ndim == 1
    if single:
        x = reshape(x, (1, -1))
        h_prev = reshape(h_prev, (1, -1))
        c_prev = reshape(c_prev, (1, -1))
    ws, bs = w.stacked()
    h, c = lstm_step(x, h_prev, c_prev, ws, bs, d)
    if single:
        h = reshape(h, (d,))
        c = reshape(c, (d,))
    return h, c


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.value.shape
    out = a.value.reshape(shape)

    def bwd(g):
        return (g.reshape(old),)

    return _make(out, (a,), bwd)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState) -> AdamState:
    """Bias-corrected Adam update, in place on the parameter values."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.value.shape:
            raise ValueError(f"adam_step: grad shape {g.shape} != param shape {p.value.shape} for {name}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.value)
            v = np.zeros_like(p.value)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        m_hat = m / (1 - b1 ** state.t)
        v_hat = v / (1 - b2 ** state.t)
        p.value = p.value - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return state


def clip_global_norm(grads: dict, max_norm: float) -> dict:
    total = np.sqrt(sum(float((g * g).sum()) for g in grads.values() if g is not None))
    if total > max_norm and total > 0:
        k = max_norm / total
        return {n: (g * k if g is not None else None) for n, g in grads.items()}
    return grads


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------

def grad_check(f, params: dict, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    `f(params) -> Tensor scalar` must be evaluable repeatedly; parameters are
    perturbed coordinate-wise.
    """
    if not 0 < eps <= 1e-2:
        raise ValueError("eps must be in (0, 1e-2]")
    zero_grads(params)
    loss = f(params)
    if not np.isfinite(loss.value):
        raise ValueError("grad_check: non-finite loss")
    backward(loss)
    analytic = {n: (p.grad if p.grad is not None else np.zeros_like(p.value))
                for n, p in params.items()}

    worst = 0.0
    for name, p in params.items():
        flat = p.value.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            with no_grad():
                fp = float(f(params).value)
            flat[idx] = orig - eps
            with no_grad():
                fm = float(f(params).value)
            flat[idx] = orig
            numeric = (fp - fm) / (2 * eps)
            a = analytic[name].reshape(-1)[idx]
            err = abs(a - numeric) / (abs(a) + abs(numeric) + 1e-12)
            worst = max(worst, err)
    return worst
