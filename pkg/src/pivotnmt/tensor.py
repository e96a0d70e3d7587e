"""Dense float64 tensors with reverse-mode automatic differentiation.

The engine keeps a dynamic tape: every tracked operation records its parent
tensors and a backward closure on the output node. ``backward`` on a scalar
loss walks the recorded graph in reverse topological order and accumulates
``d loss / d tensor`` into each tracked tensor's ``grad`` buffer. Gradients
add up until the caller zeroes them, which is what batch-accumulation
training loops rely on.

Everything is float64. Tensors are immutable once created except for their
grad buffers; recording is confined to the thread that runs the forward
pass, so independent evaluations may run concurrently under ``no_grad``.
"""

from __future__ import annotations

import itertools
import math
import threading
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ContractError, NumericError, ShapeError

_TLS = threading.local()
_NODE_IDS = itertools.count()


def grad_enabled() -> bool:
    return getattr(_TLS, "grad_enabled", True)


@contextmanager
def no_grad():
    """Disable tape recording inside the block (decoding, reward scoring)."""
    prev = grad_enabled()
    _TLS.grad_enabled = False
    try:
        yield
    finally:
        _TLS.grad_enabled = prev


class Tensor:
    """N-dimensional float64 array plus optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "node_id", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.node_id = next(_NODE_IDS)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def parameter(data) -> Tensor:
    """A leaf tensor that accumulates gradients."""
    return Tensor(data, requires_grad=True)


def constant(data) -> Tensor:
    return Tensor(data)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _tracking(*tensors: Tensor) -> bool:
    return grad_enabled() and any(t.requires_grad for t in tensors)


def _attach(out: Tensor, parents: tuple[Tensor, ...], backward: Callable[[], None]) -> None:
    out.requires_grad = True
    out._parents = parents
    out._backward = backward


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a gradient back to the shape of a broadcast operand."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def _swap_last(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(t) into every tracked tensor reachable from loss."""
    if loss.shape != ():
        raise ContractError(f"backward expects a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ContractError("backward called on a tensor that is not on the active tape")

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    if loss.grad is None:
        loss.grad = np.zeros_like(loss.data)
    loss.grad += 1.0
    for node in reversed(topo):
        if node._backward is not None:
            node._backward()


def zero_grads(tensors: Iterable[Tensor]) -> None:
    for t in tensors:
        t.zero_grad()


# ---------------------------------------------------------------------------
# Primitives
# ---------------------------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    out = Tensor(np.matmul(a.data, b.data))
    if _tracking(a, b):
        def bwd():
            g = out.grad
            _accum(a, _unbroadcast(np.matmul(g, _swap_last(b.data)), a.shape))
            _accum(b, _unbroadcast(np.matmul(_swap_last(a.data), g), b.shape))
        _attach(out, (a, b), bwd)
    return out


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError as exc:
        raise ShapeError(f"add: cannot broadcast {a.shape} with {b.shape}") from exc
    out = Tensor(data)
    if _tracking(a, b):
        def bwd():
            _accum(a, _unbroadcast(out.grad, a.shape))
            _accum(b, _unbroadcast(out.grad, b.shape))
        _attach(out, (a, b), bwd)
    return out


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError as exc:
        raise ShapeError(f"multiply: cannot broadcast {a.shape} with {b.shape}") from exc
    out = Tensor(data)
    if _tracking(a, b):
        def bwd():
            _accum(a, _unbroadcast(out.grad * b.data, a.shape))
            _accum(b, _unbroadcast(out.grad * a.data, b.shape))
        _attach(out, (a, b), bwd)
    return out


def neg(a) -> Tensor:
    return scale(a, -1.0)


def sub(a, b) -> Tensor:
    return add(a, neg(b))


def scale(a, s: float) -> Tensor:
    a = _as_tensor(a)
    s = float(s)
    out = Tensor(a.data * s)
    if _tracking(a):
        def bwd():
            _accum(a, out.grad * s)
        _attach(out, (a,), bwd)
    return out


def linear(x, weight, bias=None) -> Tensor:
    """x @ weight (+ bias). weight is [d_in, d_out], bias [d_out]."""
    y = matmul(x, weight)
    if bias is not None:
        y = add(y, bias)
    return y


def relu(a) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(np.maximum(a.data, 0.0))
    if _tracking(a):
        def bwd():
            _accum(a, out.grad * (a.data > 0.0))
        _attach(out, (a,), bwd)
    return out


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(a) -> Tensor:
    """tanh-approximation GELU."""
    a = _as_tensor(a)
    x = a.data
    inner = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    out = Tensor(0.5 * x * (1.0 + t))
    if _tracking(a):
        def bwd():
            dinner = _GELU_C * (1.0 + 3 * 0.044715 * x**2)
            dx = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * dinner
            _accum(a, out.grad * dx)
        _attach(out, (a,), bwd)
    return out


def dropout(a, rate: float, rng: np.random.Generator | None, train: bool) -> Tensor:
    """Inverted dropout; identity when not training or rate is 0."""
    a = _as_tensor(a)
    if not train or rate == 0.0:
        return a
    if not 0.0 <= rate < 1.0:
        raise ShapeError(f"dropout: rate {rate} outside [0, 1)")
    if rng is None:
        raise ContractError("dropout in training mode needs an explicit rng")
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    out = Tensor(a.data * keep)
    if _tracking(a):
        def bwd():
            _accum(a, out.grad * keep)
        _attach(out, (a,), bwd)
    return out


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: incompatible shapes {[t.shape for t in ts]}") from exc
    out = Tensor(data)
    if _tracking(*ts):
        sizes = [t.shape[axis] for t in ts]
        splits = np.cumsum(sizes)[:-1]
        def bwd():
            for t, piece in zip(ts, np.split(out.grad, splits, axis=axis)):
                _accum(t, piece)
        _attach(out, tuple(ts), bwd)
    return out


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = _as_tensor(a)
    try:
        data = a.data.reshape(tuple(shape))
    except ValueError as exc:
        raise ShapeError(f"reshape: {a.shape} -> {tuple(shape)}") from exc
    out = Tensor(data)
    if _tracking(a):
        def bwd():
            _accum(a, out.grad.reshape(a.shape))
        _attach(out, (a,), bwd)
    return out


def transpose(a, axes: Sequence[int]) -> Tensor:
    a = _as_tensor(a)
    axes = tuple(axes)
    out = Tensor(a.data.transpose(axes))
    if _tracking(a):
        inverse = tuple(np.argsort(axes))
        def bwd():
            _accum(a, out.grad.transpose(inverse))
        _attach(out, (a,), bwd)
    return out


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis to mean 0 / variance 1, then scale and shift."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer-norm: gain/bias {gain.shape}/{bias.shape} do not match feature dim {d}")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered**2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out = Tensor(xhat * gain.data + bias.data)
    if _tracking(x, gain, bias):
        def bwd():
            g = out.grad
            sum_axes = tuple(range(g.ndim - 1))
            _accum(gain, (g * xhat).sum(axis=sum_axes))
            _accum(bias, g.sum(axis=sum_axes))
            dxhat = g * gain.data
            # standard layer-norm backward over the last axis
            dx = inv / d * (d * dxhat
                            - dxhat.sum(axis=-1, keepdims=True)
                            - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True))
            _accum(x, dx)
        _attach(out, (x, gain, bias), bwd)
    return out


def embedding(table, ids) -> Tensor:
    """Row lookup: out[..., :] = table[ids[...], :]."""
    table = _as_tensor(table)
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise ShapeError("embedding-lookup: ids must be integers")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding-lookup: id out of range for table of {table.shape[0]} rows")
    out = Tensor(table.data[ids])
    if _tracking(table):
        def bwd():
            g = np.zeros_like(table.data)
            np.add.at(g, ids.reshape(-1), out.grad.reshape(-1, table.shape[1]))
            _accum(table, g)
        _attach(out, (table,), bwd)
    return out


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))
    if _tracking(a):
        def bwd():
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(g, a.shape).copy())
        _attach(out, (a,), bwd)
    return out


def mean_(a) -> Tensor:
    a = _as_tensor(a)
    return scale(sum_(a), 1.0 / a.size)


def softmax(logits, axis: int = -1) -> Tensor:
    """Numerically stable softmax along ``axis``; rows sum to 1 within 1e-9."""
    logits = _as_tensor(logits)
    if not np.isfinite(logits.data).all():
        raise NumericError("softmax: non-finite input")
    shifted = logits.data - logits.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(s)
    if _tracking(logits):
        def bwd():
            g = out.grad
            _accum(logits, (g - (g * s).sum(axis=axis, keepdims=True)) * s)
        _attach(out, (logits,), bwd)
    return out


def log_softmax(logits, axis: int = -1) -> Tensor:
    logits = _as_tensor(logits)
    if not np.isfinite(logits.data).all():
        raise NumericError("log-softmax: non-finite input")
    shifted = logits.data - logits.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    ls = shifted - lse
    out = Tensor(ls)
    if _tracking(logits):
        def bwd():
            g = out.grad
            _accum(logits, g - np.exp(ls) * g.sum(axis=axis, keepdims=True))
        _attach(out, (logits,), bwd)
    return out


def _check_targets(targets: np.ndarray, vocab: int, ignore_id: int) -> np.ndarray:
    live = targets != ignore_id
    bad = live & ((targets < 0) | (targets >= vocab))
    if bad.any():
        raise IndexError(f"cross-entropy: target id out of range for vocabulary of {vocab}")
    return live


def cross_entropy(logits, targets, ignore_id: int = -1) -> Tensor:
    """Sum over non-ignored positions of -log p(target).

    ``logits`` is [..., V]; unnormalized scores and already-normalized
    log-probabilities both work (log-softmax is idempotent). Returns a
    scalar tensor; gradient at the logits is softmax minus one-hot.
    """
    logits = _as_tensor(logits)
    targets = np.asarray(targets)
    vocab = logits.shape[-1]
    if targets.shape != logits.shape[:-1]:
        raise ShapeError(f"cross-entropy: targets {targets.shape} do not match logits {logits.shape}")
    live = _check_targets(targets, vocab, ignore_id)
    shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - lse
    safe = np.where(live, targets, 0)
    chosen = np.take_along_axis(logp, safe[..., None], axis=-1)[..., 0]
    out = Tensor(-(chosen * live).sum())
    if _tracking(logits):
        def bwd():
            g = float(out.grad)
            p = np.exp(logp)
            onehot = np.zeros_like(p)
            np.put_along_axis(onehot, safe[..., None], 1.0, axis=-1)
            _accum(logits, g * (p - onehot) * live[..., None])
        _attach(out, (logits,), bwd)
    return out


def sequence_log_prob(logits, ids, ignore_id: int = -1) -> Tensor:
    """Per-sequence sum of chosen log-probs: [B, T, V] x [B, T] -> [B]."""
    logits = _as_tensor(logits)
    ids = np.asarray(ids)
    if logits.ndim != 3 or ids.shape != logits.shape[:-1]:
        raise ShapeError(f"sequence-log-prob: ids {ids.shape} do not match logits {logits.shape}")
    live = _check_targets(ids, logits.shape[-1], ignore_id)
    shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - lse
    safe = np.where(live, ids, 0)
    chosen = np.take_along_axis(logp, safe[..., None], axis=-1)[..., 0]
    out = Tensor((chosen * live).sum(axis=1))
    if _tracking(logits):
        def bwd():
            g = out.grad[:, None, None]
            p = np.exp(logp)
            onehot = np.zeros_like(p)
            np.put_along_axis(onehot, safe[..., None], 1.0, axis=-1)
            _accum(logits, g * (onehot - p) * live[..., None])
        _attach(out, (logits,), bwd)
    return out


_PRIMITIVES = {
    "matmul": matmul,
    "add": add,
    "multiply": mul,
    "layer-norm": layer_norm,
    "embedding-lookup": embedding,
    "linear": linear,
    "relu": relu,
    "gelu": gelu,
    "dropout": dropout,
    "concat": concat,
    "reshape": reshape,
    "transpose": transpose,
    "softmax": softmax,
    "log-softmax": log_softmax,
    "cross-entropy": cross_entropy,
    "sum": sum_,
    "scale": scale,
}


def apply_primitive(op_kind: str, inputs: Sequence, **kwargs) -> Tensor:
    """Dispatch a primitive by name; unknown kinds raise ShapeError."""
    if op_kind not in _PRIMITIVES:
        raise ShapeError(f"unknown primitive op-kind: {op_kind!r}")
    return _PRIMITIVES[op_kind](*inputs, **kwargs)
