"""Minimal reverse-mode automatic differentiation over dense numpy tensors.

Usage:
    with Tape() as tape:
        w = tape.watch(w_array, "w")
        loss = ag.sum(ag.mul(w, w))
    grads = backward(tape, loss)   # {"w": 2 * w_array}

Design notes:
- All compute is float64, not 32-bit compute with 64-bit reductions; grad checks at eps=1e-5
  depend on it. Parameters stay float32 in utils/optim.py and are widened on entry.
- An op is recorded on the active tape only when at least one input requires grad. Tensors
  built outside a tape (inference) carry no history.
- Every primitive checks its output for NaN/Inf and raises NonFiniteError.
- Binary elementwise ops broadcast like numpy; backward sums gradients back to input shape.
"""
from __future__ import annotations

import contextvars
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from utils.errors import NonFiniteError, NotScalarError, ShapeMismatchError

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]
GradFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_ACTIVE_TAPE: contextvars.ContextVar[Optional["Tape"]] = contextvars.ContextVar("active_tape", default=None)

__all__ = [
    "Tensor",
    "Tape",
    "backward",
    "as_tensor",
    "add",
    "sub",
    "mul",
    "scale",
    "neg",
    "matmul",
    "conv1d",
    "sigmoid",
    "tanh",
    "relu",
    "softmax",
    "log_softmax",
    "log",
    "abs",
    "clip",
    "sum",
    "mean",
    "maxpool_time",
    "slice",
    "concat",
    "transpose",
    "reshape",
    "straight_through",
]


class Tensor:
    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name

    def __repr__(self) -> str:
        return f"<Tensor shape={self.shape} grad={self.requires_grad}>"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise NotScalarError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __neg__(self): return neg(self)
    def __matmul__(self, other): return matmul(self, other)
    def __getitem__(self, idx): return slice(self, idx)


class _Node:
    __slots__ = ("op", "out", "parents", "grad_fn")

    def __init__(self, op: str, out: Tensor, parents: Tuple[Tensor, ...], grad_fn: GradFn):
        self.op = op
        self.out = out
        self.parents = parents
        self.grad_fn = grad_fn


class Tape:
    """Ordered record of executed primitives; inputs always precede the ops that use them."""

    def __init__(self) -> None:
        self.nodes: List[_Node] = []
        self.leaves: Dict[str, Tensor] = {}
        self._token: Optional[contextvars.Token] = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc) -> None:
        if self._token is not None:
            _ACTIVE_TAPE.reset(self._token)
            self._token = None

    def watch(self, value, name: str) -> Tensor:
        """Register a differentiable leaf under a unique ``name``."""
        if name in self.leaves:
            raise ValueError(f"leaf '{name}' already watched on this tape")
        leaf = Tensor(value, requires_grad=True, name=name)
        self.leaves[name] = leaf
        return leaf

    def op_names(self) -> List[str]:
        return [n.op for n in self.nodes]


def as_tensor(x: ArrayLike) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(op: str, value: np.ndarray, parents: Tuple[Tensor, ...], grad_fn: GradFn) -> Tensor:
    value = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(f"{op} produced NaN or Inf")
    tape = _ACTIVE_TAPE.get()
    needs = tape is not None and any(p.requires_grad for p in parents)
    out = Tensor(value, requires_grad=needs)
    if needs:
        tape.nodes.append(_Node(op, out, parents, grad_fn))
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise ShapeMismatchError(f"{op}: cannot broadcast {a.shape} with {b.shape}") from e


def backward(tape: Tape, loss: Tensor) -> Dict[str, np.ndarray]:
    """Reverse sweep over ``tape``; returns the gradient of ``loss`` for every watched leaf.

    Leaves the loss does not depend on get zero gradients.
    """
    if loss.data.size != 1:
        raise NotScalarError(f"loss must be scalar, got shape {loss.shape}")
    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.out), None)
        if g is None:
            continue
        for parent, pg in zip(node.parents, node.grad_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            pg = _unbroadcast(np.asarray(pg, dtype=np.float64), parent.shape)
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg
    return {name: grads.get(id(leaf), np.zeros_like(leaf.data)) for name, leaf in tape.leaves.items()}


# --- elementwise ----------------------------------------------------------

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)
    return _record("add", a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)
    return _record("sub", a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)
    return _record("mul", a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def scale(a: ArrayLike, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    return _record("scale", a.data * c, (a,), lambda g: (g * c,))


def neg(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return _record("neg", -a.data, (a,), lambda g: (-g,))


def sigmoid(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    x = a.data
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _record("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _record("tanh", out, (a,), lambda g: (g * (1.0 - out * out),))


def relu(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _record("relu", np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def log(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)
    return _record("log", out, (a,), lambda g: (g / a.data,))


def abs(a: ArrayLike) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    return _record("abs", np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def clip(a: ArrayLike, lo: float, hi: float) -> Tensor:
    a = as_tensor(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return _record("clip", np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,))


def straight_through(hard: np.ndarray, soft: Tensor) -> Tensor:
    """Forward value ``hard``; gradient passes to ``soft`` unchanged."""
    hard = np.asarray(hard, dtype=np.float64)
    if hard.shape != soft.shape:
        raise ShapeMismatchError(f"straight_through: {hard.shape} vs {soft.shape}")
    return _record("straight_through", hard, (soft,), lambda g: (g,))


# --- softmax family (last axis) -------------------------------------------

def softmax(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def grad_fn(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return _record("softmax", out, (a,), grad_fn)


def log_softmax(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    z = a.data - a.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    out = z - lse
    probs = np.exp(out)
    return _record("log_softmax", out, (a,), lambda g: (g - probs * g.sum(axis=-1, keepdims=True),))


# --- reductions -----------------------------------------------------------

def sum(a: ArrayLike, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def grad_fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _record("sum", out, (a,), grad_fn)


def mean(a: ArrayLike, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else a.shape[axis]
    out = a.data.mean(axis=axis, keepdims=keepdims)

    def grad_fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, a.shape).copy(),)

    return _record("mean", out, (a,), grad_fn)


def maxpool_time(a: ArrayLike) -> Tensor:
    """Global max over the time axis of a (T, C) tensor -> (C,). Ties go to the earliest frame."""
    a = as_tensor(a)
    if a.ndim != 2 or a.shape[0] < 1:
        raise ShapeMismatchError(f"maxpool_time expects (T, C) with T >= 1, got {a.shape}")
    idx = np.argmax(a.data, axis=0)
    cols = np.arange(a.shape[1])

    def grad_fn(g):
        out = np.zeros_like(a.data)
        out[idx, cols] = g
        return (out,)

    return _record("maxpool_time", a.data[idx, cols], (a,), grad_fn)


# --- linear algebra -------------------------------------------------------

def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """(n,) @ (n, m) or (t, n) @ (n, m)."""
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim != 2 or a.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ShapeMismatchError(f"matmul: {a.shape} @ {b.shape}")
    a2 = np.atleast_2d(a.data)

    def grad_fn(g):
        g2 = g.reshape(a2.shape[0], b.shape[1])
        return (g2 @ b.data.T).reshape(a.shape), a2.T @ g2

    return _record("matmul", a.data @ b.data, (a, b), grad_fn)


def conv1d(x: ArrayLike, w: ArrayLike, stride: int = 1) -> Tensor:
    """Valid (unpadded) strided convolution of a time-major signal.

    x: (T, C_in), w: (K, C_in, C_out) -> (floor((T - K) / stride) + 1, C_out).
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 2 or w.ndim != 3 or x.shape[1] != w.shape[1]:
        raise ShapeMismatchError(f"conv1d: input {x.shape} with kernel {w.shape}")
    if stride < 1:
        raise ShapeMismatchError("conv1d: stride must be >= 1")
    k = w.shape[0]
    t_in = x.shape[0]
    if t_in < k:
        raise ShapeMismatchError(f"conv1d: input length {t_in} shorter than kernel {k}")
    t_out = (t_in - k) // stride + 1
    # (t_out, C_in, K)
    cols = np.lib.stride_tricks.sliding_window_view(x.data, k, axis=0)[::stride][:t_out]
    out = np.einsum("tck,kco->to", cols, w.data)

    def grad_fn(g):
        gw = np.einsum("tck,to->kco", cols, g)
        gcols = np.einsum("to,kco->tck", g, w.data)
        gx = np.zeros_like(x.data)
        span = stride * (t_out - 1) + 1
        for j in range(k):
            gx[j:j + span:stride] += gcols[:, :, j]
        return gx, gw

    return _record("conv1d", out, (x, w), grad_fn)


# --- structural -----------------------------------------------------------

def slice(a: ArrayLike, idx) -> Tensor:  # noqa: A001
    a = as_tensor(a)

    def grad_fn(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return _record("slice", a.data[idx], (a,), grad_fn)


def concat(parts: Sequence[ArrayLike], axis: int = -1) -> Tensor:
    tensors = tuple(as_tensor(p) for p in parts)
    if not tensors:
        raise ShapeMismatchError("concat of zero tensors")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeMismatchError(f"concat: {e}") from e
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _record("concat", out, tensors, lambda g: tuple(np.split(g, bounds, axis=axis)))


def transpose(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return _record("transpose", a.data.T, (a,), lambda g: (g.T,))


def reshape(a: ArrayLike, shape: Tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError as e:
        raise ShapeMismatchError(f"reshape {a.shape} -> {shape}") from e
    return _record("reshape", out, (a,), lambda g: (g.reshape(a.shape),))
