"""Network building blocks composed from the autograd primitives.

Parameters live in a ParamStore under dotted names (``"extractor.0.w"``); forward functions
take a ``{name: Tensor}`` mapping so the same code serves training (watched leaves) and
inference (constants).
"""
from __future__ import annotations

from typing import Dict, Sequence

import numpy as np

from utils import autograd as ag
from utils.autograd import Tensor
from utils.errors import SignalTooShortError
from utils.optim import ParamStore

Params = Dict[str, Tensor]

__all__ = [
    "Params",
    "receptive_field",
    "pad_to_frames",
    "init_linear",
    "linear",
    "init_conv_stack",
    "conv_stack",
    "init_gru",
    "gru",
    "init_attention",
    "self_attention",
]


def receptive_field(kernel: int, strides: Sequence[int]) -> int:
    """Input span seen by one output frame of a stack of equal-kernel valid convolutions."""
    field, jump = 1, 1
    for s in strides:
        field += (kernel - 1) * jump
        jump *= s
    return field


def pad_to_frames(x: np.ndarray, kernel: int, strides: Sequence[int]) -> np.ndarray:
    """Right-pad ``x`` (time-major) so the conv stack yields ``ceil(len / hop)`` frames.

    Raises SignalTooShortError when ``x`` is shorter than one receptive field.
    """
    hop = int(np.prod(strides))
    field = receptive_field(kernel, strides)
    n = x.shape[0]
    if n < field:
        raise SignalTooShortError(f"signal of {n} samples is shorter than the receptive field ({field})")
    frames = -(-n // hop)
    target = hop * (frames - 1) + field
    pad = [(0, target - n)] + [(0, 0)] * (x.ndim - 1)
    return np.pad(x, pad)


def init_linear(store: ParamStore, prefix: str, n_in: int, n_out: int, rng: np.random.Generator) -> None:
    bound = 1.0 / np.sqrt(n_in)
    store.add(f"{prefix}.w", rng.uniform(-bound, bound, (n_in, n_out)))
    store.add(f"{prefix}.b", np.zeros(n_out))


def linear(p: Params, prefix: str, x: Tensor) -> Tensor:
    return ag.add(ag.matmul(x, p[f"{prefix}.w"]), p[f"{prefix}.b"])


def init_conv_stack(
    store: ParamStore,
    prefix: str,
    c_in: int,
    channels: Sequence[int],
    kernel: int,
    rng: np.random.Generator,
) -> None:
    for i, c_out in enumerate(channels):
        fan_in = kernel * c_in
        store.add(f"{prefix}.{i}.w", rng.normal(0.0, np.sqrt(2.0 / fan_in), (kernel, c_in, c_out)))
        store.add(f"{prefix}.{i}.b", np.zeros(c_out))
        c_in = c_out


def conv_stack(p: Params, prefix: str, x: Tensor, strides: Sequence[int]) -> Tensor:
    """relu(conv) layers; ``x`` is (T, C_in)."""
    h = x
    for i, s in enumerate(strides):
        h = ag.relu(ag.add(ag.conv1d(h, p[f"{prefix}.{i}.w"], stride=s), p[f"{prefix}.{i}.b"]))
    return h


def init_gru(store: ParamStore, prefix: str, n_in: int, hidden: int, rng: np.random.Generator) -> None:
    bound = 1.0 / np.sqrt(hidden)
    store.add(f"{prefix}.wx", rng.uniform(-bound, bound, (n_in, 3 * hidden)))
    store.add(f"{prefix}.wh", rng.uniform(-bound, bound, (hidden, 3 * hidden)))
    store.add(f"{prefix}.b", np.zeros(3 * hidden))


def gru(p: Params, prefix: str, x: Tensor) -> Tensor:
    """Unidirectional single-layer GRU over (T, n_in); returns hidden states (T, H)."""
    wh = p[f"{prefix}.wh"]
    hidden = wh.shape[0]
    proj = ag.add(ag.matmul(x, p[f"{prefix}.wx"]), p[f"{prefix}.b"])
    h = Tensor(np.zeros(hidden))
    states = []
    for t in range(x.shape[0]):
        xt = proj[t]
        hh = ag.matmul(h, wh)
        z = ag.sigmoid(ag.add(xt[:hidden], hh[:hidden]))
        r = ag.sigmoid(ag.add(xt[hidden:2 * hidden], hh[hidden:2 * hidden]))
        n = ag.tanh(ag.add(xt[2 * hidden:], ag.mul(r, hh[2 * hidden:])))
        h = ag.add(n, ag.mul(z, ag.sub(h, n)))
        states.append(ag.reshape(h, (1, hidden)))
    return ag.concat(states, axis=0)


def init_attention(store: ParamStore, prefix: str, d_model: int, d_att: int, rng: np.random.Generator) -> None:
    for name, shape in (("q", (d_model, d_att)), ("k", (d_model, d_att)), ("v", (d_model, d_att)), ("o", (d_att, d_model))):
        bound = 1.0 / np.sqrt(shape[0])
        store.add(f"{prefix}.{name}", rng.uniform(-bound, bound, shape))


def self_attention(p: Params, prefix: str, x: Tensor) -> Tensor:
    """Single-head block with residual: x + softmax(Q K^T / sqrt(d)) V W_o."""
    q = ag.matmul(x, p[f"{prefix}.q"])
    k = ag.matmul(x, p[f"{prefix}.k"])
    v = ag.matmul(x, p[f"{prefix}.v"])
    d = q.shape[-1]
    weights = ag.softmax(ag.scale(ag.matmul(q, ag.transpose(k)), 1.0 / np.sqrt(d)))
    return ag.add(x, ag.matmul(ag.matmul(weights, v), p[f"{prefix}.o"]))
