"""Named parameter storage with Adam moments."""
from __future__ import annotations

from typing import Dict, Iterator, List, Mapping, Tuple

import numpy as np

from config.settings import ADAM_BETA1, ADAM_BETA2, ADAM_EPS
from utils.autograd import Tape, Tensor
from utils.errors import ShapeMismatchError

__all__ = ["ParamStore", "adam_step"]


class ParamStore:
    """Parameters are kept as float32; Adam moments and the update itself run in float64."""

    def __init__(self) -> None:
        self._params: Dict[str, np.ndarray] = {}
        self._m: Dict[str, np.ndarray] = {}
        self._v: Dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self._params:
            raise ValueError(f"parameter '{name}' already exists")
        arr = np.array(value, dtype=np.float32)
        self._params[name] = arr
        self._m[name] = np.zeros(arr.shape, dtype=np.float64)
        self._v[name] = np.zeros(arr.shape, dtype=np.float64)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> List[str]:
        return list(self._params)

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        return iter(self._params.items())

    def num_values(self) -> int:
        return int(sum(p.size for p in self._params.values()))

    def set(self, name: str, value: np.ndarray) -> None:
        if name not in self._params:
            raise KeyError(name)
        arr = np.asarray(value, dtype=np.float32)
        if arr.shape != self._params[name].shape:
            raise ShapeMismatchError(f"{name}: {arr.shape} vs {self._params[name].shape}")
        self._params[name] = arr.copy()

    def watch(self, tape: Tape) -> Dict[str, Tensor]:
        """Differentiable leaves for every parameter on ``tape``."""
        return {name: tape.watch(p, name) for name, p in self._params.items()}

    def constants(self) -> Dict[str, Tensor]:
        """Non-differentiable views for inference."""
        return {name: Tensor(p) for name, p in self._params.items()}

    def moments(self, name: str) -> Tuple[np.ndarray, np.ndarray]:
        return self._m[name], self._v[name]

    def copy(self) -> "ParamStore":
        other = ParamStore()
        for name, p in self._params.items():
            other.add(name, p)
            other._m[name] = self._m[name].copy()
            other._v[name] = self._v[name].copy()
        other.step_count = self.step_count
        return other


def adam_step(
    store: ParamStore,
    grads: Mapping[str, np.ndarray],
    lr: float,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
    t: int | None = None,
) -> ParamStore:
    """One bias-corrected Adam update, in place. ``t`` defaults to the store's next step."""
    if t is None:
        t = store.step_count + 1
    if t < 1:
        raise ValueError("Adam step index t must be >= 1")
    for name, g in grads.items():
        if name not in store:
            raise KeyError(f"gradient for unknown parameter '{name}'")
        g = np.asarray(g, dtype=np.float64)
        p = store[name]
        if g.shape != p.shape:
            raise ShapeMismatchError(f"{name}: gradient {g.shape} vs parameter {p.shape}")
        m, v = store.moments(name)
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        store._params[name] = (p.astype(np.float64) - lr * m_hat / (np.sqrt(v_hat) + eps)).astype(np.float32)
    store.step_count = t
    return store
