"""Central finite-difference checks against the reverse-mode engine."""
from __future__ import annotations

import logging
from typing import Callable, Dict, Iterable, Optional

import numpy as np

from utils.autograd import Tape, Tensor, backward

logger = logging.getLogger(__name__)

__all__ = ["grad_check", "grad_check_params", "relative_error"]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a - n| / max(1e-8, |a| + |n|) over components."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(1e-8, np.abs(a) + np.abs(n))
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def grad_check(f: Callable[[Tensor], Tensor], x, eps: float = 1e-3) -> float:
    """Max relative error between the tape gradient of scalar ``f`` at ``x`` and central differences."""
    x = np.array(x, dtype=np.float64)
    with Tape() as tape:
        leaf = tape.watch(x, "x")
        loss = f(leaf)
    analytic = backward(tape, loss)["x"]

    numeric = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        plus, minus = x.copy(), x.copy()
        plus[i] += eps
        minus[i] -= eps
        numeric[i] = (f(Tensor(plus)).item() - f(Tensor(minus)).item()) / (2.0 * eps)
    return relative_error(analytic, numeric)


def grad_check_params(
    loss_fn: Callable[[Dict[str, Tensor]], Tensor],
    params: Dict[str, np.ndarray],
    names: Iterable[str],
    eps: float = 1e-5,
    max_entries: Optional[int] = None,
    seed: int = 0,
) -> float:
    """Grad check of a multi-parameter loss, restricted to the parameters in ``names``.

    ``loss_fn`` maps name -> Tensor to a scalar. With ``max_entries`` only that many
    components per parameter are probed (chosen by ``seed``).
    """
    base = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    with Tape() as tape:
        leaves = {k: tape.watch(v, k) for k, v in base.items()}
        loss = loss_fn(leaves)
    grads = backward(tape, loss)

    def _eval(k: str, arr: np.ndarray) -> float:
        feed = {n: Tensor(v) for n, v in base.items()}
        feed[k] = Tensor(arr)
        return loss_fn(feed).item()

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in names:
        value = base[name]
        flat_idx = np.arange(value.size)
        if max_entries is not None and value.size > max_entries:
            flat_idx = np.sort(rng.choice(value.size, size=max_entries, replace=False))
        analytic, numeric = [], []
        for fi in flat_idx:
            i = np.unravel_index(fi, value.shape)
            plus, minus = value.copy(), value.copy()
            plus[i] += eps
            minus[i] -= eps
            numeric.append((_eval(name, plus) - _eval(name, minus)) / (2.0 * eps))
            analytic.append(grads[name][i])
        err = relative_error(np.array(analytic), np.array(numeric))
        logger.debug(f"[gradcheck] param={name} probed={len(flat_idx)} rel_err={err:.3e}")
        worst = max(worst, err)
    return worst
