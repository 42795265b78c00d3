"""Bernoulli mask posterior under a first-order Markov prior.

Contains the divergence terms of the saliency loss, the brute-force enumeration used to
validate them, binary-concrete (Gumbel) sampling, energy gating, and segment extraction.
Loss terms take and return autograd Tensors; plain arrays are accepted for inspection.
"""
from __future__ import annotations

import logging
from typing import List, Optional, Tuple

import numpy as np

from config.settings import POSTERIOR_CLAMP, SEGMENT_MERGE_GAP, SEGMENT_MIN_FRAMES
from services.models import MarkovPrior
from utils import autograd as ag
from utils.autograd import Tensor
from utils.errors import LengthMismatchError, TooLongError

logger = logging.getLogger(__name__)

BRUTEFORCE_MAX_FRAMES = 16

__all__ = [
    "clamp_posterior",
    "kl_bernoulli",
    "sparsity_loss",
    "prior_kl_chain",
    "prior_kl_bruteforce",
    "log_prior_sequence",
    "gumbel_noise",
    "relaxed_bernoulli",
    "gumbel_softmax_sample",
    "gated_frames",
    "energy_gate",
    "extract_segments",
]


def clamp_posterior(q) -> Tensor:
    return ag.clip(q, POSTERIOR_CLAMP, 1.0 - POSTERIOR_CLAMP)


def kl_bernoulli(q, p) -> Tensor:
    """Elementwise KL(Ber(q) || Ber(p)); ``p`` is a constant (scalar or array)."""
    q = ag.as_tensor(q)
    p = np.asarray(p, dtype=np.float64)
    one_minus_q = ag.sub(1.0, q)
    on = ag.mul(q, ag.sub(ag.log(q), np.log(p)))
    off = ag.mul(one_minus_q, ag.sub(ag.log(one_minus_q), np.log(1.0 - p)))
    return ag.add(on, off)


def sparsity_loss(q, target: float) -> Tensor:
    """Sum over frames of KL(q_t || Ber(target))."""
    return ag.sum(kl_bernoulli(q, target))


def prior_kl_chain(q, prior: MarkovPrior) -> Tensor:
    """KL between a mean-field posterior and the Markov prior, one vectorized pass.

    KL = KL(q_1 || p_init) + sum_t [ q_{t-1} KL(q_t || p) + (1 - q_{t-1}) KL(q_t || 1 - p) ]
    """
    q = ag.as_tensor(q)
    if q.ndim != 1 or q.shape[0] < 1:
        raise LengthMismatchError(f"posterior must be a non-empty vector, got shape {q.shape}")
    total = ag.sum(kl_bernoulli(q[0:1], prior.p_init))
    if q.shape[0] == 1:
        return total
    prev, cur = q[:-1], q[1:]
    stay = kl_bernoulli(cur, prior.p_stay)
    switch = kl_bernoulli(cur, 1.0 - prior.p_stay)
    chain = ag.add(ag.mul(prev, stay), ag.mul(ag.sub(1.0, prev), switch))
    return ag.add(total, ag.sum(chain))


def log_prior_sequence(mask: np.ndarray, prior: MarkovPrior) -> float:
    """log P(m) under the chain: log P(m_1) + sum_t log P(m_t | m_{t-1})."""
    m = np.asarray(mask, dtype=np.int64)
    first = np.log(prior.p_init) if m[0] == 1 else np.log(1.0 - prior.p_init)
    same = m[1:] == m[:-1]
    return float(first + np.where(same, np.log(prior.p_stay), np.log(1.0 - prior.p_stay)).sum())


def prior_kl_bruteforce(q, prior: MarkovPrior) -> float:
    """Exact KL by enumerating all 2^T masks (T <= 16)."""
    qv = np.asarray(q.data if isinstance(q, Tensor) else q, dtype=np.float64)
    t = qv.shape[0]
    if t > BRUTEFORCE_MAX_FRAMES:
        raise TooLongError(f"enumeration over {t} frames exceeds {BRUTEFORCE_MAX_FRAMES}")
    configs = (np.arange(2 ** t)[:, None] >> np.arange(t)[None, :]) & 1
    log_q = np.where(configs == 1, np.log(qv), np.log(1.0 - qv)).sum(axis=1)

    first = np.where(configs[:, 0] == 1, np.log(prior.p_init), np.log(1.0 - prior.p_init))
    same = configs[:, 1:] == configs[:, :-1]
    log_p = first + np.where(same, np.log(prior.p_stay), np.log(1.0 - prior.p_stay)).sum(axis=1)
    return float(np.sum(np.exp(log_q) * (log_q - log_p)))


def gumbel_noise(rng: np.random.Generator, shape) -> np.ndarray:
    """g_1 - g_0 for i.i.d. standard Gumbel pairs (a standard logistic variate)."""
    tiny = np.finfo(np.float64).tiny
    u = rng.uniform(tiny, 1.0, size=(2, *np.atleast_1d(shape)))
    g = -np.log(-np.log(u))
    return g[1] - g[0]


def relaxed_bernoulli(q, temperature: float, noise: np.ndarray) -> Tuple[Tensor, np.ndarray]:
    """Binary-concrete relaxation with explicit noise: (soft Tensor, hard 0/1 array)."""
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    q = ag.as_tensor(q)
    logits = ag.sub(ag.log(q), ag.log(ag.sub(1.0, q)))
    z = ag.scale(ag.add(logits, noise), 1.0 / temperature)
    soft = ag.sigmoid(z)
    hard = (z.data > 0.0).astype(np.float64)
    return soft, hard


def gumbel_softmax_sample(q, temperature: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded sample for inspection: (soft values in (0, 1), hard values in {0, 1})."""
    qv = np.asarray(q, dtype=np.float64)
    noise = gumbel_noise(np.random.default_rng(seed), qv.shape)
    soft, hard = relaxed_bernoulli(qv, temperature, noise)
    return soft.data, hard


def gated_frames(energies: np.ndarray, threshold_db: float) -> np.ndarray:
    """Frames whose RMS is below ``threshold_db`` relative to the loudest frame."""
    e = np.asarray(energies, dtype=np.float64)
    peak = e.max() if e.size else 0.0
    if peak <= 0.0:
        return np.ones(e.shape, dtype=bool)
    with np.errstate(divide="ignore"):
        rel_db = 20.0 * np.log10(e / peak)
    return rel_db < threshold_db


def energy_gate(q, energies: np.ndarray, threshold_db: float) -> Tensor:
    """Force gated frames of the posterior to the clamp floor; others pass through."""
    q = ag.as_tensor(q)
    e = np.asarray(energies)
    if e.shape[0] != q.shape[0]:
        raise LengthMismatchError(f"{e.shape[0]} energies for {q.shape[0]} posterior frames")
    gated = gated_frames(e, threshold_db)
    if not gated.any():
        return q
    keep = (~gated).astype(np.float64)
    return ag.add(ag.mul(q, keep), POSTERIOR_CLAMP * gated.astype(np.float64))


def extract_segments(
    hard_mask: np.ndarray,
    hop: int,
    win: int,
    num_samples: Optional[int] = None,
    min_frames: int = SEGMENT_MIN_FRAMES,
    merge_gap: int = SEGMENT_MERGE_GAP,
) -> List[Tuple[int, int]]:
    """Sample spans of the salient runs in a 0/1 frame mask.

    Runs separated by fewer than ``merge_gap`` zero frames are merged, runs shorter than
    ``min_frames`` dropped. A run covering frames [a, b) maps to samples [a*hop, b*hop + win),
    clipped to ``num_samples`` when given.
    """
    m = np.asarray(hard_mask).astype(np.int64).ravel()
    if m.size == 0:
        return []
    padded = np.concatenate(([0], m, [0]))
    diff = np.diff(padded)
    starts = np.flatnonzero(diff == 1)
    ends = np.flatnonzero(diff == -1)

    runs: List[List[int]] = []
    for a, b in zip(starts, ends):
        if runs and a - runs[-1][1] < merge_gap:
            runs[-1][1] = int(b)
        else:
            runs.append([int(a), int(b)])

    spans = []
    for a, b in runs:
        if b - a < min_frames:
            continue
        start, end = a * hop, b * hop + win
        if num_samples is not None:
            end = min(end, num_samples)
            if end <= start:
                continue
        spans.append((start, end))
    return spans
