"""Markov-masked emotional-saliency predictor.

    waveform --conv stack--> features (T, C)          T = ceil(len / 320)
    features --GRU--linear--sigmoid--> q (T,)         clamped, then energy-gated
    q --binary concrete / threshold--> mask (T,)
    features * mask --conv--relu--maxpool--linear--softmax--> Y_hat (5,)

Mask modes:
    "sample"     straight-through Gumbel sample (training)
    "soft"       relaxed sample, smooth in the parameters (gradient checks)
    "threshold"  q > 0.5, no randomness (rewards, conversion, evaluation)
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Literal, Mapping, Optional, Tuple, Union

import numpy as np

from config.settings import MASK_THRESHOLD, NUM_EMOTIONS
from services.markov_mask import (
    clamp_posterior,
    energy_gate,
    gumbel_noise,
    prior_kl_chain,
    relaxed_bernoulli,
    sparsity_loss,
)
from services.models import AudioBuffer, SalienceConfig
from services.signal_io import frame_energy
from utils import autograd as ag
from utils import layers
from utils.autograd import Tensor
from utils.errors import InvalidSpecError, LengthMismatchError, SignalTooShortError
from utils.optim import ParamStore
from utils.serialization import load_params, save_params
from utils.seeding import substream

logger = logging.getLogger(__name__)

MaskMode = Literal["sample", "soft", "threshold"]

__all__ = [
    "SalienceOutput",
    "init_salience_model",
    "salience_forward",
    "saliency_loss",
    "predict_scores",
    "save_salience",
    "load_salience",
]


@dataclass(frozen=True)
class SalienceOutput:
    posterior: Tensor
    mask: Tensor
    hard_mask: np.ndarray
    y_hat: Tensor
    energies: np.ndarray

    @property
    def scores(self) -> np.ndarray:
        return self.y_hat.data.copy()

    @property
    def num_frames(self) -> int:
        return int(self.posterior.shape[0])


def init_salience_model(cfg: SalienceConfig, seed: int) -> ParamStore:
    rng = substream(seed, "init", 0)
    store = ParamStore()
    layers.init_conv_stack(store, "extractor", 1, cfg.extractor_channels, cfg.extractor_kernel, rng)
    feat = cfg.extractor_channels[-1]
    layers.init_gru(store, "mask.gru", feat, cfg.gru_hidden, rng)
    layers.init_linear(store, "mask.out", cfg.gru_hidden, 1, rng)
    store.add("predictor.conv.w", rng.normal(0.0, np.sqrt(2.0 / (cfg.predictor_kernel * feat)),
                                             (cfg.predictor_kernel, feat, cfg.predictor_channels)))
    store.add("predictor.conv.b", np.zeros(cfg.predictor_channels))
    layers.init_linear(store, "predictor.head", cfg.predictor_channels, NUM_EMOTIONS, rng)
    logger.info(f"[salience] initialized params={store.num_values()} seed={seed}")
    return store


def _as_params(model: Union[ParamStore, Mapping[str, Tensor]]) -> Mapping[str, Tensor]:
    return model.constants() if isinstance(model, ParamStore) else model


def salience_forward(
    model: Union[ParamStore, Mapping[str, Tensor]],
    y: AudioBuffer,
    cfg: SalienceConfig,
    seed: Optional[int] = None,
    *,
    mode: MaskMode = "sample",
    temperature: Optional[float] = None,
    noise: Optional[np.ndarray] = None,
    mask_override: Optional[np.ndarray] = None,
) -> SalienceOutput:
    """Posterior, mask and predicted saliency for one utterance.

    ``seed`` drives the Gumbel noise in "sample"/"soft" modes unless ``noise`` is given.
    ``mask_override`` replaces the mask by a fixed 0/1 vector.
    """
    p = _as_params(model)
    x = layers.pad_to_frames(y.samples[:, None], cfg.extractor_kernel, cfg.extractor_strides)
    features = layers.conv_stack(p, "extractor", Tensor(x), cfg.extractor_strides)
    frames = features.shape[0]
    if frames < cfg.predictor_kernel:
        raise SignalTooShortError(f"{frames} feature frames, predictor needs {cfg.predictor_kernel}")

    energies = frame_energy(y, cfg.hop, cfg.hop)
    if energies.shape[0] != frames:
        raise LengthMismatchError(f"{energies.shape[0]} energy frames vs {frames} feature frames")

    hidden = layers.gru(p, "mask.gru", features)
    logits = ag.reshape(layers.linear(p, "mask.out", hidden), (frames,))
    q = energy_gate(clamp_posterior(ag.sigmoid(logits)), energies, cfg.energy_gate_db)

    if mask_override is not None:
        hard = np.asarray(mask_override, dtype=np.float64)
        if hard.shape != (frames,):
            raise LengthMismatchError(f"mask override of shape {hard.shape} for {frames} frames")
        mask = Tensor(hard)
    elif mode == "threshold":
        hard = (q.data > MASK_THRESHOLD).astype(np.float64)
        mask = Tensor(hard)
    else:
        if noise is None:
            noise = gumbel_noise(np.random.default_rng(seed), frames)
        tau = cfg.temperature_end if temperature is None else temperature
        soft, hard = relaxed_bernoulli(q, tau, noise)
        mask = soft if mode == "soft" else ag.straight_through(hard, soft)

    masked = ag.mul(features, ag.reshape(mask, (frames, 1)))
    pre = ag.add(ag.conv1d(masked, p["predictor.conv.w"], stride=1), p["predictor.conv.b"])
    pooled = ag.maxpool_time(ag.relu(pre))
    y_hat = ag.softmax(layers.linear(p, "predictor.head", pooled))
    return SalienceOutput(posterior=q, mask=mask, hard_mask=hard, y_hat=y_hat, energies=energies)


def saliency_loss(
    target: np.ndarray,
    out: SalienceOutput,
    cfg: SalienceConfig,
) -> Tuple[Tensor, Dict[str, float]]:
    """||Y - Y_hat||_1 + lambda_prior KL(q || prior) + lambda_sparse sum_t KL(q_t || target).

    Both KL terms are summed over frames; ``kl_reduction="mean"`` divides them by the frame count.
    """
    target = np.asarray(target, dtype=np.float64)
    l1 = ag.sum(ag.abs(ag.sub(out.y_hat, target)))
    kl_prior = prior_kl_chain(out.posterior, cfg.prior)
    kl_sparse = sparsity_loss(out.posterior, cfg.sparsity_target)
    norm = 1.0 / out.num_frames if cfg.kl_reduction == "mean" else 1.0
    total = ag.add(
        l1,
        ag.add(ag.scale(kl_prior, cfg.lambda_prior * norm), ag.scale(kl_sparse, cfg.lambda_sparse * norm)),
    )
    parts = {
        "loss": total.item(),
        "l1": l1.item(),
        "kl_prior": kl_prior.item(),
        "kl_sparse": kl_sparse.item(),
        "mask_rate": float(out.hard_mask.mean()),
    }
    return total, parts


def predict_scores(model: ParamStore, y: AudioBuffer, cfg: SalienceConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Deterministic (thresholded-mask) saliency scores and the hard mask."""
    out = salience_forward(model, y, cfg, mode="threshold")
    return out.scores, out.hard_mask


def save_salience(path: str, store: ParamStore, cfg: SalienceConfig, extra: Optional[dict] = None) -> None:
    save_params(path, store, name="salience", meta={"config": cfg.model_dump(), **(extra or {})})


def load_salience(path: str) -> Tuple[ParamStore, SalienceConfig]:
    store, name, meta = load_params(path)
    if name != "salience":
        raise InvalidSpecError(f"{path}: expected a salience model, found '{name}'")
    return store, SalienceConfig.model_validate(meta.get("config", {}))
