"""Salience predictor training and evaluation pipeline.

Rules:
    * Batch size 1, one Adam step per utterance, entries reshuffled every epoch from the
      "shuffle" stream; Gumbel noise for step k comes from the "gumbel" stream keyed by k.
    * Temperature anneals linearly from ``temperature_start`` to ``temperature_end`` over all steps.
    * Validation L1 is computed with the thresholded (deterministic) mask after every epoch.
    * Evaluation samples masks at a fixed eval seed so reruns give identical metrics; segment
      overlap with planted cues uses the thresholded mask.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from config.settings import EVAL_SEED, MASK_THRESHOLD
from services.corpus import load_audio
from services.markov_mask import extract_segments
from services.metrics import classification_metrics, segments_iou
from services.models import CorpusEntry, SalienceConfig
from services.salience import init_salience_model, salience_forward, saliency_loss, save_salience
from utils.autograd import Tape, backward
from utils.errors import EmptyCorpusError
from utils.file_utils import ensure_dir
from utils.optim import ParamStore, adam_step
from utils.seeding import derive_seed, substream

logger = logging.getLogger(__name__)

__all__ = ["SalienceTraining", "SalienceEvaluation", "TrainResult", "EvalResult", "train_salience", "eval_salience"]


@dataclass
class TrainResult:
    store: ParamStore
    log: List[Dict[str, float]] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return float(self.log[-1]["loss"]) if self.log else float("nan")


@dataclass
class EvalResult:
    metrics: Dict[str, float]
    confusion: np.ndarray
    predictions: List[np.ndarray]
    ious: List[float]


class SalienceTraining:
    """Weakly supervised training of the Markov-masked saliency predictor."""

    # ---------------- Configuration ----------------
    CHECKPOINT_NAME = "checkpoint.prsm"
    LOSS_KEYS = ("loss", "l1", "kl_prior", "kl_sparse", "mask_rate")

    def __init__(self, cfg: SalienceConfig, seed: int):
        self.cfg = cfg
        self.seed = int(seed)

    # ---------------- Steps ----------------
    def _train_step(self, store: ParamStore, entry: CorpusEntry, step: int, temperature: float) -> Dict[str, float]:
        y = load_audio(entry)
        with Tape() as tape:
            params = store.watch(tape)
            out = salience_forward(
                params, y, self.cfg,
                seed=derive_seed(self.seed, "gumbel", step),
                mode="sample",
                temperature=temperature,
            )
            loss, parts = saliency_loss(np.asarray(entry.saliency), out, self.cfg)
        grads = backward(tape, loss)
        adam_step(store, grads, self.cfg.lr)
        return parts

    def validation_l1(self, store: ParamStore, entries: Sequence[CorpusEntry]) -> float:
        if not entries:
            return float("nan")
        errors = []
        for entry in entries:
            out = salience_forward(store, load_audio(entry), self.cfg, mode="threshold")
            errors.append(float(np.abs(out.scores - np.asarray(entry.saliency)).sum()))
        return float(np.mean(errors))

    # ---------------- Pipeline ----------------
    def run(
        self,
        train: Sequence[CorpusEntry],
        val: Sequence[CorpusEntry] = (),
        checkpoint_dir: Optional[str] = None,
        store: Optional[ParamStore] = None,
    ) -> TrainResult:
        if not train:
            raise EmptyCorpusError("no training entries")
        store = store if store is not None else init_salience_model(self.cfg, self.seed)
        total_steps = self.cfg.epochs * len(train)
        result = TrainResult(store=store)
        step = 0

        for epoch in range(self.cfg.epochs):
            order = substream(self.seed, "shuffle", epoch).permutation(len(train))
            sums = dict.fromkeys(self.LOSS_KEYS, 0.0)
            temperature = self.cfg.temperature_at(step, total_steps)
            for i in order:
                temperature = self.cfg.temperature_at(step, total_steps)
                parts = self._train_step(store, train[int(i)], step, temperature)
                for k in self.LOSS_KEYS:
                    sums[k] += parts[k]
                step += 1
                logger.debug(f"[salience] step={step} loss={parts['loss']:.4f} mask_rate={parts['mask_rate']:.3f}")

            row: Dict[str, float] = {"epoch": epoch, "steps": step}
            row.update({k: sums[k] / len(train) for k in self.LOSS_KEYS})
            row["temperature"] = temperature
            row["val_l1"] = self.validation_l1(store, val)
            result.log.append(row)
            logger.info(
                f"[salience] epoch={epoch} loss={row['loss']:.4f} l1={row['l1']:.4f} "
                f"kl_prior={row['kl_prior']:.4f} val_l1={row['val_l1']:.4f}",
                extra={"epoch": epoch, "metrics": row},
            )
            if checkpoint_dir:
                ensure_dir(checkpoint_dir)
                save_salience(os.path.join(checkpoint_dir, self.CHECKPOINT_NAME), store, self.cfg, {"epoch": epoch})
        return result


class SalienceEvaluation:
    """Classification metrics, confusion matrix and cue overlap for a trained predictor."""

    def __init__(self, cfg: SalienceConfig, eval_seed: int = EVAL_SEED):
        self.cfg = cfg
        self.eval_seed = int(eval_seed)

    def run(self, store: ParamStore, entries: Sequence[CorpusEntry]) -> EvalResult:
        if not entries:
            raise EmptyCorpusError("no evaluation entries")
        targets, predictions, ious = [], [], []
        for idx, entry in enumerate(entries):
            y = load_audio(entry)
            out = salience_forward(
                store, y, self.cfg,
                seed=derive_seed(self.eval_seed, "eval", idx),
                mode="sample",
                temperature=self.cfg.temperature_end,
            )
            targets.append(np.asarray(entry.saliency))
            predictions.append(out.scores)
            if entry.cue_span is not None:
                hard = (out.posterior.data > MASK_THRESHOLD).astype(np.int64)
                segments = extract_segments(hard, self.cfg.hop, 0, len(y))
                ious.append(segments_iou(segments, entry.cue_span))

        metrics, cm = classification_metrics(targets, predictions)
        if ious:
            metrics["median_iou"] = float(np.median(ious))
        logger.info(
            f"[salience] eval n={len(entries)} top1={metrics['top1_accuracy']:.4f} "
            f"top2={metrics['top2_accuracy']:.4f} macro_f1={metrics['macro_f1']:.4f}",
            extra={"metrics": metrics},
        )
        return EvalResult(metrics=metrics, confusion=cm, predictions=predictions, ious=ious)


def train_salience(
    entries: Sequence[CorpusEntry],
    cfg: SalienceConfig,
    seed: int,
    val: Sequence[CorpusEntry] = (),
    checkpoint_dir: Optional[str] = None,
) -> TrainResult:
    return SalienceTraining(cfg, seed).run(entries, val, checkpoint_dir)


def eval_salience(
    store: ParamStore,
    entries: Sequence[CorpusEntry],
    cfg: SalienceConfig,
    eval_seed: int = EVAL_SEED,
) -> EvalResult:
    return SalienceEvaluation(cfg, eval_seed).run(store, entries)
