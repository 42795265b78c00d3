"""Emotion conversion with a trained agent, single utterance or a whole manifest.

Every extracted segment gets its own factors from the policy; all edits are applied in one
pass over the original signal. Modes:
    "greedy"  argmax per head (deterministic)
    "sample"  categorical draw per head
    "random"  uniform grid indices, ignoring the policy (baseline)
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Sequence

import numpy as np

from config.settings import EMOTIONS, NUM_EMOTIONS
from logic.agent_training import require_segments
from services.agent import HEADS, action_factors, edit_for_action, greedy_action, policy_forward, sample_action
from services.corpus import load_audio
from services.editing import apply_edits
from services.metrics import argmax_label
from services.models import AgentConfig, AgentState, AudioBuffer, CorpusEntry, SalienceConfig
from services.salience import predict_scores
from utils.errors import EmptyCorpusError, NoSegmentsError
from utils.optim import ParamStore
from utils.seeding import derive_seed, substream

logger = logging.getLogger(__name__)

ConvertMode = Literal["greedy", "sample", "random"]

__all__ = ["ConvertMode", "ConversionReport", "ConversionEvaluation", "Converter", "convert", "evaluate_conversion"]


@dataclass
class ConversionReport:
    target: int
    before: np.ndarray
    after: np.ndarray
    segments: List[Dict[str, Any]] = field(default_factory=list)
    no_segments: bool = False

    @property
    def reward(self) -> float:
        return float(self.after[self.target] - self.before[self.target])


@dataclass
class ConversionEvaluation:
    rows: List[Dict[str, Any]]
    metrics: Dict[str, float]


class Converter:
    """Applies agent-chosen prosody edits to every salient segment of an utterance."""

    def __init__(
        self,
        agent: ParamStore,
        agent_cfg: AgentConfig,
        salience: ParamStore,
        salience_cfg: SalienceConfig,
        mode: ConvertMode = "greedy",
    ):
        if mode not in ("greedy", "sample", "random"):
            raise ValueError(f"unknown conversion mode '{mode}'")
        self.agent = agent
        self.agent_cfg = agent_cfg
        self.salience = salience
        self.salience_cfg = salience_cfg
        self.mode = mode

    def _random_action(self, rng: np.random.Generator) -> Dict[str, int]:
        grids = self.agent_cfg.grid.heads()
        action = {h: int(rng.integers(len(grids[h]))) for h in HEADS}
        if self.agent_cfg.duration_only:
            action.update({h: self.agent_cfg.grid.identity_index(h) for h in HEADS if h != "duration"})
        return action

    def _choose(self, state: AgentState, rng: np.random.Generator) -> Dict[str, int]:
        if self.mode == "random":
            return self._random_action(rng)
        out = policy_forward(self.agent, state, self.agent_cfg)
        if self.mode == "greedy":
            return greedy_action(out, self.agent_cfg)
        return sample_action(out, rng, self.agent_cfg)

    def process(self, y: AudioBuffer, target: int, seed: int = 0) -> tuple[AudioBuffer, ConversionReport]:
        before, hard = predict_scores(self.salience, y, self.salience_cfg)
        try:
            spans = require_segments(hard, self.salience_cfg, len(y))
        except NoSegmentsError as e:
            logger.warning(f"[convert] {e}, returning input unchanged")
            return y.with_samples(y.samples.copy()), ConversionReport(
                target=target, before=before, after=before.copy(), no_segments=True
            )

        rng = substream(seed, "action")
        edits, rows = [], []
        for span in spans:
            action = self._choose(AgentState(audio=y, span=span, target=target), rng)
            f = action_factors(action, self.agent_cfg)
            edits.append(edit_for_action(span, action, self.agent_cfg))
            rows.append({
                "segment_start": span[0],
                "segment_end": span[1],
                "alpha": f["duration"],
                "beta": f["pitch"],
                "gain": f["gain"],
            })

        modified = apply_edits(y, edits, self.agent_cfg.wsola)
        after, _ = predict_scores(self.salience, modified, self.salience_cfg)
        report = ConversionReport(target=target, before=before, after=after, segments=rows)
        logger.info(
            f"[convert] mode={self.mode} target={EMOTIONS[target]} segments={len(rows)} "
            f"reward={report.reward:.4f} samples_in={len(y)} samples_out={len(modified)}",
            extra={"segments": rows},
        )
        return modified, report


def convert(
    y: AudioBuffer,
    target: int,
    agent: ParamStore,
    agent_cfg: AgentConfig,
    salience: ParamStore,
    salience_cfg: SalienceConfig,
    mode: ConvertMode = "greedy",
    seed: int = 0,
) -> tuple[AudioBuffer, ConversionReport]:
    return Converter(agent, agent_cfg, salience, salience_cfg, mode).process(y, target, seed)


def evaluate_conversion(
    entries: Sequence[CorpusEntry],
    agent: ParamStore,
    agent_cfg: AgentConfig,
    salience: ParamStore,
    salience_cfg: SalienceConfig,
    mode: ConvertMode = "greedy",
    seed: int = 0,
    target: Optional[int] = None,
) -> ConversionEvaluation:
    """Convert every entry and summarize target-score changes per target emotion.

    Without a fixed ``target``, each utterance gets one drawn uniformly among the classes
    other than its ground-truth argmax.
    """
    if not entries:
        raise EmptyCorpusError("no entries to convert")
    converter = Converter(agent, agent_cfg, salience, salience_cfg, mode)
    rows: List[Dict[str, Any]] = []
    hits: List[bool] = []
    no_segments = 0
    for idx, entry in enumerate(entries):
        source = argmax_label(np.asarray(entry.saliency))
        goal = target
        if goal is None:
            choices = [c for c in range(NUM_EMOTIONS) if c != source]
            goal = int(choices[substream(seed, "target", idx).integers(len(choices))])
        _, report = converter.process(load_audio(entry), goal, derive_seed(seed, "action", idx))
        no_segments += int(report.no_segments)
        hits.append(argmax_label(report.after) == goal)
        rows.append({
            "id": entry.id,
            "source": EMOTIONS[source],
            "target": EMOTIONS[goal],
            "before": float(report.before[goal]),
            "after": float(report.after[goal]),
            "delta": report.reward,
        })

    deltas = np.asarray([r["delta"] for r in rows])
    metrics: Dict[str, float] = {
        "n": float(len(rows)),
        "no_segments": float(no_segments),
        "mean_delta": float(deltas.mean()),
        "conversion_accuracy": float(np.mean(hits)),
    }
    for name in EMOTIONS:
        sel = [i for i, r in enumerate(rows) if r["target"] == name]
        if not sel:
            continue
        metrics[f"mean_delta_{name}"] = float(deltas[sel].mean())
        metrics[f"conversion_accuracy_{name}"] = float(np.mean([hits[i] for i in sel]))
        metrics[f"count_{name}"] = float(len(sel))
    logger.info(
        f"[convert] evaluated n={len(rows)} mode={mode} mean_delta={metrics['mean_delta']:.4f} "
        f"accuracy={metrics['conversion_accuracy']:.4f}",
        extra={"metrics": metrics},
    )
    return ConversionEvaluation(rows=rows, metrics=metrics)
