"""Actor-critic agent training against a frozen salience predictor.

Rules:
    * Each step is one episode: draw an utterance, a target emotion different from its
      ground-truth argmax, and one salient segment uniformly; sample factors; edit; score; update.
    * Segments come from the thresholded mask, so the reward instrument is deterministic.
    * Utterances without any salient segment are skipped and counted.
    * Random draws use named streams keyed by the step number: "shuffle" picks the utterance,
      "target" the emotion, "action" the segment and the factor indices.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import EMOTIONS, NUM_EMOTIONS
from services.agent import (
    actor_critic_update,
    apply_action,
    compute_reward,
    init_agent,
    policy_forward,
    sample_action,
)
from services.corpus import load_audio
from services.markov_mask import extract_segments
from services.metrics import argmax_label, moving_average
from services.models import AgentConfig, AgentState, AudioBuffer, CorpusEntry, SalienceConfig
from services.salience import predict_scores
from utils.errors import EmptyCorpusError, NoSegmentsError
from utils.optim import ParamStore
from utils.seeding import substream

logger = logging.getLogger(__name__)

__all__ = ["AgentTraining", "AgentTrainResult", "require_segments", "salient_segments", "train_agent"]


@dataclass
class AgentTrainResult:
    store: ParamStore
    log: List[Dict[str, float]] = field(default_factory=list)
    skipped: int = 0

    @property
    def rewards(self) -> np.ndarray:
        return np.asarray([row["reward"] for row in self.log], dtype=np.float64)

    def reward_curve(self, window: int) -> np.ndarray:
        """Trailing moving-average reward, one value per logged update."""
        return moving_average(self.rewards, window)


@dataclass(frozen=True)
class _Utterance:
    scores: np.ndarray
    segments: Tuple[Tuple[int, int], ...]


def salient_segments(hard_mask: np.ndarray, cfg: SalienceConfig, num_samples: int) -> List[Tuple[int, int]]:
    """Sample spans of the salient frame runs (frame t covers [t*hop, (t+1)*hop))."""
    return extract_segments(hard_mask, cfg.hop, 0, num_samples)


def require_segments(hard_mask: np.ndarray, cfg: SalienceConfig, num_samples: int) -> List[Tuple[int, int]]:
    spans = salient_segments(hard_mask, cfg, num_samples)
    if not spans:
        raise NoSegmentsError(f"no salient segments in {num_samples} samples")
    return spans


class AgentTraining:
    """Single-step on-policy actor-critic loop with a moving-average reward curve."""

    def __init__(
        self,
        cfg: AgentConfig,
        salience: ParamStore,
        salience_cfg: SalienceConfig,
        seed: int,
    ):
        self.cfg = cfg
        self.salience = salience
        self.salience_cfg = salience_cfg
        self.seed = int(seed)
        # The predictor is frozen, so per-utterance scores and segments are computed once;
        # audio is reloaded per step so memory stays flat in corpus size
        self._cache: Dict[int, _Utterance] = {}

    def _utterance(self, idx: int, y: AudioBuffer) -> _Utterance:
        if idx not in self._cache:
            scores, hard = predict_scores(self.salience, y, self.salience_cfg)
            try:
                segments = tuple(require_segments(hard, self.salience_cfg, len(y)))
            except NoSegmentsError:
                segments = ()
            self._cache[idx] = _Utterance(scores=scores, segments=segments)
        return self._cache[idx]

    def _draw_target(self, source: int, step: int) -> int:
        choices = [c for c in range(NUM_EMOTIONS) if c != source]
        return int(choices[substream(self.seed, "target", step).integers(len(choices))])

    def run(self, entries: Sequence[CorpusEntry], store: Optional[ParamStore] = None) -> AgentTrainResult:
        if not entries:
            raise EmptyCorpusError("no training entries")
        store = store if store is not None else init_agent(self.cfg, self.seed)
        result = AgentTrainResult(store=store)
        rewards: List[float] = []

        for step in range(self.cfg.steps):
            idx = int(substream(self.seed, "shuffle", 1, step).integers(len(entries)))
            entry = entries[idx]
            y = load_audio(entry)
            utt = self._utterance(idx, y)
            if not utt.segments:
                result.skipped += 1
                logger.debug(f"[agent] step={step} id={entry.id} skipped=no_segments")
                continue

            source = argmax_label(np.asarray(entry.saliency))
            target = self._draw_target(source, step)
            rng = substream(self.seed, "action", step)
            span = utt.segments[int(rng.integers(len(utt.segments)))]
            state = AgentState(audio=y, span=span, target=target)

            action = sample_action(policy_forward(store, state, self.cfg), rng, self.cfg)
            modified = apply_action(state, action, self.cfg)
            reward = compute_reward(
                self.salience, self.salience_cfg, y, modified, target,
                before=float(utt.scores[target]),
            )
            stats = actor_critic_update(store, state, action, reward, self.cfg)

            rewards.append(reward)
            reward_ma = float(moving_average(rewards[-self.cfg.reward_window:], self.cfg.reward_window)[-1])
            row = {
                "step": step,
                "id": entry.id,
                "target": EMOTIONS[target],
                "span_start": span[0],
                "span_end": span[1],
                "duration_index": action["duration"],
                "pitch_index": action["pitch"],
                "gain_index": action["gain"],
                "reward": reward,
                "actor_loss": stats.actor_loss,
                "critic_loss": stats.critic_loss,
                "value": stats.value,
                "reward_ma": reward_ma,
            }
            result.log.append(row)
            logger.debug(f"[agent] step={step} id={entry.id} target={EMOTIONS[target]} reward={reward:.4f}")
            if (step + 1) % self.cfg.log_every == 0:
                logger.info(
                    f"[agent] step={step + 1} reward_ma={row['reward_ma']:.4f} "
                    f"critic_loss={stats.critic_loss:.4f} skipped={result.skipped}",
                    extra={"step": step + 1, "reward_ma": row["reward_ma"]},
                )

        logger.info(f"[agent] finished steps={self.cfg.steps} updates={len(result.log)} skipped={result.skipped}")
        return result


def train_agent(
    entries: Sequence[CorpusEntry],
    salience: ParamStore,
    salience_cfg: SalienceConfig,
    cfg: AgentConfig,
    seed: int,
) -> AgentTrainResult:
    return AgentTraining(cfg, salience, salience_cfg, seed).run(entries)
