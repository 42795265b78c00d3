"""Synthetic prosody corpus (desk-scale stand-in for a crowd-annotated emotional corpus).

Each utterance is a neutral harmonic carrier with syllable-rate amplitude pulses. One
contiguous cue span switches to the emotion archetype's f0 contour, syllable rate and gain,
so classes are separable by prosodic statistics only and the planted span is the ground
truth for segment discovery.
"""
from __future__ import annotations

import logging
import os
from typing import Tuple

import numpy as np

from config.settings import (
    CARRIER_AMPLITUDE,
    CROSSFADE_SECONDS,
    EMOTIONS,
    NOISE_FLOOR,
    NUM_EMOTIONS,
    NUM_HARMONICS,
    SYLLABLE_RATE_HZ,
)
from services.corpus import write_manifest
from services.models import Archetype, AudioBuffer, CorpusEntry, SyntheticSpec, one_hot
from services.signal_io import write_wav
from utils.errors import InvalidSpecError, ProsodyIOError
from utils.seeding import derive_seed

logger = logging.getLogger(__name__)

__all__ = ["gen_synthetic_utterance", "gen_corpus", "noisy_saliency"]


def _f0_contour(arch: Archetype, t_local: np.ndarray, speaker: float) -> np.ndarray:
    f0 = arch.f0_base * speaker * (1.0 + arch.f0_slope * t_local)
    if arch.vibrato_hz > 0.0 and arch.vibrato_depth > 0.0:
        f0 = f0 + arch.vibrato_depth * np.sin(2.0 * np.pi * arch.vibrato_hz * t_local)
    return np.maximum(f0, 20.0)


def noisy_saliency(emotion: int, scale: float, rng: np.random.Generator) -> np.ndarray:
    """One-hot label mixed with symmetric uniform noise of the given scale, renormalized."""
    target = one_hot(emotion)
    if scale == 0.0:
        return target
    mixed = target + scale * rng.uniform(0.0, 1.0, NUM_EMOTIONS)
    return mixed / mixed.sum()


def gen_synthetic_utterance(
    spec: SyntheticSpec,
    emotion: int,
    seed: int,
) -> Tuple[AudioBuffer, np.ndarray, Tuple[int, int]]:
    """Render one utterance; returns (audio, saliency Y, cue span in samples).

    Deterministic given ``(spec, emotion, seed)``.
    """
    if not 0 <= emotion < NUM_EMOTIONS:
        raise InvalidSpecError(f"emotion index {emotion} outside [0, {NUM_EMOTIONS})")
    rng = np.random.default_rng(seed)
    sr = spec.sample_rate
    n = int(round(spec.utterance_seconds * sr))
    sil = int(round(spec.silence_seconds * sr))
    cue_len = int(round(spec.cue_fraction * n))
    voiced_start, voiced_end = sil, n - sil
    if voiced_end - voiced_start < cue_len or cue_len < 1:
        raise InvalidSpecError("cue span does not fit inside the voiced region")

    cue_start = int(rng.integers(voiced_start, voiced_end - cue_len + 1))
    cue_end = cue_start + cue_len
    speaker = float(rng.uniform(0.95, 1.05))
    syllable_phase = float(rng.uniform(0.0, 2.0 * np.pi))

    neutral = spec.archetypes["neutral"]
    cue = spec.archetypes[EMOTIONS[emotion]]
    idx = np.arange(n)
    t = idx / float(sr)
    in_cue = (idx >= cue_start) & (idx < cue_end)

    f0 = np.where(in_cue, _f0_contour(cue, t - cue_start / sr, speaker), _f0_contour(neutral, t, speaker))
    rate = SYLLABLE_RATE_HZ * np.where(in_cue, cue.rate_factor, neutral.rate_factor)
    gain = np.where(in_cue, cue.gain_factor, neutral.gain_factor)

    phase = 2.0 * np.pi * np.cumsum(f0) / sr
    weights = 1.0 / np.arange(1, NUM_HARMONICS + 1)
    carrier = sum(w * np.sin(h * phase) for h, w in enumerate(weights, start=1)) / weights.sum()

    env_phase = 2.0 * np.pi * np.cumsum(rate) / sr + syllable_phase
    envelope = 0.35 + 0.65 * (0.5 - 0.5 * np.cos(env_phase))

    voicing = np.zeros(n)
    voicing[voiced_start:voiced_end] = 1.0
    ramp = min(int(CROSSFADE_SECONDS * sr), (voiced_end - voiced_start) // 2)
    if ramp > 0:
        voicing[voiced_start:voiced_start + ramp] = np.linspace(0.0, 1.0, ramp, endpoint=False)
        voicing[voiced_end - ramp:voiced_end] = np.linspace(1.0, 0.0, ramp, endpoint=False)

    samples = CARRIER_AMPLITUDE * gain * envelope * voicing * carrier
    samples = samples + rng.normal(0.0, NOISE_FLOOR, n)
    saliency = noisy_saliency(emotion, spec.label_noise_scale, rng)

    buf, clipped = AudioBuffer(samples=samples, sample_rate=sr).clipped()
    if clipped:
        logger.warning(f"[synthetic] emotion={EMOTIONS[emotion]} seed={seed} clipped_samples={clipped}")
    return buf, saliency, (cue_start, cue_end)


def gen_corpus(spec: SyntheticSpec, n_per_class: int, out_dir: str, seed: int) -> str:
    """Write ``5 * n_per_class`` WAV files plus ``manifest.csv``; returns the manifest path."""
    if n_per_class < 1:
        raise InvalidSpecError("n_per_class must be >= 1")
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise ProsodyIOError(f"Cannot create corpus directory {out_dir}: {e}") from e

    entries: list[CorpusEntry] = []
    for emotion, name in enumerate(EMOTIONS):
        for i in range(n_per_class):
            item_seed = derive_seed(seed, "corpus", emotion, i)
            buf, saliency, (cue_start, cue_end) = gen_synthetic_utterance(spec, emotion, item_seed)
            uid = f"{name}_{i:04d}"
            filename = f"{uid}.wav"
            write_wav(os.path.join(out_dir, filename), buf)
            entries.append(
                CorpusEntry(
                    id=uid,
                    audio_path=filename,
                    saliency=tuple(_round_simplex(saliency)),
                    cue_span=(cue_start, cue_end),
                )
            )

    manifest = os.path.join(out_dir, "manifest.csv")
    write_manifest(entries, manifest)
    logger.info(
        f"[synthetic] corpus written entries={len(entries)} dir={out_dir}",
        extra={"entries": len(entries), "out_dir": out_dir, "seed": seed},
    )
    return manifest


def _round_simplex(v: np.ndarray, decimals: int = 6) -> list[float]:
    """Round to ``decimals`` places and push the residual into the largest component."""
    rounded = np.round(v, decimals)
    top = int(np.argmax(rounded))
    rounded[top] = round(rounded[top] + (1.0 - rounded.sum()), decimals)
    return [float(x) for x in rounded]
