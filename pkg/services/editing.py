"""Segmentwise prosody edits on top of the WSOLA engine.

Per segment: stretch by alpha * beta, resample by beta (net duration alpha, pitch x beta),
apply gain with linear ramps, then crossfade the segment edges back into the original so
the splice is continuous. Audio outside the spans is copied untouched.
"""
from __future__ import annotations

import logging
from typing import List, Sequence

import numpy as np

from config.settings import CROSSFADE_SECONDS
from services.models import AudioBuffer, SegmentEdit, TimeStretchMap, WsolaParams
from services.wsola import resample_linear, time_stretch
from utils.errors import OverlappingSpansError, SpanOutOfBoundsError

logger = logging.getLogger(__name__)

__all__ = ["apply_edits", "edit_segment", "validate_edits"]


def validate_edits(edits: Sequence[SegmentEdit], num_samples: int) -> List[SegmentEdit]:
    ordered = sorted(edits, key=lambda e: e.start)
    prev_end = 0
    for e in ordered:
        if e.end > num_samples:
            raise SpanOutOfBoundsError(f"span [{e.start}, {e.end}) beyond signal length {num_samples}")
        if e.start < prev_end:
            raise OverlappingSpansError(f"span [{e.start}, {e.end}) overlaps previous span ending at {prev_end}")
        prev_end = e.end
    return ordered


def _ramp_len(sample_rate: int, n: int) -> int:
    return max(0, min(int(round(CROSSFADE_SECONDS * sample_rate)), n // 2))


def edit_segment(seg: AudioBuffer, edit: SegmentEdit, params: WsolaParams) -> AudioBuffer:
    """Edited version of one segment (length ~ alpha * len(seg))."""
    if edit.is_identity:
        return seg
    out = seg
    stretch = edit.duration_factor * edit.pitch_factor
    if stretch != 1.0:
        out = time_stretch(out, TimeStretchMap.uniform(len(out), stretch), params)
    if edit.pitch_factor != 1.0:
        out = resample_linear(out, edit.pitch_factor)

    samples = out.samples.copy()
    n = samples.shape[0]
    ramp = _ramp_len(seg.sample_rate, n)
    if edit.gain != 1.0:
        envelope = np.full(n, edit.gain)
        if ramp:
            envelope[:ramp] = np.linspace(1.0, edit.gain, ramp)
            envelope[n - ramp:] = np.linspace(edit.gain, 1.0, ramp)
        samples *= envelope

    ramp = min(ramp, _ramp_len(seg.sample_rate, len(seg)))
    if ramp and (stretch != 1.0 or edit.pitch_factor != 1.0):
        fade = np.linspace(0.0, 1.0, ramp)
        orig = seg.samples
        samples[:ramp] = (1.0 - fade) * orig[:ramp] + fade * samples[:ramp]
        samples[n - ramp:] = fade[::-1] * samples[n - ramp:] + (1.0 - fade[::-1]) * orig[len(orig) - ramp:]
    return seg.with_samples(samples)


def apply_edits(y: AudioBuffer, edits: Sequence[SegmentEdit], params: WsolaParams) -> AudioBuffer:
    """Apply disjoint segment edits and splice the results back in order."""
    ordered = validate_edits(edits, len(y))
    if not ordered:
        return y.with_samples(y.samples.copy())

    pieces: List[np.ndarray] = []
    cursor = 0
    for e in ordered:
        pieces.append(y.samples[cursor:e.start])
        seg = y.with_samples(y.samples[e.start:e.end])
        pieces.append(edit_segment(seg, e, params).samples)
        cursor = e.end
    pieces.append(y.samples[cursor:])

    out, clipped = y.with_samples(np.concatenate(pieces)).clipped()
    if clipped:
        logger.debug(f"[editing] clipped_samples={clipped}")
    logger.debug(f"[editing] segments={len(ordered)} in={len(y)} out={len(out)}")
    return out
