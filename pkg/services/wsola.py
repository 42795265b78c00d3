"""WSOLA time-scale modification.

Pipeline for a time-stretch map tau:
    gamma_k = k * hop                        (output anchors, 0-based)
    sigma_k = round(tau^-1(gamma_k))         (analysis positions)
    sigma_k' = argmax NCC in [sigma_k - D, sigma_k + D] against the previous frame's tail
    z(n) = sum_k w(n - gamma_k) y(n - gamma_k + sigma_k') / max(sum_k w(n - gamma_k), 1e-8)

Periodic Hann with hop = L/2 is constant-overlap-add, so the denominator is 1 away from the
first half-window. All functions are pure.
"""
from __future__ import annotations

import logging
import math
from typing import Optional, Sequence

import numpy as np

from config.settings import OLA_DENOM_FLOOR, RESAMPLE_RATIO_RANGE
from services.models import AudioBuffer, TimeStretchMap, WsolaParams
from utils.errors import BadLengthError, BadRatioError, OutOfRangeError, SignalTooShortError

logger = logging.getLogger(__name__)

__all__ = [
    "hann_window",
    "cola_denominator",
    "output_anchors",
    "invert_map",
    "wsola_adjust",
    "overlap_add_synthesize",
    "time_stretch",
    "resample_linear",
]


def hann_window(length: int) -> np.ndarray:
    """Periodic Hann: w[n] = 0.5 - 0.5 cos(2 pi n / L), n in [0, L)."""
    if length < 2 or length % 2:
        raise BadLengthError(f"window length must be even and >= 2, got {length}")
    n = np.arange(length)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / length)


def cola_denominator(window: np.ndarray, anchors: Sequence[int], out_len: int) -> np.ndarray:
    """sum_k w(n - gamma_k) for n in [0, out_len)."""
    length = window.shape[0]
    den = np.zeros(out_len + length)
    for g in anchors:
        den[g:g + length] += window
    return den[:out_len]


def output_anchors(out_len: int, hop: int) -> np.ndarray:
    if hop < 1:
        raise BadLengthError("hop must be >= 1")
    count = math.ceil(out_len / hop)
    return np.arange(count, dtype=np.int64) * hop


def invert_map(tmap: TimeStretchMap, anchors: Sequence[int]) -> np.ndarray:
    """sigma_k = tau^-1(gamma_k), rounded half-up to the nearest input sample."""
    xs = np.array([b[0] for b in tmap.breakpoints], dtype=np.float64)
    ys = np.array([b[1] for b in tmap.breakpoints], dtype=np.float64)
    g = np.asarray(anchors, dtype=np.float64)
    if g.size and (g.min() < 0.0 or g.max() > ys[-1]):
        raise OutOfRangeError(f"anchor outside map output range [0, {ys[-1]:g}]")
    return np.floor(np.interp(g, ys, xs) + 0.5).astype(np.int64)


def _frame(y: np.ndarray, start: int, length: int) -> np.ndarray:
    """y[start:start+length] with zeros for reads outside the signal."""
    out = np.zeros(length)
    lo, hi = max(start, 0), min(start + length, y.shape[0])
    if hi > lo:
        out[lo - start:hi - start] = y[lo:hi]
    return out


def wsola_adjust(
    y: AudioBuffer,
    sigma: int,
    natural: Optional[np.ndarray],
    params: WsolaParams,
) -> int:
    """Shift ``sigma`` within the search radius to best continue ``natural``.

    ``natural`` is the overlap-length tail of the previous frame's natural continuation.
    Ties go to the smallest |shift|, then to the earlier position; zero-energy templates
    and an empty search return ``sigma`` unchanged.
    """
    if natural is None or params.search_radius == 0:
        return int(sigma)
    overlap = natural.shape[0]
    tmpl_norm = float(np.sqrt(np.dot(natural, natural)))
    if tmpl_norm <= 0.0:
        return int(sigma)
    samples = y.samples
    lo = max(0, sigma - params.search_radius)
    hi = min(samples.shape[0] - overlap, sigma + params.search_radius)
    if hi < lo:
        return int(sigma)

    windows = np.lib.stride_tricks.sliding_window_view(samples[lo:hi + overlap], overlap)
    dots = windows @ natural
    norms = np.sqrt(np.einsum("ij,ij->i", windows, windows))
    with np.errstate(divide="ignore", invalid="ignore"):
        ncc = np.where(norms > 0.0, dots / (norms * tmpl_norm), 0.0)

    positions = np.arange(lo, hi + 1)
    # primary: highest correlation; then smallest |shift|; then earliest
    order = np.lexsort((positions, np.abs(positions - sigma), -ncc))
    return int(positions[order[0]])


def overlap_add_synthesize(
    y: AudioBuffer,
    sigmas: Sequence[int],
    anchors: Sequence[int],
    window: np.ndarray,
    out_len: Optional[int] = None,
) -> AudioBuffer:
    if len(sigmas) != len(anchors):
        raise BadLengthError(f"{len(sigmas)} analysis positions for {len(anchors)} anchors")
    length = window.shape[0]
    if out_len is None:
        out_len = int(anchors[-1]) + length if len(anchors) else 0
    num = np.zeros(out_len + length)
    den = np.zeros(out_len + length)
    for s, g in zip(sigmas, anchors):
        g = int(g)
        num[g:g + length] += window * _frame(y.samples, int(s), length)
        den[g:g + length] += window
    z = num[:out_len] / np.maximum(den[:out_len], OLA_DENOM_FLOOR)
    return y.with_samples(z)


def time_stretch(y: AudioBuffer, tmap: TimeStretchMap, params: WsolaParams) -> AudioBuffer:
    """Apply ``tmap`` with WSOLA; output length is the map's final output coordinate."""
    n = len(y)
    if n < params.window_len:
        raise SignalTooShortError(f"signal of {n} samples shorter than window {params.window_len}")
    if tmap.input_length != n:
        raise OutOfRangeError(f"map covers {tmap.input_length} input samples, signal has {n}")

    window = hann_window(params.window_len)
    out_len = tmap.output_length
    anchors = output_anchors(out_len, params.hop)
    sigmas = invert_map(tmap, anchors)
    overlap = params.window_len - params.hop

    adjusted = np.empty_like(sigmas)
    for k, sigma in enumerate(sigmas):
        if k == 0:
            adjusted[k] = sigma
            continue
        natural = _frame(y.samples, int(adjusted[k - 1]) + params.hop, overlap)
        adjusted[k] = wsola_adjust(y, int(sigma), natural, params)

    logger.debug(f"[wsola] in={n} out={out_len} frames={len(anchors)} window={params.window_len}")
    return overlap_add_synthesize(y, adjusted, anchors, window, out_len)


def resample_linear(y: AudioBuffer, ratio: float) -> AudioBuffer:
    """Read ``y`` at positions n * ratio; pitch and tempo both scale by ``ratio``."""
    lo, hi = RESAMPLE_RATIO_RANGE
    if not lo <= ratio <= hi:
        raise BadRatioError(f"resample ratio {ratio} outside [{lo}, {hi}]")
    n = len(y)
    out_len = int(round(n / ratio))
    positions = np.arange(out_len) * ratio
    return y.with_samples(np.interp(positions, np.arange(n), y.samples))
