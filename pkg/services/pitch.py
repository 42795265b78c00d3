"""Autocorrelation F0 estimate, used as a measurement oracle for the DSP contracts."""
from __future__ import annotations

import math

import numpy as np

from config.settings import F0_MAX_HZ, F0_MIN_HZ, VOICING_THRESHOLD
from services.models import AudioBuffer
from utils.errors import SignalTooShortError, UnvoicedError

__all__ = ["normalized_autocorr", "estimate_f0_autocorr"]

# A later peak must reach this fraction of the best one to beat an earlier peak
OCTAVE_PEAK_RATIO = 0.9


def normalized_autocorr(x: np.ndarray, lag_min: int, lag_max: int) -> np.ndarray:
    """r(tau) = <x[:-tau], x[tau:]> / (|x[:-tau]| |x[tau:]|) for tau in [lag_min, lag_max]."""
    n = x.shape[0]
    csum = np.concatenate(([0.0], np.cumsum(x * x)))
    out = np.zeros(lag_max - lag_min + 1)
    for i, tau in enumerate(range(lag_min, lag_max + 1)):
        head = csum[n - tau] - csum[0]
        tail = csum[n] - csum[tau]
        denom = math.sqrt(head * tail)
        if denom > 0.0:
            out[i] = float(np.dot(x[:n - tau], x[tau:])) / denom
    return out


def estimate_f0_autocorr(y: AudioBuffer, fmin: float = F0_MIN_HZ, fmax: float = F0_MAX_HZ) -> float:
    """Fundamental frequency in Hz.

    Picks the shortest-lag local maximum within 0.9 of the global peak (avoids octave
    errors), then refines it by parabolic interpolation.
    """
    sr = y.sample_rate
    if len(y) < 2 * sr / fmin:
        raise SignalTooShortError(f"need at least {2 * sr / fmin:.0f} samples for fmin={fmin} Hz")
    lag_min = max(1, int(math.floor(sr / fmax)))
    lag_max = int(math.ceil(sr / fmin))
    x = y.samples - y.samples.mean()
    # one extra lag on each side for the parabolic fit
    r = normalized_autocorr(x, max(1, lag_min - 1), lag_max + 1)
    offset = max(1, lag_min - 1)
    inner = r[lag_min - offset:lag_max - offset + 1]
    peak = float(inner.max())
    if peak < VOICING_THRESHOLD:
        raise UnvoicedError(f"peak normalized autocorrelation {peak:.3f} < {VOICING_THRESHOLD}")

    best = None
    for tau in range(lag_min, lag_max + 1):
        i = tau - offset
        left = r[i - 1] if i > 0 else -np.inf
        right = r[i + 1] if i + 1 < r.shape[0] else -np.inf
        if r[i] >= left and r[i] >= right and r[i] >= OCTAVE_PEAK_RATIO * peak:
            best = i
            break
    if best is None:
        best = int(np.argmax(inner)) + (lag_min - offset)

    lag = float(best + offset)
    if 0 < best < r.shape[0] - 1:
        a, b, c = r[best - 1], r[best], r[best + 1]
        curvature = a - 2.0 * b + c
        if curvature < 0.0:
            lag += 0.5 * (a - c) / curvature
    return sr / lag
