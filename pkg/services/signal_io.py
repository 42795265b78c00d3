"""WAV persistence and frame-level energy (signal-io).

Only RIFF/WAVE, PCM 16-bit, mono, 16 kHz is accepted. Reading scales codes by 1/32768;
writing quantizes with round(x * 32768) clamped to the symmetric range [-32767, 32767], so
read -> write reproduces every code the writer can emit and 1.0 / -1.0 land on +/-32767.
"""
from __future__ import annotations

import logging
import math
import os
import wave

import numpy as np

from config.settings import PCM_FULL_SCALE, PCM_READ_SCALE, SAMPLE_RATE
from services.models import AudioBuffer
from utils.errors import (
    EmptySignalError,
    MalformedWavError,
    ProsodyIOError,
    UnsupportedFormatError,
)

logger = logging.getLogger(__name__)

__all__ = ["read_wav", "write_wav", "quantize", "frame_energy", "frame_count"]


def _check_riff_header(path: str) -> None:
    with open(path, "rb") as f:
        head = f.read(12)
    if len(head) < 12 or head[:4] != b"RIFF" or head[8:12] != b"WAVE":
        raise MalformedWavError(f"{path}: not a RIFF/WAVE file")


def read_wav(path: str) -> AudioBuffer:
    """Load a 16-bit PCM mono 16 kHz WAV file into an AudioBuffer."""
    if not os.path.exists(path):
        raise ProsodyIOError(f"File does not exist: {path}")
    _check_riff_header(path)
    try:
        with wave.open(path, "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            frames = w.readframes(w.getnframes())
    except wave.Error as e:
        if "unknown format" in str(e):
            raise UnsupportedFormatError(f"{path}: {e}") from e
        raise MalformedWavError(f"{path}: {e}") from e
    except EOFError as e:
        raise MalformedWavError(f"{path}: truncated chunk") from e

    if channels != 1:
        raise UnsupportedFormatError(f"{path}: {channels} channels (mono only)")
    if width != 2:
        raise UnsupportedFormatError(f"{path}: {8 * width}-bit samples (16-bit PCM only)")
    if rate != SAMPLE_RATE:
        raise UnsupportedFormatError(f"{path}: sample rate {rate} Hz (expected {SAMPLE_RATE})")
    if len(frames) % 2:
        raise MalformedWavError(f"{path}: odd data chunk length")

    codes = np.frombuffer(frames, dtype="<i2").astype(np.float64)
    return AudioBuffer(samples=codes / PCM_READ_SCALE, sample_rate=rate)


def quantize(samples: np.ndarray) -> np.ndarray:
    """Map [-1, 1] floats to symmetric 16-bit codes."""
    codes = np.round(np.asarray(samples, dtype=np.float64) * PCM_READ_SCALE)
    return np.clip(codes, -PCM_FULL_SCALE, PCM_FULL_SCALE).astype("<i2")


def write_wav(path: str, buf: AudioBuffer) -> None:
    """Write ``buf`` as 16-bit PCM mono; out-of-range samples are clamped."""
    codes = quantize(buf.samples)
    try:
        with wave.open(path, "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(buf.sample_rate)
            w.writeframes(codes.tobytes())
    except OSError as e:
        raise ProsodyIOError(f"Could not write {path}: {e}") from e
    logger.debug(f"[signal_io] wrote path={path} samples={len(buf)}")


def frame_count(num_samples: int, hop: int) -> int:
    return int(math.ceil(num_samples / hop))


def frame_energy(buf: AudioBuffer, frame_len: int, hop: int) -> np.ndarray:
    """RMS per frame starting at 0, hop, 2*hop, ...; the tail frame is zero-padded.

    Returns ``ceil(len / hop)`` values, matching the salience extractor's frame count.
    """
    if frame_len < 1 or hop < 1:
        raise ValueError("frame_len and hop must be >= 1")
    n = len(buf)
    if n == 0:
        raise EmptySignalError("cannot compute frame energy of an empty signal")
    count = frame_count(n, hop)
    padded = np.zeros((count - 1) * hop + frame_len, dtype=np.float64)
    take = min(n, padded.shape[0])
    padded[:take] = buf.samples[:take]
    frames = np.lib.stride_tricks.sliding_window_view(padded, frame_len)[::hop][:count]
    return np.sqrt(np.mean(frames * frames, axis=1))
