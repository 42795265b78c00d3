"""Corpus manifest persistence and deterministic train/validation/test splitting.

Manifest format (UTF-8 CSV, header row):
    id,path,neutral,angry,happy,sad,fearful,cue_start,cue_end
``path`` is relative to the manifest's directory; cue columns are empty for real recordings.
"""
from __future__ import annotations

import csv
import logging
import os
from typing import List, Sequence, Tuple

from pydantic import ValidationError

from config.settings import EMOTIONS
from services.models import AudioBuffer, CorpusEntry
from services.signal_io import read_wav
from utils.errors import EmptyCorpusError, InvalidSpecError, ProsodyIOError
from utils.seeding import substream

logger = logging.getLogger(__name__)

MANIFEST_HEADER: Tuple[str, ...] = ("id", "path", *EMOTIONS, "cue_start", "cue_end")

__all__ = [
    "MANIFEST_HEADER",
    "write_manifest",
    "read_manifest",
    "split_entries",
    "load_audio",
]


def write_manifest(entries: Sequence[CorpusEntry], path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(MANIFEST_HEADER)
            for e in entries:
                cue = ("", "") if e.cue_span is None else (str(e.cue_span[0]), str(e.cue_span[1]))
                writer.writerow([e.id, e.audio_path, *(f"{s:.6f}" for s in e.saliency), *cue])
    except OSError as e:
        raise ProsodyIOError(f"Could not write manifest {path}: {e}") from e


def read_manifest(path: str) -> List[CorpusEntry]:
    """Parse a manifest; ``audio_path`` is resolved against the manifest directory."""
    if not os.path.exists(path):
        raise ProsodyIOError(f"Manifest does not exist: {path}")
    base = os.path.dirname(os.path.abspath(path))
    entries: List[CorpusEntry] = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != MANIFEST_HEADER:
            raise InvalidSpecError(f"{path}: manifest header must be {','.join(MANIFEST_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise InvalidSpecError(f"{path}:{lineno}: expected {len(MANIFEST_HEADER)} columns, got {len(row)}")
            try:
                saliency = tuple(float(x) for x in row[2:7])
                cue = None
                if row[7].strip() and row[8].strip():
                    cue = (int(row[7]), int(row[8]))
                audio = row[1] if os.path.isabs(row[1]) else os.path.join(base, row[1])
                entries.append(CorpusEntry(id=row[0], audio_path=audio, saliency=saliency, cue_span=cue))
            except (ValueError, ValidationError) as e:
                raise InvalidSpecError(f"{path}:{lineno}: {e}") from e
    if not entries:
        raise EmptyCorpusError(f"{path}: manifest has no entries")
    logger.debug(f"[corpus] loaded manifest={path} entries={len(entries)}")
    return entries


def split_entries(
    entries: Sequence[CorpusEntry],
    val_fraction: float,
    test_fraction: float,
    seed: int,
) -> Tuple[List[CorpusEntry], List[CorpusEntry], List[CorpusEntry]]:
    """Disjoint, covering (train, val, test) split from a seeded permutation.

    Validation and test each get at least one entry when the fraction is positive and
    at least three entries exist; train always keeps at least one.
    """
    n = len(entries)
    if n == 0:
        raise EmptyCorpusError("cannot split an empty corpus")
    if val_fraction < 0 or test_fraction < 0 or val_fraction + test_fraction >= 1.0:
        raise InvalidSpecError("split fractions must be >= 0 and sum to < 1")

    def _count(frac: float) -> int:
        if frac == 0.0:
            return 0
        k = int(round(frac * n))
        return max(k, 1) if n >= 3 else k

    n_test = _count(test_fraction)
    n_val = _count(val_fraction)
    while n_test + n_val >= n and (n_test or n_val):
        if n_val >= n_test and n_val:
            n_val -= 1
        else:
            n_test -= 1

    order = substream(seed, "split").permutation(n)
    shuffled = [entries[i] for i in order]
    test = shuffled[:n_test]
    val = shuffled[n_test:n_test + n_val]
    train = shuffled[n_test + n_val:]
    logger.info(f"[corpus] split train={len(train)} val={len(val)} test={len(test)} seed={seed}")
    return train, val, test


def load_audio(entry: CorpusEntry) -> AudioBuffer:
    return read_wav(entry.audio_path)
