"""Named random sub-streams derived from one master seed.

Every consumer of randomness asks for ``substream(master, "gumbel", step)`` instead of sharing
a generator, so components can be re-seeded independently and reruns are bit-identical.
"""
from __future__ import annotations

import zlib

import numpy as np

from config.settings import SEED_STREAMS

__all__ = ["substream", "derive_seed"]


def _stream_key(name: str) -> int:
    if name not in SEED_STREAMS:
        raise ValueError(f"unknown seed stream '{name}' (known: {', '.join(SEED_STREAMS)})")
    return zlib.crc32(name.encode("utf-8"))


def substream(master_seed: int, name: str, *keys: int) -> np.random.Generator:
    """Generator for stream ``name`` refined by integer ``keys`` (step, item index, ...)."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(_stream_key(name), *map(int, keys)))
    return np.random.default_rng(seq)


def derive_seed(master_seed: int, name: str, *keys: int) -> int:
    """Plain 32-bit integer seed for APIs that take an ``int`` (disjoint per key tuple)."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(_stream_key(name), *map(int, keys)))
    return int(seq.generate_state(1, dtype=np.uint32)[0])
