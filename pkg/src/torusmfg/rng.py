"""Deterministic splittable random streams.

All randomness flows from a single integer seed through `stream(seed,
*path)`: each distinct path gets an independent counter-based (Philox)
generator, so execution order and parallel scheduling cannot change
results.
"""

from __future__ import annotations

import zlib

import numpy as np


def _tag_to_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFF
    return zlib.crc32(str(tag).encode("utf8"))


def stream(seed: int, *path) -> np.random.Generator:
    """Independent generator for (seed, path), stable across runs and platforms."""
    key = tuple(_tag_to_int(t) for t in path)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))
