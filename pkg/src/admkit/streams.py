"""Named, counter-based random substreams.

Every random quantity in the package is drawn from a generator derived from a
root seed plus a tuple of integer keys, so results do not depend on the order
in which independent pieces of work are executed.
"""
from __future__ import annotations

import zlib

import numpy as np

SeedLike = int | np.random.SeedSequence


def name_key(name: str) -> int:
    """Stable integer key for a stream name."""
    return zlib.crc32(name.encode())


def seed_sequence(seed: SeedLike, *keys: int) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        base_keys = tuple(seed.spawn_key)
        return np.random.SeedSequence(seed.entropy, spawn_key=base_keys + tuple(int(k) for k in keys))
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))


def substream(seed: SeedLike, *keys: int) -> np.random.Generator:
    """Generator for the stream ``(seed, *keys)``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *keys)))
