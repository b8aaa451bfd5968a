"""Seeding helpers.

Every random stream in the package comes from ``numpy.random.PCG64`` seeded
through ``numpy.random.SeedSequence``. Independent streams for parallel
trials are derived from ``(master_seed, *keys)`` via SeedSequence spawn keys,
so no coordination between workers is needed.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed) -> np.random.Generator:
    """Return a PCG64 generator for ``seed`` (an int, SeedSequence or Generator)."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def derive_seed(master_seed: int, *keys: int) -> int:
    """Deterministic 63-bit child seed for ``(master_seed, keys...)``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
