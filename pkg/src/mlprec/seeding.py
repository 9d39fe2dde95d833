"""Seed derivation.

All randomness comes from numpy's PCG64 generator, whose output stream is
fixed for a given seed across platforms.  Child seeds for individual users,
trials, or purposes are derived with :class:`numpy.random.SeedSequence`
spawn keys, so a single integer pins an entire run.
"""

from __future__ import annotations

import numpy as np

# purpose tags used as the first spawn-key element
INIT = 1
SHUFFLE = 2
USER = 3
TRIAL = 4
SPLIT = 5
SAMPLE = 6


def derive_seed(seed: int, *keys: int) -> int:
    """Return a 64-bit child seed of ``seed`` for the given key path."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in keys))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    if keys:
        seed = derive_seed(seed, *keys)
    return np.random.Generator(np.random.PCG64(int(seed) & (2**64 - 1)))
