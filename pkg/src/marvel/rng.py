"""Deterministic named random streams.

Every source of randomness in the library draws from a counter-based
Philox generator keyed by (master seed, stream name, context integers),
so runs are bit-reproducible and streams never interfere:

    data    synthetic dataset generation
    noise   label corruption
    init    model parameter initialisation
    shuffle per-epoch mini-batch order (context: epoch)
    folds   cross-validation splits
    cv      per-(wait, fold) sub-run seeds during wait tuning
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(seed: int, name: str, *context: int) -> np.random.Generator:
    """Return the Philox generator for one named stream.

    The 128-bit Philox key is the master seed in the high word and a
    SHA-256 digest of "name:ctx:ctx:..." in the low word.
    """
    tag = ":".join([name, *map(str, context)]).encode()
    low = int.from_bytes(hashlib.sha256(tag).digest()[:8], "big")
    key = ((int(seed) & _MASK64) << 64) | low
    return np.random.Generator(np.random.Philox(key=key))
