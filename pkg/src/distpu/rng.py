"""Deterministic RNG derivation.

All randomness in the package flows through `derive_rng`, which maps a tuple of
integer keys (seed, epoch index, purpose tag, ...) to an independent PCG64
stream. The mapping is pure: equal keys give bitwise-equal streams.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Purpose tags for derived streams.
TAG_UNLABELED_SHUFFLE = 1
TAG_LABELED_SHUFFLE = 2
TAG_MIXUP = 3


def derive_rng(*keys: int) -> np.random.Generator:
    """Return a Generator that is a pure function of the integer key tuple."""
    return np.random.default_rng([int(k) & _MASK64 for k in keys])


def as_rng(seed: "int | np.random.Generator") -> np.random.Generator:
    """Accept either an integer seed or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return derive_rng(seed)
