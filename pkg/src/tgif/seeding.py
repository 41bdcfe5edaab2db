"""Deterministic seed derivation.

Every randomized stage derives its RNG from ``mix_seed(global_seed, ...)``
(a splitmix64 chain), so datasets and training runs are reproducible and
independent of worker count or scheduling.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _as_int(part: int | str) -> int:
    if isinstance(part, str):
        return int.from_bytes(hashlib.sha256(part.encode("utf-8")).digest()[:8], "little")
    return int(part) & _MASK64


def mix_seed(*parts: int | str) -> int:
    """Fold integer or string parts into one 64-bit seed (splitmix64)."""
    z = 0x9E3779B97F4A7C15
    for part in parts:
        z = (z + _as_int(part)) & _MASK64
        z ^= z >> 30
        z = (z * 0xBF58476D1CE4E5B9) & _MASK64
        z ^= z >> 27
        z = (z * 0x94D049BB133111EB) & _MASK64
        z ^= z >> 31
    return z


def make_rng(*parts: int | str) -> np.random.Generator:
    """A PCG64 generator keyed by the mixed parts."""
    return np.random.Generator(np.random.PCG64(mix_seed(*parts)))
