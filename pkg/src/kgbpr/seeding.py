"""Hierarchical seed derivation.

Every random stream in a run comes from one root seed. A stream is named by a
path of components (predicate label, repeat index, purpose string, ...); each
component is hashed to a 32-bit word with BLAKE2b and used as the spawn key of
a :class:`numpy.random.SeedSequence`. Streams with different paths are
statistically independent, and adding a new consumer never shifts the draws of
an existing one.

Generators are PCG64. Integer and uniform streams are platform independent;
normals come from numpy's ziggurat sampler.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _word(component) -> int:
    if isinstance(component, (int, np.integer)) and not isinstance(component, bool):
        data = b"i" + int(component).to_bytes(16, "little", signed=True)
    else:
        data = b"s" + str(component).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(data, digest_size=4).digest(), "little")


def seed_sequence(seed: int, *path) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed) & _MASK64, spawn_key=tuple(_word(c) for c in path))


def derive_seed(seed: int, *path) -> int:
    """Return a 64-bit child seed for ``path`` under ``seed``."""
    state = seed_sequence(seed, *path).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def rng(seed: int, *path) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *path)))
