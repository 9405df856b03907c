"""Named, seedable random streams.

Every consumer of randomness (init, dropout, window shuffling, synthetic
data) gets its own child stream derived from a root seed and a path string,
so runs replay bit-identically regardless of call order elsewhere.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _path_entropy(path: str) -> int:
    return int.from_bytes(hashlib.sha256(path.encode()).digest()[:8], "little")


class Rng:
    def __init__(self, seed: int, path: str = "root"):
        self.seed = int(seed)
        self.path = path
        ss = np.random.SeedSequence(entropy=[self.seed, _path_entropy(path)])
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, name: str) -> "Rng":
        return Rng(self.seed, f"{self.path}/{name}")

    def normal(self, shape, std=1.0, dtype=np.float32):
        return (self.gen.standard_normal(shape) * std).astype(dtype)

    def uniform(self, shape, low=0.0, high=1.0, dtype=np.float32):
        return self.gen.uniform(low, high, size=shape).astype(dtype)

    def integers(self, low, high, size=None):
        return self.gen.integers(low, high, size=size)

    def permutation(self, n):
        return self.gen.permutation(n)

    def get_state(self):
        return self.gen.bit_generator.state

    def set_state(self, state):
        self.gen.bit_generator.state = state
