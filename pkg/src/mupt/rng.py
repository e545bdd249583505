"""Deterministic random streams.

Every stochastic choice in the package flows through a SeededRng so that a run
is a pure function of its seeds. Streams are PCG64, whose output for a given
seed is identical across platforms, and child streams are derived from stable
hashes of string keys rather than from global state.
"""
from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["SeededRng", "gaussian_tensor"]


def _key_to_int(key: str) -> int:
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class SeededRng:
    """A named, counted wrapper around numpy's PCG64 generator.

    ``position`` counts draw calls (not variates), which makes it cheap to
    assert that two runs consumed their streams in lockstep.
    """

    def __init__(self, seed: int, _entropy: tuple[int, ...] = ()) -> None:
        if not isinstance(seed, (int, np.integer)):
            raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
        if seed < 0:
            raise ValueError(f"seed must be non-negative, got {seed}")
        self.seed = int(seed)
        self._entropy = (int(seed),) + tuple(_entropy)
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self._entropy)))
        self.position = 0

    def spawn(self, key: str) -> "SeededRng":
        """Derive an independent child stream from a string key.

        Spawning is a pure function of (seed, ancestry, key): it does not
        consume from this stream and the same key always yields the same child.
        """
        child = SeededRng.__new__(SeededRng)
        child.seed = self.seed
        child._entropy = self._entropy + (_key_to_int(key),)
        child._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(child._entropy)))
        child.position = 0
        return child

    def normal(self, shape=(), sigma: float = 1.0) -> np.ndarray:
        self.position += 1
        return self._gen.normal(0.0, sigma, size=shape)

    def uniform(self, low: float, high: float, shape=()) -> np.ndarray:
        self.position += 1
        return self._gen.uniform(low, high, size=shape)

    def integers(self, low: int, high: int, shape=()) -> np.ndarray:
        """Integers in [low, high), matching numpy's half-open convention."""
        self.position += 1
        return self._gen.integers(low, high, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        self.position += 1
        return self._gen.permutation(n)

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, depth={len(self._entropy)}, position={self.position})"


def gaussian_tensor(rng: SeededRng, shape, sigma: float) -> np.ndarray:
    """N(0, sigma^2) array of the given shape; sigma == 0 yields exact zeros."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0.0:
        return np.zeros(shape, dtype=np.float64)
    return rng.normal(shape, sigma).astype(np.float64, copy=False)
