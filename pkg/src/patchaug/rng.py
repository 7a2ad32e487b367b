"""Counter-addressable random streams.

Every stream is identified by ``(seed, path)`` where ``path`` is a tuple of
non-negative integers. Child streams extend the path, so any worker can
reconstruct the exact stream for, say, (seed, epoch, example index) without
touching shared state. Streams with different paths are statistically
independent (Philox keyed through ``numpy.random.SeedSequence`` spawn keys),
and the mapping from ``(seed, path)`` to the byte stream is stable.
"""
from __future__ import annotations

import numpy as np

# Top-level path tags, kept distinct so unrelated consumers of the same seed
# never share a stream.
DOMAIN_SHUFFLE = 0
DOMAIN_AUGMENT = 1
DOMAIN_INIT = 2
DOMAIN_DATA = 3
DOMAIN_MIXUP = 4


class RandomStream:
    """Deterministic random stream addressed by (seed, path).

    Draw methods consume the underlying generator in call order, so the
    sequence of values is fully determined by the address plus the sequence
    of method calls. ``child`` derives an independent stream without
    consuming any draws from its parent.
    """

    __slots__ = ("seed", "path", "_gen")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        self._gen = None

    def child(self, *path: int) -> "RandomStream":
        return RandomStream(self.seed, self.path + path)

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            seq = np.random.SeedSequence(self.seed, spawn_key=self.path)
            self._gen = np.random.Generator(np.random.Philox(seq))
        return self._gen

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        return float(self.generator.uniform(low, high))

    def integers(self, low: int, high: int) -> int:
        """Uniform integer from [low, high)."""
        return int(self.generator.integers(low, high))

    def normal(self, loc: float, scale: float, size=None) -> np.ndarray:
        return self.generator.normal(loc, scale, size)

    def beta(self, a: float, b: float) -> float:
        return float(self.generator.beta(a, b))

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, path={self.path})"
