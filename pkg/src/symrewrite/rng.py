"""Portable seeded random streams.

Every draw is derived from the raw 64-bit output of a Philox-4x64 counter
generator, so a (seed, label path) pair names the same numbers on every
platform and numpy version. Child streams are keyed by hashing the parent's
key with a label, which keeps sibling streams independent: consuming one
never shifts another.
"""

from __future__ import annotations

import hashlib
from typing import Sequence, TypeVar

import numpy as np

T = TypeVar("T")

_BUFFER = 1024
_TWO64 = 1 << 64
_MASK64 = _TWO64 - 1


def _derive_key(seed: int, path: tuple[str, ...]) -> np.ndarray:
    text = repr(int(seed)) + "".join("/" + p for p in path)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return np.frombuffer(digest[:16], dtype="<u8").astype(np.uint64)


class Stream:
    """A deterministic random stream identified by ``seed`` and a label path."""

    def __init__(self, seed: int, path: tuple[str, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(path)
        self._bitgen = np.random.Philox(key=_derive_key(self.seed, self.path))
        self._buf = np.empty(0, dtype=np.uint64)
        self._pos = 0
        self._labels: set[str] = set()

    def __repr__(self) -> str:
        return f"Stream(seed={self.seed}, path={'/'.join(self.path) or '.'})"

    def split(self, label: str) -> "Stream":
        """Return the child stream named ``label``; each label may be used once."""
        if label in self._labels:
            raise ValueError(f"label {label!r} already split from {self!r}")
        self._labels.add(label)
        return Stream(self.seed, self.path + (label,))

    # raw 64-bit words -----------------------------------------------------

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` raw uint64 words."""
        out = np.empty(n, dtype=np.uint64)
        filled = 0
        while filled < n:
            if self._pos >= len(self._buf):
                self._buf = self._bitgen.random_raw(max(_BUFFER, n - filled))
                self._pos = 0
            take = min(n - filled, len(self._buf) - self._pos)
            out[filled:filled + take] = self._buf[self._pos:self._pos + take]
            self._pos += take
            filled += take
        return out

    def _word(self) -> int:
        if self._pos >= len(self._buf):
            self._buf = self._bitgen.random_raw(_BUFFER)
            self._pos = 0
        w = int(self._buf[self._pos])
        self._pos += 1
        return w

    # scalar draws ----------------------------------------------------------

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)`` (Lemire's unbiased multiply-shift)."""
        if n <= 0:
            raise ValueError("n must be positive")
        m = self._word() * n
        low = m & _MASK64
        if low < n:
            threshold = (_TWO64 - n) % n
            while low < threshold:
                m = self._word() * n
                low = m & _MASK64
        return m >> 64

    def randint(self, low: int, high: int) -> int:
        """Uniform integer in the closed range ``[low, high]``."""
        return low + self.below(high - low + 1)

    def sample(self, population: Sequence[T], k: int) -> list[T]:
        """``k`` distinct elements in random order (partial Fisher-Yates)."""
        pool = list(population)
        if k > len(pool):
            raise ValueError("sample larger than population")
        for i in range(k):
            j = i + self.below(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def shuffle(self, seq: Sequence[T]) -> list[T]:
        """A shuffled copy of ``seq``."""
        return self.sample(seq, len(seq))

    def permutation(self, n: int) -> np.ndarray:
        return np.asarray(self.shuffle(range(n)), dtype=np.int64)

    # array draws -----------------------------------------------------------

    def random(self, shape) -> np.ndarray:
        """Uniform doubles in ``[0, 1)`` with 53 random bits each."""
        shape = (int(shape),) if np.isscalar(shape) else tuple(shape)
        n = int(np.prod(shape, dtype=np.int64))
        words = self.raw(n) >> np.uint64(11)
        return (words.astype(np.float64) * 2.0**-53).reshape(shape)

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return low + (high - low) * self.random(shape)

    def bernoulli_mask(self, p: float, shape) -> np.ndarray:
        """Float mask whose entries are 1.0 with probability ``p``, else 0.0."""
        return (self.random(shape) < p).astype(np.float64)
