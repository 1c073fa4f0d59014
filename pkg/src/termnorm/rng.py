"""Deterministic pseudo-random primitives.

Everything stochastic in this package (splits, shuffles, parameter
initialization, synthetic data, noise) draws from one explicitly
implemented generator so that results are bit-identical across platforms,
Python versions, and independent reimplementations.

Generator: SplitMix64. State advances by the 64-bit golden-ratio constant
and outputs pass through a two-round xor-multiply finalizer:

    GAMMA = 0x9E3779B97F4A7C15
    MIX1  = 0xBF58476D1CE4E5B9   z = (z ^ (z >> 30)) * MIX1
    MIX2  = 0x94D049BB133111EB   z = (z ^ (z >> 27)) * MIX2
                                 output z ^ (z >> 31)

all arithmetic modulo 2**64. The k-th output for seed s (k counted from
1) equals mix(s + k * GAMMA), so bulk generation can be vectorized with
numpy without changing the stream.

Derived values:
  - uniform doubles use the top 53 bits: (u >> 11) * 2**-53
  - bounded integers use rejection sampling (no modulo bias)
  - shuffles are backward Fisher-Yates
  - child seeds come from derive_seed(seed, tag), which mixes the seed
    with the FNV-1a 64-bit hash of the tag string
"""

from __future__ import annotations

import numpy as np

from .hashing import fnv1a_64

_MASK64 = 0xFFFFFFFFFFFFFFFF
GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV_2_53 = 2.0 ** -53


def mix64(z: int) -> int:
    """SplitMix64 output finalizer for a single 64-bit value."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    # uint64 multiplication wraps modulo 2**64, which is exactly what the
    # scalar path computes; keep every operand uint64 so numpy never
    # promotes to float.
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, tag: str) -> int:
    """Stable 64-bit child seed for a named stream."""
    return mix64((seed & _MASK64) ^ fnv1a_64(tag.encode("utf-8")))


class SplitMix64:
    """SplitMix64 stream with scalar and vectorized output paths."""

    def __init__(self, seed: int):
        self._seed = seed & _MASK64
        self._count = 0

    def next_uint64(self) -> int:
        self._count += 1
        return mix64((self._seed + self._count * GAMMA) & _MASK64)

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        """Uniform double in [low, high) from the top 53 bits."""
        u = (self.next_uint64() >> 11) * _INV_2_53
        return low + (high - low) * u

    def uniform_array(self, n: int, low: float = 0.0,
                      high: float = 1.0) -> np.ndarray:
        """n uniforms, bit-identical to n sequential uniform() calls."""
        ks = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        z = np.uint64(self._seed) + ks * np.uint64(GAMMA)
        u = (_mix64_array(z) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        return low + (high - low) * u

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n), rejection-sampled to avoid bias."""
        if n <= 0:
            raise ValueError(f"randrange bound must be positive, got {n}")
        limit = (2 ** 64 // n) * n
        while True:
            u = self.next_uint64()
            if u < limit:
                return u % n

    def choice(self, seq):
        if not seq:
            raise ValueError("cannot choose from an empty sequence")
        return seq[self.randrange(len(seq))]

    def shuffle(self, seq: list) -> None:
        """In-place backward Fisher-Yates shuffle."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.randrange(i + 1)
            seq[i], seq[j] = seq[j], seq[i]

    def spawn(self, tag: str) -> "SplitMix64":
        """Independent child stream named by tag."""
        return SplitMix64(derive_seed(self._seed, tag))
