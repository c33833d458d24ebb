"""Portable pseudo-random generator for bit-reproducible dataset generation.

SplitMix64 (Steele, Lea & Flood's 64-bit mixer, as published in the
xoroshiro/splitmix reference code) is tiny, fully specified, and produces
the same stream on every platform, which keeps synthetic datasets and graph
transforms byte-identical across machines.  Training code uses numpy's
seeded generators instead; only data generation needs cross-platform
stability.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1


def mix64(*parts: int) -> int:
    """Collapse integers into one well-mixed 64-bit seed (order sensitive)."""
    acc = 0x9E3779B97F4A7C15
    for p in parts:
        acc = (acc ^ (p & _MASK)) * 0xBF58476D1CE4E5B9 & _MASK
        acc = (acc ^ (acc >> 27)) * 0x94D049BB133111EB & _MASK
        acc ^= acc >> 31
    return acc


class SplitMix64:
    """Deterministic 64-bit generator with a few convenience draws."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n).  Modulo bias is < 2**-40 for desk-scale n."""
        if n <= 0:
            raise ValueError("below() needs a positive bound")
        return self.next_u64() % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        return lo + self.below(hi - lo + 1)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def choice(self, items):
        return items[self.below(len(items))]

    def spawn(self, *parts: int) -> "SplitMix64":
        """Derive an independent child stream from this seed and extra parts."""
        return SplitMix64(mix64(self._state, *parts))
