"""Fixed, platform-independent pseudo-random number generation.

Scene generation and every golden file depend on this exact sequence, so
the algorithm is pinned: a splitmix64 chain expands the user seed into
the 256-bit state of a xoshiro256** generator. Uniform doubles take the
top 53 bits of each output word, which is exact integer arithmetic and
therefore bit-identical on every platform. Do not change any constant.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64_mix(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; returns (new_state, output word)."""
    state = (state + _GOLDEN) & _MASK64
    return state, _splitmix64_mix(state)


def derive_seed(*parts: int) -> int:
    """Deterministically fold integers into a 64-bit substream seed.

    Used to give every frame/agent/purpose its own independent stream,
    e.g. ``derive_seed(run_seed, frame_index)``.
    """
    acc = _GOLDEN
    for part in parts:
        acc, word = splitmix64(acc ^ (part & _MASK64))
        acc ^= word
    return acc & _MASK64


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** seeded via splitmix64, per the published reference."""

    def __init__(self, seed: int):
        state = seed & _MASK64
        s = []
        for _ in range(4):
            state, word = splitmix64(state)
            s.append(word)
        self._s = s
        self._spare_normal: float | None = None

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def uniform01(self) -> float:
        """Uniform double in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform01()

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n). Bias is below 2**-53 and acceptable here."""
        if n <= 0:
            raise ValueError("n must be positive")
        return int(self.uniform01() * n)

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Box-Muller transform; pairs are generated and cached."""
        if self._spare_normal is not None:
            z = self._spare_normal
            self._spare_normal = None
        else:
            # shift into (0, 1] so log() never sees zero
            u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53
            u2 = self.uniform01()
            r = math.sqrt(-2.0 * math.log(u1))
            z = r * math.cos(2.0 * math.pi * u2)
            self._spare_normal = r * math.sin(2.0 * math.pi * u2)
        return mu + sigma * z
