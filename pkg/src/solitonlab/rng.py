"""Counter-based pseudo-random numbers (SplitMix64).

Each draw is a pure function of (seed, counter), so randomized property
harnesses reproduce bit-for-bit from the seed alone, in any language.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class CounterRNG:
    def __init__(self, seed: int):
        self.seed = seed & _MASK
        self.counter = 0

    def u64_at(self, counter: int) -> int:
        return _splitmix64((self.seed + 0x632BE59BD9B4E019 * (counter + 1)) & _MASK)

    def uniform_at(self, counter: int, lo: float = 0.0, hi: float = 1.0) -> float:
        u = (self.u64_at(counter) >> 11) * (1.0 / (1 << 53))
        return lo + (hi - lo) * u

    def next_uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        v = self.uniform_at(self.counter, lo, hi)
        self.counter += 1
        return v

    def next_uniforms(self, k: int, lo: float = 0.0, hi: float = 1.0) -> list[float]:
        return [self.next_uniform(lo, hi) for _ in range(k)]
