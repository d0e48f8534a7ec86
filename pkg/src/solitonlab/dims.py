"""Sphere dimensions and soliton class."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum


class SolitonClass(IntEnum):
    """Dilation rate: shrinking (-1), steady (0), or expanding (+1)."""

    SHRINKER = -1
    STEADY = 0
    EXPANDER = 1

    @property
    def lam(self) -> int:
        return int(self.value)


@dataclass(frozen=True)
class Dimensions:
    """Dimensions (p1, p2) of the two sphere factors.

    Derived quantities:
      n     = p1 + p2, total dimension of the cross-section
      A     = (n - 1) / 2
      Omega = sqrt((n - 1)(9 - n)) / 2, the spiral frequency of the
              difference-variable block; real only for n <= 8, which is
              why the construction requires 4 <= n <= 8.
    """

    p1: int
    p2: int
    n: int = field(init=False)
    A: float = field(init=False)
    Omega: float = field(init=False)

    def __post_init__(self) -> None:
        if self.p1 < 2 or self.p2 < 2:
            raise ValueError(f"sphere dimensions must be >= 2, got ({self.p1}, {self.p2})")
        n = self.p1 + self.p2
        if not 4 <= n <= 8:
            raise ValueError(f"total dimension n={n} outside the oscillatory regime 4..8")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "A", (n - 1) / 2.0)
        object.__setattr__(self, "Omega", math.sqrt((n - 1) * (9 - n)) / 2.0)

    @property
    def p(self) -> tuple[int, int]:
        return (self.p1, self.p2)

    def identity_residual(self) -> float:
        """|A^2 + Omega^2 - 2(n-1)|, zero in exact arithmetic."""
        return abs(self.A**2 + self.Omega**2 - 2.0 * (self.n - 1))
