"""The limited-magnitude error ball B(n, t, k1, k2).

Integer vectors of length n with entries in [-k2, k1] and at most t nonzero
entries.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Iterator, List, Tuple

import numpy as np

BallPoint = Tuple[int, ...]

DEFAULT_POINT_CAP = 10**8


@dataclass(frozen=True)
class BallParams:
    n: int
    wt: int
    k1: int
    k2: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not 1 <= self.wt <= self.n:
            raise ValueError(f"weight must satisfy 1 <= wt <= n, got wt={self.wt}, n={self.n}")
        if self.k1 < 0 or self.k2 < 0:
            raise ValueError(f"k1 and k2 must be nonnegative, got k1={self.k1}, k2={self.k2}")
        if self.k1 + self.k2 < 1:
            raise ValueError("k1 + k2 must be at least 1")

    @property
    def K(self) -> int:
        return self.k1 + self.k2

    @property
    def magnitudes(self) -> List[int]:
        """The starred interval [-k2, k1]^*: nonzero values a coordinate may take."""
        return starred_interval(-self.k2, self.k1)

    def size(self) -> int:
        return ball_size_general(self.n, self.wt, self.k1, self.k2)

    def to_json(self) -> dict:
        return {"n": self.n, "wt": self.wt, "k1": self.k1, "k2": self.k2}


def starred_interval(a: int, b: int) -> List[int]:
    """Nonzero integers i with a <= i <= b (also meaningful when a = 0)."""
    return [i for i in range(a, b + 1) if i != 0]


def ball_size_general(n: int, wt: int, k1: int, k2: int) -> int:
    """sum_{w <= wt} C(n, w) * (k1 + k2)^w."""
    K = k1 + k2
    return sum(comb(n, w) * K**w for w in range(wt + 1))


def ball_size_t2(n: int, k1: int, k2: int) -> int:
    """1 + nK + C(n, 2) K^2 with K = k1 + k2; the forced group order for t = 2."""
    K = k1 + k2
    if n < 2:
        raise ValueError(f"weight-2 balls need n >= 2, got {n}")
    if K < 1:
        raise ValueError("k1 + k2 must be at least 1")
    return 1 + n * K + n * (n - 1) * K * K // 2


def iter_ball_points(p: BallParams) -> Iterator[BallPoint]:
    """Points ordered by weight, then support subset, then values."""
    vals = p.magnitudes
    for w in range(p.wt + 1):
        for support in itertools.combinations(range(p.n), w):
            for values in itertools.product(vals, repeat=w):
                point = [0] * p.n
                for idx, v in zip(support, values):
                    point[idx] = v
                yield tuple(point)


def ball_points(p: BallParams, cap: int = DEFAULT_POINT_CAP) -> List[BallPoint]:
    size = p.size()
    if size > cap:
        raise OverflowError(f"ball has {size} points, above the cap of {cap}")
    return list(iter_ball_points(p))


def ball_array(p: BallParams, cap: int = DEFAULT_POINT_CAP) -> np.ndarray:
    """The ball as a ``(size, n)`` int64 array in the same order as :func:`ball_points`."""
    size = p.size()
    if size > cap:
        raise OverflowError(f"ball has {size} points, above the cap of {cap}")
    out = np.zeros((size, p.n), dtype=np.int64)
    vals = np.array(p.magnitudes, dtype=np.int64)
    row = 1
    for w in range(1, p.wt + 1):
        block = np.array(list(itertools.product(vals, repeat=w)), dtype=np.int64).reshape(-1, w)
        for support in itertools.combinations(range(p.n), w):
            out[row : row + len(block), list(support)] = block
            row += len(block)
    return out
