"""Finite abelian groups in invariant-factor form.

Groups are written additively: the product ``g*h`` of the multiplicative
notation corresponds to :meth:`GroupSpec.add` and the power ``g**k`` to
:meth:`GroupSpec.scale`.  Elements are plain tuples of residues, one per
cyclic factor.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, List, Sequence, Tuple

import numpy as np

Element = Tuple[int, ...]
Factorization = List[Tuple[int, int]]

MAX_ORDER = 2**63 - 1


def factorize(m: int) -> Factorization:
    """Factor ``m`` by trial division.

    Returns ``(prime, exponent)`` pairs in increasing prime order; ``1`` gives
    the empty list.  Inputs are capped at ``2**63 - 1``.
    """
    if m < 1:
        raise ValueError(f"factorize needs m >= 1, got {m}")
    if m > MAX_ORDER:
        raise ValueError(f"factorize input {m} exceeds cap 2**63-1")
    out: Factorization = []
    p = 2
    while p * p <= m:
        if m % p == 0:
            e = 0
            while m % p == 0:
                m //= p
                e += 1
            out.append((p, e))
        p += 1 if p == 2 else 2
    if m > 1:
        out.append((m, 1))
    return out


def is_prime(m: int) -> bool:
    return m >= 2 and factorize(m) == [(m, 1)]


def _partitions(e: int, largest: int | None = None) -> Iterator[List[int]]:
    # non-increasing integer partitions of e
    if e == 0:
        yield []
        return
    top = e if largest is None else min(e, largest)
    for first in range(top, 0, -1):
        for rest in _partitions(e - first, first):
            yield [first] + rest


@dataclass(frozen=True)
class GroupSpec:
    """A finite abelian group Z_{d_1} x ... x Z_{d_r} with d_1 | d_2 | ... | d_r."""

    factors: Tuple[int, ...]
    order: int = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        factors = tuple(int(d) for d in self.factors)
        if not factors:
            raise ValueError("a group needs at least one cyclic factor")
        if any(d < 2 for d in factors):
            raise ValueError(f"cyclic factors must be >= 2, got {list(factors)}")
        for a, b in zip(factors, factors[1:]):
            if b % a:
                raise ValueError(f"factors {list(factors)} violate the divisibility chain")
        order = math.prod(factors)
        if order > MAX_ORDER:
            raise ValueError("group order exceeds 2**63-1")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "order", order)

    @classmethod
    def parse(cls, text: str) -> "GroupSpec":
        """Parse ``"37"``, ``"2x4"`` or ``"2,4"``."""
        parts = [p for p in re.split(r"[x,*\s]+", text.strip().strip("[]")) if p]
        if not parts:
            raise ValueError(f"empty group spec {text!r}")
        try:
            return cls(tuple(int(p) for p in parts))
        except ValueError as exc:
            raise ValueError(f"bad group spec {text!r}: {exc}") from None

    def __str__(self) -> str:
        return "x".join(str(d) for d in self.factors)

    def to_json(self) -> dict:
        return {"factors": list(self.factors)}

    @property
    def rank(self) -> int:
        return len(self.factors)

    @property
    def exponent(self) -> int:
        return self.factors[-1]

    @property
    def is_cyclic(self) -> bool:
        return len(self.factors) == 1

    @property
    def identity(self) -> Element:
        return (0,) * len(self.factors)

    # -- element arithmetic -------------------------------------------------

    def element(self, coords: Sequence[int]) -> Element:
        """Reduce ``coords`` into a valid element, checking the dimension."""
        if len(coords) != len(self.factors):
            raise ValueError(
                f"element {tuple(coords)} has {len(coords)} coordinates, group {self} needs {len(self.factors)}"
            )
        return tuple(int(c) % d for c, d in zip(coords, self.factors))

    def add(self, g: Element, h: Element) -> Element:
        if len(g) != len(self.factors) or len(h) != len(self.factors):
            raise ValueError(f"dimension mismatch adding {g} and {h} in {self}")
        return tuple((a + b) % d for a, b, d in zip(g, h, self.factors))

    def scale(self, g: Element, k: int) -> Element:
        return tuple((k * a) % d for a, d in zip(g, self.factors))

    def neg(self, g: Element) -> Element:
        return self.scale(g, -1)

    # -- ranking ------------------------------------------------------------

    @cached_property
    def _weights(self) -> Tuple[int, ...]:
        w = []
        acc = 1
        for d in reversed(self.factors):
            w.append(acc)
            acc *= d
        return tuple(reversed(w))

    def element_rank(self, g: Element) -> int:
        """Mixed-radix rank; lexicographic on coordinates, last coordinate fastest."""
        if len(g) != len(self.factors):
            raise ValueError(f"dimension mismatch: {g} in {self}")
        return sum(int(c) * w for c, w in zip(g, self._weights))

    def element_unrank(self, r: int) -> Element:
        if not 0 <= r < self.order:
            raise ValueError(f"rank {r} out of range [0, {self.order})")
        coords = []
        for w, d in zip(self._weights, self.factors):
            coords.append((r // w) % d)
        return tuple(coords)

    def elements(self) -> Iterator[Element]:
        for r in range(self.order):
            yield self.element_unrank(r)

    @cached_property
    def coord_table(self) -> np.ndarray:
        """``(order, rank)`` array whose row ``r`` holds the coordinates of rank ``r``."""
        r = np.arange(self.order, dtype=np.int64)
        cols = [(r // w) % d for w, d in zip(self._weights, self.factors)]
        return np.stack(cols, axis=1)

    @cached_property
    def weight_vector(self) -> np.ndarray:
        return np.array(self._weights, dtype=np.int64)

    @cached_property
    def modulus_vector(self) -> np.ndarray:
        return np.array(self.factors, dtype=np.int64)

    def ranks_of(self, coords: np.ndarray) -> np.ndarray:
        """Reduce an ``(..., r)`` coordinate array and return element ranks."""
        return (np.mod(coords, self.modulus_vector) * self.weight_vector).sum(axis=-1)

    def scale_ranks(self, k: int) -> np.ndarray:
        """Rank of ``scale(g, k)`` for every rank ``g``."""
        return self.ranks_of(self.coord_table * k)

    def add_table(self) -> np.ndarray:
        """Full ``order x order`` Cayley table on ranks (small groups only)."""
        c = self.coord_table
        return self.ranks_of(c[:, None, :] + c[None, :, :])

    # -- element text -------------------------------------------------------

    def format_element(self, g: Element) -> str:
        if self.is_cyclic:
            return str(g[0])
        return "(" + ",".join(str(c) for c in g) + ")"

    def parse_element(self, text: str) -> Element:
        s = text.strip()
        if s.startswith("(") and s.endswith(")"):
            coords = [int(c) for c in s[1:-1].split(",") if c.strip()]
        else:
            if not self.is_cyclic:
                raise ValueError(f"element {text!r} needs tuple syntax in non-cyclic group {self}")
            coords = [int(s)]
        return self.element(coords)

    def parse_element_list(self, text: str) -> List[Element]:
        """Split ``"1,10,26"`` or ``"(0,1),(1,3)"`` into elements."""
        items = re.findall(r"\([^)]*\)|[^,\s()]+", text)
        return [self.parse_element(item) for item in items]

    def format_element_list(self, elems: Sequence[Element]) -> str:
        return ",".join(self.format_element(g) for g in elems)


def enumerate_abelian_groups(m: int) -> List[GroupSpec]:
    """One invariant-factor representative per isomorphism class of order ``m``.

    Sorted by number of factors, then lexicographically by factor list.
    """
    if m < 1:
        raise ValueError(f"group order must be >= 1, got {m}")
    if m == 1:
        return []
    per_prime = [(p, list(_partitions(e))) for p, e in factorize(m)]
    out: List[GroupSpec] = []

    def combine(idx: int, chosen: List[Tuple[int, List[int]]]) -> None:
        if idx == len(per_prime):
            r = max(len(parts) for _, parts in chosen)
            factors = [1] * r
            for p, parts in chosen:
                # largest part goes to the last invariant factor
                for pos, a in enumerate(parts):
                    factors[r - 1 - pos] *= p**a
            out.append(GroupSpec(tuple(factors)))
            return
        p, parts_list = per_prime[idx]
        for parts in parts_list:
            combine(idx + 1, chosen + [(p, parts)])

    combine(0, [])
    out.sort(key=lambda g: (len(g.factors), g.factors))
    return out


def sylow_rank(G: GroupSpec, p: int) -> int:
    """Rank of the Sylow p-subgroup: the number of invariant factors divisible by p."""
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    return sum(1 for d in G.factors if d % p == 0)


def passes_rank_filter(G: GroupSpec, k1: int, k2: int) -> bool:
    """Necessary Sylow-rank condition for G to carry a tiling with t = 2.

    For every prime p <= k1 the Sylow p-rank is at most 3 when k1+k2 = 3 and at
    most 2 when k1+k2 >= 5.  Other values of k1+k2 are not covered and pass.
    """
    K = k1 + k2
    if K == 3:
        cap = 3
    elif K >= 5:
        cap = 2
    else:
        return True
    return all(sylow_rank(G, p) <= cap for p in range(2, k1 + 1) if is_prime(p))


def rank_filter_reason(G: GroupSpec, k1: int, k2: int) -> str | None:
    """Human-readable reason the rank filter rejects G, or None."""
    if passes_rank_filter(G, k1, k2):
        return None
    cap = 3 if k1 + k2 == 3 else 2
    bad = [p for p in range(2, k1 + 1) if is_prime(p) and sylow_rank(G, p) > cap]
    return f"Sylow {bad[0]}-rank {sylow_rank(G, bad[0])} > {cap}"


def units(modulus: int) -> List[int]:
    return [u for u in range(1, modulus) if math.gcd(u, modulus) == 1] or [1]


def unit_orbit_representatives(G: GroupSpec) -> List[Element]:
    """Minimum-rank member of each orbit of G \\ {e} under g -> u*g, gcd(u, exponent) = 1."""
    us = np.array(units(G.exponent), dtype=np.int64)
    seen = np.zeros(G.order, dtype=bool)
    seen[0] = True
    coords = G.coord_table
    reps: List[Element] = []
    for r in range(1, G.order):
        if seen[r]:
            continue
        reps.append(G.element_unrank(r))
        seen[G.ranks_of(coords[r][None, :] * us[:, None])] = True
    return reps
