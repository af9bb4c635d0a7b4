"""Closed-form nonexistence thresholds for weight-2 tilings, evaluated exactly.

Values of the form q + s*sqrt(p) are kept as :class:`Surd` with rational q, s;
every comparison with an integer is done by squaring, never in floating point.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import floor, isqrt
from typing import Optional, Union

from .groups import factorize, is_prime

Number = Union[int, Fraction]


@dataclass(frozen=True)
class Surd:
    """q + s*sqrt(p) with rational q, s >= 0 and integer p >= 1."""

    q: Fraction
    s: Fraction
    p: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", Fraction(self.q))
        object.__setattr__(self, "s", Fraction(self.s))
        if self.s < 0:
            raise ValueError("surd coefficient must be nonnegative")
        if self.p < 1:
            raise ValueError("radicand must be positive")

    def ge_int(self, x: Number) -> bool:
        """self >= x, decided exactly."""
        d = Fraction(x) - self.q  # need s*sqrt(p) >= d
        if d <= 0:
            return True
        return self.s * self.s * self.p >= d * d

    def floor(self) -> int:
        """floor(q + s*sqrt(p)) by bracketing s*sqrt(p)."""
        # s*sqrt(p) = sqrt(a/b) with a/b = s^2 p
        r = self.s * self.s * self.p
        root = isqrt(r.numerator // r.denominator)
        # root = floor(sqrt(r)) since floor(sqrt(floor(r))) = floor(sqrt(r))
        guess = floor(self.q) + root
        while not self.ge_int(guess):
            guess -= 1
        while self.ge_int(guess + 1):
            guess += 1
        return guess

    def floor_div(self, A: int) -> int:
        """floor((q + s*sqrt(p)) / A) for a positive integer A."""
        if A <= 0:
            raise ValueError("divisor must be positive")
        return Surd(self.q / A, self.s / A, self.p).floor()

    def __float__(self) -> float:
        return float(self.q) + float(self.s) * self.p**0.5

    def __str__(self) -> str:
        if self.s == 0:
            return str(self.q)
        if self.q == 0:
            return f"{self.s}*sqrt({self.p})"
        return f"{self.q} + {self.s}*sqrt({self.p})"

    def to_json(self) -> dict:
        return {"q": str(self.q), "s": str(self.s), "p": self.p, "text": str(self), "decimal": float(self)}


class InapplicableError(ValueError):
    """Raised when parameters fall outside a threshold's hypotheses."""


def smallest_prime_divisor(m: int) -> int:
    if m < 2:
        raise ValueError(f"smallest prime divisor needs m >= 2, got {m}")
    return factorize(m)[0][0]


def _check_theorem_params(k1: int, k2: int) -> None:
    if not k1 > k2 >= 0:
        raise InapplicableError(f"requires k1 > k2 >= 0, got k1={k1}, k2={k2}")
    if k1 + k2 < 3:
        raise InapplicableError(f"requires k1 + k2 >= 3, got {k1 + k2}")
    if is_prime(k1 + k2 + 1):
        raise InapplicableError(f"theorem inapplicable: k1 + k2 + 1 = {k1 + k2 + 1} is prime")


def composite_run_M(k1: int, k2: int) -> int:
    """Largest M <= k1 - k2 with every integer in [K+1, K+M] composite."""
    _check_theorem_params(k1, k2)
    K = k1 + k2
    M = 0
    while M < k1 - k2 and not is_prime(K + M + 1):
        M += 1
    return M


@dataclass(frozen=True)
class BoundsReport:
    k1: int
    k2: int
    K_plus_1: int
    p: int
    M: int
    A: int
    B: Surd
    N_theorem13: int
    N_corollary14: int

    def to_json(self) -> dict:
        return {
            "k1": self.k1,
            "k2": self.k2,
            "K+1": self.K_plus_1,
            "p": self.p,
            "M": self.M,
            "A": self.A,
            "B": self.B.to_json(),
            "N_theorem13": self.N_theorem13,
            "N_corollary14": self.N_corollary14,
        }


def threshold_B(k1: int, k2: int, M: int, p: int) -> Surd:
    """(4M + 8k1 + 3 sqrt p)(k1-k2) + 2k2(k2+1) + 2(k1-k2)^2 (k1-k2+1) + (3+2k2) M (M+1)."""
    d = k1 - k2
    q = (4 * M + 8 * k1) * d + 2 * k2 * (k2 + 1) + 2 * d * d * (d + 1) + (3 + 2 * k2) * M * (M + 1)
    return Surd(q, 3 * d, p)


def theorem_1_3_threshold(k1: int, k2: int, M: Optional[int] = None) -> BoundsReport:
    """No tiling exists for n >= floor(B/A) + 1, A = k1 + (4M-1)k2."""
    _check_theorem_params(k1, k2)
    K = k1 + k2
    Mmax = composite_run_M(k1, k2)
    if M is None:
        M = Mmax
    elif not 1 <= M <= Mmax:
        raise InapplicableError(f"M={M} invalid: need 1 <= M <= {Mmax} so that [K+1, K+M] is all composite")
    p = smallest_prime_divisor(K + 1)
    A = k1 + (4 * M - 1) * k2
    B = threshold_B(k1, k2, M, p)
    return BoundsReport(
        k1=k1,
        k2=k2,
        K_plus_1=K + 1,
        p=p,
        M=M,
        A=A,
        B=B,
        N_theorem13=B.floor_div(A) + 1,
        N_corollary14=corollary_1_4_threshold(k1, k2),
    )


def corollary_1_4_threshold(k1: int, k2: int) -> int:
    """2(k1-k2)^2 + 12(k1-k2) + 2k2 + 8, as displayed (the smallest prime divisor does not enter)."""
    _check_theorem_params(k1, k2)
    d = k1 - k2
    return 2 * d * d + 12 * d + 2 * k2 + 8


def section3_n_bound(C: int) -> int:
    """Largest n with 7n <= 42 + 5C."""
    if C < 1:
        raise ValueError("C must be >= 1")
    return (42 + 5 * C) // 7


def lemma_2_8_C_bound(k1: int, k2: int) -> Surd:
    """Upper bound on C: 4 if K = 3; 3 if K >= 5 and p = 2; 3*sqrt(p) if K >= 5 and p >= 3."""
    K = k1 + k2
    if K < 3 or K == 4 or is_prime(K + 1):
        raise InapplicableError(f"requires K >= 3, K != 4 and K+1 composite, got K={K}")
    if K == 3:
        return Surd(4, 0, 1)
    p = smallest_prime_divisor(K + 1)
    if p == 2:
        return Surd(3, 0, 1)
    return Surd(0, 3, p)
