"""2-cycle curve parameters, generator sets, and the toy-cycle finder.

A 2-cycle is a pair of prime-order curves where each curve's group order
equals the other's base-field prime, so scalars for one curve coincide with
coordinates of the other.  The production instance is secp256k1/secq256k1;
a mid-size pair (28-bit primes) backs deterministic fuzzing, and a tiny
pair found by exhaustive search backs the exhaustive test oracles.
"""

from __future__ import annotations

import hashlib
from typing import Dict, List, Optional, Tuple

from .groups import Curve, Point, derive_generators, warm_fixed_base

__all__ = [
    "GeneratorSet",
    "CycleParams",
    "secp256k1_cycle",
    "medium_cycle",
    "toy_cycle",
    "find_toy_cycle",
    "count_points_exhaustive",
    "CycleNotFound",
]

DEFAULT_SLOTS = 5


class GeneratorSet:
    """Per-curve generators: base point G, message slots G_1..G_n, and the
    blinding point H.  Extra labelled vectors (tree packing, range-proof
    bases) are derived on demand and cached."""

    __slots__ = ("curve", "base", "gens", "blind", "_extra")

    def __init__(self, curve: Curve, base: Point, gens: List[Point], blind: Point):
        self.curve = curve
        self.base = base
        self.gens = gens
        self.blind = blind
        self._extra: Dict[Tuple[bytes, int], List[Point]] = {}
        for point in [base, blind] + gens:
            warm_fixed_base(point)

    def extended(self, count: int, label: bytes) -> List[Point]:
        key = (label, count)
        vec = self._extra.get(key)
        if vec is None:
            vec = derive_generators(self.curve, count, label)
            for point in vec:
                warm_fixed_base(point)
            self._extra[key] = vec
        return vec

    def slots(self) -> int:
        return len(self.gens)


class CycleParams:
    """A 2-cycle of prime-order curves plus the derived generator sets.

    Invariants checked at construction: #E1 = q (= E2's field prime) and
    #E2 = p (= E1's field prime), both prime.
    """

    __slots__ = ("name", "e1", "e2", "g1", "g2", "_digest")

    def __init__(self, name: str, e1: Curve, e2: Curve, slots: int = DEFAULT_SLOTS,
                 e1_base: Optional[Point] = None):
        if e1.order != e2.p or e2.order != e1.p:
            raise ValueError("curves do not form a 2-cycle")
        self.name = name
        self.e1 = e1
        self.e2 = e2
        self.g1 = self._gen_set(e1, slots, e1_base)
        self.g2 = self._gen_set(e2, slots, None)
        material = b"|".join(
            str(v).encode()
            for v in (name, e1.p, e1.a, e1.b, e1.order, e2.a, e2.b, slots)
        )
        self._digest = hashlib.sha256(b"ats-cycle|" + material).digest()

    @staticmethod
    def _gen_set(curve: Curve, slots: int, base: Optional[Point]) -> GeneratorSet:
        if base is None:
            base = derive_generators(curve, 1, b"base-point")[0]
        gens = derive_generators(curve, slots, b"pedersen")
        blind = derive_generators(curve, 1, b"blinding")[0]
        return GeneratorSet(curve, base, gens, blind)

    def gens_for(self, curve: Curve) -> GeneratorSet:
        if curve == self.e1:
            return self.g1
        if curve == self.e2:
            return self.g2
        raise ValueError("curve does not belong to this cycle")

    def other(self, curve: Curve) -> Curve:
        if curve == self.e1:
            return self.e2
        if curve == self.e2:
            return self.e1
        raise ValueError("curve does not belong to this cycle")

    def digest(self) -> bytes:
        return self._digest

    def __repr__(self) -> str:
        return f"CycleParams({self.name})"


# ---------------------------------------------------------------------------
# Production instance: secp256k1 and its sibling secq256k1 (same b, swapped
# field/order primes).  The secp256k1 base point is the SEC2 standard one;
# the secq256k1 base point is derived by hashing.

_SECP_P = 2**256 - 2**32 - 977
_SECP_N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
_SECP_GX = 0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798
_SECP_GY = 0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8

_secp256k1_cycle: Optional[CycleParams] = None


def secp256k1_cycle(slots: int = DEFAULT_SLOTS) -> CycleParams:
    global _secp256k1_cycle
    if _secp256k1_cycle is not None and _secp256k1_cycle.g1.slots() == slots:
        return _secp256k1_cycle
    e1 = Curve(_SECP_P, 0, 7, _SECP_N, "secp256k1")
    e2 = Curve(_SECP_N, 0, 7, _SECP_P, "secq256k1")
    base = e1.point(_SECP_GX, _SECP_GY)
    cyc = CycleParams("secp256k1/secq256k1", e1, e2, slots, e1_base=base)
    if slots == DEFAULT_SLOTS:
        _secp256k1_cycle = cyc
    return cyc


# Mid-size pair for deterministic fuzzing: small enough for fast math, large
# enough that accidental verification of corrupted proofs (~1/q) never shows
# up in bounded test runs.  Orders cross-checked by order-scan at mint time
# and re-validated by tests via the Hasse-uniqueness argument.
_MED_P = 268435579
_MED_Q = 268432393
_MED_A = 5
_MED_B1 = 28
_MED_B2 = 3355

_medium_cycle: Optional[CycleParams] = None


def medium_cycle() -> CycleParams:
    global _medium_cycle
    if _medium_cycle is None:
        e1 = Curve(_MED_P, _MED_A, _MED_B1, _MED_Q, "med-p28")
        e2 = Curve(_MED_Q, _MED_A, _MED_B2, _MED_P, "med-q28")
        _medium_cycle = CycleParams("medium-28bit", e1, e2)
    return _medium_cycle


# ---------------------------------------------------------------------------
# Toy cycle: exhaustive search over tiny primes, point counts established by
# full enumeration.  Used wherever tests need brute-force oracles.


class CycleNotFound(Exception):
    """No amicable pair exists under the requested bound."""


def _square_counts(p: int) -> List[int]:
    counts = [0] * p
    for y in range(p):
        counts[y * y % p] += 1
    return counts


def count_points_exhaustive(p: int, a: int, b: int,
                            counts: Optional[List[int]] = None) -> int:
    """Group order of y^2 = x^3 + ax + b over F_p by full enumeration."""
    if counts is None:
        counts = _square_counts(p)
    total = 1  # identity
    for x in range(p):
        total += counts[(x * x * x + a * x + b) % p]
    return total


def _primes_up_to(n: int) -> List[int]:
    sieve = bytearray([1]) * (n + 1)
    sieve[0:2] = b"\x00\x00"
    for i in range(2, int(n**0.5) + 1):
        if sieve[i]:
            sieve[i * i :: i] = b"\x00" * ((n - i * i) // i + 1)
    return [i for i in range(2, n + 1) if sieve[i]]


def _curve_with_order(q: int, target: int) -> Optional[Tuple[int, int]]:
    """Scan (a, b) over F_q for a curve with exactly ``target`` points."""
    if abs(q + 1 - target) > 2 * int(q**0.5) + 1:
        return None  # outside the Hasse interval: impossible
    counts = _square_counts(q)
    for a in range(q):
        for b in range(1, q):
            if (4 * a * a * a + 27 * b * b) % q == 0:
                continue
            if count_points_exhaustive(q, a, b, counts) == target:
                return a, b
    return None


def find_toy_cycle(max_prime: int, slots: int = DEFAULT_SLOTS,
                   min_prime: int = 5) -> CycleParams:
    """Brute-force the smallest amicable pair with both primes <= max_prime.

    Walks primes p in ascending order; for each candidate curve over F_p with
    prime order q <= max_prime, searches F_q for a curve with order exactly p.
    Point counts come from exhaustive enumeration only.
    """
    if max_prime < 5:
        raise CycleNotFound(f"no amicable pair with primes <= {max_prime}")
    primes = _primes_up_to(max_prime)
    small = set(primes)
    for p in primes:
        if p < max(5, min_prime):
            continue
        counts = _square_counts(p)
        for a in range(p):
            for b in range(1, p):
                if (4 * a * a * a + 27 * b * b) % p == 0:
                    continue
                q = count_points_exhaustive(p, a, b, counts)
                if q == p or q > max_prime or q < 5 or q not in small:
                    continue
                back = _curve_with_order(q, p)
                if back is None:
                    continue
                a2, b2 = back
                e1 = Curve(p, a, b, q, f"toy-p{p}")
                e2 = Curve(q, a2, b2, p, f"toy-q{q}")
                return CycleParams(f"toy-{p}-{q}", e1, e2, slots)
    raise CycleNotFound(f"no amicable pair with primes <= {max_prime}")


_toy_cycle: Optional[CycleParams] = None


def _distinct_generators(cyc: CycleParams) -> bool:
    for gs in (cyc.g1, cyc.g2):
        pts = [gs.base, gs.blind] + gs.gens
        if any(P.is_identity() for P in pts):
            return False
        if len({(P.x, P.y) for P in pts}) != len(pts):
            return False
    return True


def toy_cycle() -> CycleParams:
    """The default tiny cycle used by exhaustive test oracles (cached).

    Starts the search above 100 so the group is large enough to host seven
    pairwise-distinct derived generators; bumps past pairs where the
    hash-derived generators happen to collide.
    """
    global _toy_cycle
    if _toy_cycle is None:
        lo = 101
        while True:
            cyc = find_toy_cycle(1000, min_prime=lo)
            if _distinct_generators(cyc):
                break
            lo = cyc.e1.p + 1
        _toy_cycle = cyc
    return _toy_cycle
