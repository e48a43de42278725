"""Pedersen commitments: single and vector commits, homomorphic add and
subtract, rerandomization, and the blinded-pair variant.

Commitments are plain curve points; an ``Opening`` bundles the committed
message slots with the blinding scalar.  This module never draws randomness:
callers supply every scalar, which keeps test vectors deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

from .groups import Point, msm

__all__ = [
    "Opening",
    "commit",
    "add",
    "sub",
    "rerandomize",
    "blind_pair",
    "open_check",
]


@dataclass(frozen=True)
class Opening:
    """The witness behind a commitment: message slots and blinding scalar."""

    messages: List[int]
    r: int

    def __post_init__(self):
        if not self.messages:
            raise ValueError("opening must carry at least one message slot")


def commit(messages: Sequence[int], r: int, gens: Sequence[Point], blind: Point) -> Point:
    """C = r*H + sum_i m_i * G_i.

    Slots beyond len(messages) are simply absent (not zero-padded): a caller
    committing k messages uses exactly the first k generators.
    """
    if not 1 <= len(messages) <= len(gens):
        raise ValueError(
            f"message count {len(messages)} outside [1, {len(gens)}]"
        )
    curve = blind.curve
    order = curve.order
    terms = [(r % order, blind)]
    terms += [(m % order, G) for m, G in zip(messages, gens)]
    return msm(terms, curve)


def add(c1: Point, c2: Point) -> Point:
    """Homomorphic addition: commit(a, r) + commit(b, s) = commit(a+b, r+s)."""
    if c1.curve != c2.curve:
        raise ValueError("commitments live on different curves")
    return c1 + c2


def sub(c1: Point, c2: Point) -> Point:
    """Homomorphic subtraction: commit(a, r) - commit(b, s) = commit(a-b, r-s)."""
    if c1.curve != c2.curve:
        raise ValueError("commitments live on different curves")
    return c1 - c2


def rerandomize(c: Point, delta: int, blind: Point) -> Point:
    """C* = C + delta*H: same messages, randomness shifted by delta."""
    if delta % c.curve.order == 0:
        return c
    return c + delta * blind


def blind_pair(c: Point, gamma: int, z: Point):
    """The blinded form (gamma*z, gamma*C); gamma must be a unit."""
    if z.is_identity():
        raise ValueError("blinding base must not be the identity")
    if gamma % c.curve.order == 0:
        raise ValueError("blinding exponent must be nonzero")
    return gamma * z, gamma * c


def open_check(c: Point, opening: Opening, gens: Sequence[Point], blind: Point) -> bool:
    """Does (messages, r) open C under the given generators?"""
    try:
        return commit(opening.messages, opening.r, gens, blind) == c
    except ValueError:
        return False
