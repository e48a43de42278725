"""Fiat-Shamir transcript: domain-separated absorption and deterministic
challenge extraction.

The state is a running SHA-256 chain.  Every absorbed item is framed with
length prefixes so distinct absorption sequences can never produce the same
byte stream.  Challenges are squeezed to twice the scalar width and reduced
wide, keeping the reduction bias below 2^-256 for 256-bit orders; a zero
result is remapped to 1 so challenges always land in Z_q^*.
"""

from __future__ import annotations

import hashlib

from .groups import Point, point_encode

__all__ = ["Transcript"]


class Transcript:
    __slots__ = ("state",)

    def __init__(self, domain: bytes, params_digest: bytes = b""):
        if not domain:
            raise ValueError("transcript domain label must be non-empty")
        self.state = hashlib.sha256(
            b"ats-transcript-v1|" + _frame(domain) + _frame(params_digest)
        ).digest()

    def absorb(self, label: bytes, data: bytes) -> "Transcript":
        self.state = hashlib.sha256(
            self.state + b"\x01" + _frame(label) + _frame(data)
        ).digest()
        return self

    def absorb_point(self, label: bytes, point: Point) -> "Transcript":
        return self.absorb(label, point_encode(point))

    def absorb_points(self, label: bytes, points) -> "Transcript":
        for i, point in enumerate(points):
            self.absorb(label + b"/%d" % i, point_encode(point))
        return self

    def absorb_scalar(self, label: bytes, value: int, width: int = 32) -> "Transcript":
        return self.absorb(label, (value % (1 << (8 * width))).to_bytes(width, "big"))

    def challenge_scalar(self, label: bytes, order: int) -> int:
        """Deterministic challenge in [1, order)."""
        if order < 2:
            raise ValueError("challenge order must be >= 2")
        self.absorb(b"challenge", label)
        width = 2 * ((order.bit_length() + 7) // 8)
        out = b""
        counter = 0
        while len(out) < width:
            out += hashlib.sha256(
                self.state + b"\x02" + counter.to_bytes(4, "big")
            ).digest()
            counter += 1
        value = int.from_bytes(out[:width], "big") % order
        # ratchet so the next extraction diverges even with no absorption
        self.state = hashlib.sha256(self.state + b"\x03").digest()
        return value if value != 0 else 1

    def clone(self) -> "Transcript":
        t = Transcript.__new__(Transcript)
        t.state = self.state
        return t


def _frame(data: bytes) -> bytes:
    return len(data).to_bytes(8, "big") + data
