"""Binary encoding helpers shared by proof serialization and the wire layer.

Conventions: scalars are fixed-width big-endian (width = the curve's scalar
width), points use the compressed encoding from ``groups``, and vectors are
prefixed with a 2-byte big-endian count.
"""

from __future__ import annotations

from typing import List, Sequence

from .groups import Curve, Point, point_decode, point_encode

__all__ = ["scalar_bytes", "Reader", "write_vec_len", "point_encode", "point_decode"]


def scalar_bytes(value: int, width: int) -> bytes:
    if not 0 <= value < (1 << (8 * width)):
        raise ValueError("scalar out of encodable range")
    return value.to_bytes(width, "big")


def write_vec_len(n: int) -> bytes:
    if not 0 <= n < (1 << 16):
        raise ValueError("vector too long for 2-byte length prefix")
    return n.to_bytes(2, "big")


class Reader:
    """Cursor over a byte buffer with strict bounds and range checks."""

    __slots__ = ("data", "pos")

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ValueError("truncated buffer")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def scalar(self, curve: Curve) -> int:
        raw = self.take(curve.scalar_bytes)
        value = int.from_bytes(raw, "big")
        if value >= curve.order:
            raise ValueError("scalar not reduced modulo the group order")
        return value

    def uint(self, width: int) -> int:
        return int.from_bytes(self.take(width), "big")

    def point(self, curve: Curve) -> Point:
        return point_decode(curve, self.take(curve.field_bytes + 1))

    def vec_len(self) -> int:
        return self.uint(2)

    def scalars(self, curve: Curve, n: int) -> List[int]:
        return [self.scalar(curve) for _ in range(n)]

    def points(self, curve: Curve, n: int) -> List[Point]:
        return [self.point(curve) for _ in range(n)]

    def done(self) -> None:
        if self.pos != len(self.data):
            raise ValueError(f"{len(self.data) - self.pos} trailing bytes")

    def remaining(self) -> int:
        return len(self.data) - self.pos


def ser_scalar(curve: Curve, value: int) -> bytes:
    return scalar_bytes(value % curve.order, curve.scalar_bytes)


def ser_scalars(curve: Curve, values: Sequence[int]) -> bytes:
    return b"".join(ser_scalar(curve, v) for v in values)


def ser_points(points: Sequence[Point]) -> bytes:
    return b"".join(point_encode(p) for p in points)
