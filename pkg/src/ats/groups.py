"""Short-Weierstrass elliptic curve arithmetic for prime-order curves.

All scalars and field elements are plain Python ints reduced modulo the
relevant modulus.  Points are immutable affine values tagged with their
curve; the identity is represented with x = y = None.  Hot paths (scalar
multiplication, multi-scalar sums) run in Jacobian coordinates internally
and normalise once at the end.
"""

from __future__ import annotations

import hashlib
from typing import Iterable, List, Optional, Tuple

__all__ = [
    "Curve",
    "Point",
    "scalar_mul",
    "msm",
    "derive_generators",
    "point_from_hash",
    "point_encode",
    "point_decode",
    "sqrt_mod",
    "is_prime",
]


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin for n < 3.3e24 (covers all our moduli sizes
    probabilistically far beyond any practical failure)."""
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
    for p in small:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in small:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def sqrt_mod(a: int, p: int) -> Optional[int]:
    """Square root of a mod p (p an odd prime), or None if a is a non-residue."""
    a %= p
    if a == 0:
        return 0
    if pow(a, (p - 1) // 2, p) != 1:
        return None
    if p % 4 == 3:
        return pow(a, (p + 1) // 4, p)
    # Tonelli-Shanks for p = 1 (mod 4)
    q, s = p - 1, 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while pow(z, (p - 1) // 2, p) != p - 1:
        z += 1
    m, c, t, r = s, pow(z, q, p), pow(a, q, p), pow(a, (q + 1) // 2, p)
    while t != 1:
        i, t2 = 0, t
        while t2 != 1:
            t2 = t2 * t2 % p
            i += 1
        b = pow(c, 1 << (m - i - 1), p)
        m, c, t, r = i, b * b % p, t * b * b % p, r * b % p
    return r


class Curve:
    """y^2 = x^3 + a*x + b over F_p with prime group order.

    ``order`` is the number of points including the identity; we only work
    with prime-order (cofactor 1) curves, so every non-identity point
    generates the full group.
    """

    __slots__ = ("p", "a", "b", "order", "name", "field_bytes", "scalar_bytes")

    def __init__(self, p: int, a: int, b: int, order: int, name: str):
        if p % 2 == 0 or not is_prime(p):
            raise ValueError("field modulus must be an odd prime")
        if (4 * a * a * a + 27 * b * b) % p == 0:
            raise ValueError("singular curve (zero discriminant)")
        if not is_prime(order):
            raise ValueError("group order must be prime")
        self.p = p
        self.a = a % p
        self.b = b % p
        self.order = order
        self.name = name
        self.field_bytes = (p.bit_length() + 7) // 8
        self.scalar_bytes = (order.bit_length() + 7) // 8

    def on_curve(self, x: int, y: int) -> bool:
        p = self.p
        return (y * y - (x * x * x + self.a * x + self.b)) % p == 0

    def y_for_x(self, x: int) -> Optional[int]:
        """One square root of x^3 + ax + b, or None when x is not on the curve."""
        return sqrt_mod((x * x * x + self.a * x + self.b) % self.p, self.p)

    def point(self, x: int, y: int) -> "Point":
        if not self.on_curve(x, y):
            raise ValueError(f"({x}, {y}) is not on {self.name}")
        return Point(self, x, y)

    def identity(self) -> "Point":
        return Point(self, None, None)

    def reduce_scalar(self, k: int) -> int:
        return k % self.order

    def __repr__(self) -> str:
        return f"Curve({self.name})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Curve)
            and self.p == other.p
            and self.a == other.a
            and self.b == other.b
            and self.order == other.order
        )

    def __hash__(self) -> int:
        return hash((self.p, self.a, self.b, self.order))


class Point:
    """Immutable affine point; (None, None) is the identity."""

    __slots__ = ("curve", "x", "y")

    def __init__(self, curve: Curve, x: Optional[int], y: Optional[int]):
        self.curve = curve
        self.x = x
        self.y = y

    def is_identity(self) -> bool:
        return self.x is None

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Point)
            and self.curve == other.curve
            and self.x == other.x
            and self.y == other.y
        )

    def __hash__(self) -> int:
        return hash((self.curve.p, self.x, self.y))

    def __neg__(self) -> "Point":
        if self.x is None:
            return self
        return Point(self.curve, self.x, self.curve.p - self.y if self.y else 0)

    def __add__(self, other: "Point") -> "Point":
        if not isinstance(other, Point):
            return NotImplemented
        if self.curve != other.curve:
            raise ValueError("points live on different curves")
        if self.x is None:
            return other
        if other.x is None:
            return self
        p = self.curve.p
        x1, y1, x2, y2 = self.x, self.y, other.x, other.y
        if x1 == x2:
            if (y1 + y2) % p == 0:
                return Point(self.curve, None, None)
            lam = (3 * x1 * x1 + self.curve.a) * pow(2 * y1, -1, p) % p
        else:
            lam = (y2 - y1) * pow(x2 - x1, -1, p) % p
        x3 = (lam * lam - x1 - x2) % p
        y3 = (lam * (x1 - x3) - y1) % p
        return Point(self.curve, x3, y3)

    def __sub__(self, other: "Point") -> "Point":
        return self + (-other)

    def __mul__(self, k: int) -> "Point":
        if not isinstance(k, int):
            return NotImplemented
        return msm([(k, self)], self.curve)

    __rmul__ = __mul__

    def encode(self) -> bytes:
        return point_encode(self)

    def __repr__(self) -> str:
        if self.x is None:
            return f"Point({self.curve.name}, inf)"
        return f"Point({self.curve.name}, 0x{self.x:x}, 0x{self.y:x})"


# ---------------------------------------------------------------------------
# Jacobian internals.  A Jacobian triple (X, Y, Z) represents the affine
# point (X/Z^2, Y/Z^3); Z = 0 is the identity.

JPoint = Tuple[int, int, int]

_J_INF: JPoint = (1, 1, 0)


def _jac_dbl(P: JPoint, p: int, a: int) -> JPoint:
    X1, Y1, Z1 = P
    if Z1 == 0 or Y1 == 0:
        return _J_INF
    YY = Y1 * Y1 % p
    S = 4 * X1 * YY % p
    ZZ = Z1 * Z1 % p
    M = (3 * X1 * X1 + a * ZZ % p * ZZ) % p
    X3 = (M * M - 2 * S) % p
    Y3 = (M * (S - X3) - 8 * YY * YY) % p
    Z3 = 2 * Y1 * Z1 % p
    return X3, Y3, Z3


def _jac_add(P: JPoint, Q: JPoint, p: int, a: int) -> JPoint:
    X1, Y1, Z1 = P
    X2, Y2, Z2 = Q
    if Z1 == 0:
        return Q
    if Z2 == 0:
        return P
    Z1Z1 = Z1 * Z1 % p
    Z2Z2 = Z2 * Z2 % p
    U1 = X1 * Z2Z2 % p
    U2 = X2 * Z1Z1 % p
    S1 = Y1 * Z2Z2 % p * Z2 % p
    S2 = Y2 * Z1Z1 % p * Z1 % p
    if U1 == U2:
        if S1 != S2:
            return _J_INF
        return _jac_dbl(P, p, a)
    H = (U2 - U1) % p
    I = 4 * H * H % p
    J = H * I % p
    r = 2 * (S2 - S1) % p
    V = U1 * I % p
    X3 = (r * r - J - 2 * V) % p
    Y3 = (r * (V - X3) - 2 * S1 * J) % p
    Z3 = 2 * H % p * Z1 % p * Z2 % p
    return X3, Y3, Z3


def _to_jac(P: Point) -> JPoint:
    if P.x is None:
        return _J_INF
    return (P.x, P.y, 1)


def _from_jac(J: JPoint, curve: Curve) -> Point:
    X, Y, Z = J
    if Z == 0:
        return Point(curve, None, None)
    p = curve.p
    zi = pow(Z, -1, p)
    zi2 = zi * zi % p
    return Point(curve, X * zi2 % p, Y * zi2 % p * zi % p)


def scalar_mul(k: int, P: Point, trace: Optional[list] = None) -> Point:
    """k * P via a fixed Montgomery-style ladder.

    The ladder walks a fixed number of bits (the bit length of the group
    order) and performs exactly one add and one double per bit, so the
    sequence of group operations does not depend on the scalar's bit values.
    ``trace``, when given, collects the per-bit operation labels so the
    uniform structure can be asserted in tests.
    """
    curve = P.curve
    k %= curve.order
    p, a = curve.p, curve.a
    bits = curve.order.bit_length()
    r0: JPoint = _J_INF
    r1: JPoint = _to_jac(P)
    for i in range(bits - 1, -1, -1):
        if (k >> i) & 1:
            r0 = _jac_add(r0, r1, p, a)
            r1 = _jac_dbl(r1, p, a)
        else:
            r1 = _jac_add(r0, r1, p, a)
            r0 = _jac_dbl(r0, p, a)
        if trace is not None:
            trace.append(("add", "dbl"))
    return _from_jac(r0, curve)


def _batch_affine(points: List[JPoint], p: int) -> List[JPoint]:
    """Normalise many Jacobian points to Z = 1 with a single field inversion
    (Montgomery's trick); cheaper mixed additions downstream."""
    out = list(points)
    idx = [i for i, (_, _, Z) in enumerate(out) if Z not in (0, 1)]
    if not idx:
        return out
    prefix = []
    acc = 1
    for i in idx:
        acc = acc * out[i][2] % p
        prefix.append(acc)
    inv = pow(acc, -1, p)
    for pos in range(len(idx) - 1, -1, -1):
        i = idx[pos]
        zi = inv * (prefix[pos - 1] if pos else 1) % p
        inv = inv * out[i][2] % p
        X, Y, _ = out[i]
        zi2 = zi * zi % p
        out[i] = (X * zi2 % p, Y * zi2 % p * zi % p, 1)
    return out


class _CombTable:
    """Fixed-base precomputation: per 4-bit window of the scalar, the 15
    nonzero digit multiples of (16^w) * P, stored affine for mixed addition."""

    __slots__ = ("curve", "rows")

    def __init__(self, P: Point):
        curve = P.curve
        self.curve = curve
        p, a = curve.p, curve.a
        windows = (curve.order.bit_length() + 3) // 4
        rows: List[List[JPoint]] = []
        base = _to_jac(P)
        for _ in range(windows):
            row = [_J_INF, base]
            acc = base
            for _ in range(14):
                acc = _jac_add(acc, base, p, a)
                row.append(acc)
            rows.append(row)
            base = _jac_add(row[-1], base, p, a)  # 16^w * P for the next row
        flat = _batch_affine([pt for row in rows for pt in row], p)
        self.rows = [flat[i * 16 : (i + 1) * 16] for i in range(windows)]

    def mul(self, k: int) -> JPoint:
        p, a = self.curve.p, self.curve.a
        acc = _J_INF
        w = 0
        rows = self.rows
        while k:
            d = k & 15
            if d:
                acc = _jac_add(acc, rows[w][d], p, a)
            k >>= 4
            w += 1
        return acc


_comb_cache: dict = {}


def _comb_key(P: Point):
    return (P.curve.p, P.curve.b, P.x, P.y)


def warm_fixed_base(P: Point) -> None:
    """Precompute a fixed-base table for P (worth it for generators and other
    long-lived points; never done implicitly for session-fresh points)."""
    if P.is_identity() or P.curve.order.bit_length() <= 96:
        return
    key = _comb_key(P)
    if key not in _comb_cache:
        _comb_cache[key] = _CombTable(P)


def _plain_mul_jac(k: int, P: Point) -> JPoint:
    """Left-to-right 4-bit windowed multiply (not constant time)."""
    curve = P.curve
    p, a = curve.p, curve.a
    base = _to_jac(P)
    tab = [_J_INF, base]
    acc = base
    for _ in range(14):
        acc = _jac_add(acc, base, p, a)
        tab.append(acc)
    acc = _J_INF
    for w in range((k.bit_length() + 3) // 4 - 1, -1, -1):
        if acc[2] != 0:
            acc = _jac_dbl(acc, p, a)
            acc = _jac_dbl(acc, p, a)
            acc = _jac_dbl(acc, p, a)
            acc = _jac_dbl(acc, p, a)
        d = (k >> (4 * w)) & 15
        if d:
            acc = _jac_add(acc, tab[d], p, a)
    return acc


def msm(terms: Iterable[Tuple[int, Point]], curve: Optional[Curve] = None) -> Point:
    """Sum of k_i * P_i (not constant time; the hardened single-scalar path
    is ``scalar_mul``).  Registered fixed bases go through their comb tables;
    the rest share an interleaved-window pass."""
    terms = [(k % P.curve.order, P) for k, P in terms if not P.is_identity()]
    terms = [(k, P) for k, P in terms if k != 0]
    if not terms:
        if curve is None:
            raise ValueError("empty multi-scalar sum with no curve given")
        return curve.identity()
    curve = terms[0][1].curve
    p, a = curve.p, curve.a
    for _, P in terms:
        if P.curve != curve:
            raise ValueError("multi-scalar sum mixes curves")
    if curve.order.bit_length() <= 96:
        # tiny test curves: no precomputation pays off
        acc = _J_INF
        for k, P in terms:
            acc = _jac_add(acc, _plain_mul_jac(k, P), p, a)
        return _from_jac(acc, curve)
    acc = _J_INF
    fresh: List[Tuple[int, Point]] = []
    for k, P in terms:
        tab = _comb_cache.get(_comb_key(P))
        if tab is not None:
            acc = _jac_add(acc, tab.mul(k), p, a)
        else:
            fresh.append((k, P))
    if len(fresh) == 1:
        acc = _jac_add(acc, _plain_mul_jac(*fresh[0]), p, a)
    elif fresh:
        # interleaved 4-bit windows across the unregistered terms
        tables = []
        for k, P in fresh:
            base = _to_jac(P)
            tab = [_J_INF, base]
            t = base
            for _ in range(14):
                t = _jac_add(t, base, p, a)
                tab.append(t)
            tables.append((k, tab))
        top = max(k.bit_length() for k, _ in fresh)
        part = _J_INF
        for w in range((top + 3) // 4 - 1, -1, -1):
            if part[2] != 0:
                for _ in range(4):
                    part = _jac_dbl(part, p, a)
            shift = 4 * w
            for k, tab in tables:
                d = (k >> shift) & 15
                if d:
                    part = _jac_add(part, tab[d], p, a)
        acc = _jac_add(acc, part, p, a)
    return _from_jac(acc, curve)


# ---------------------------------------------------------------------------
# Hash-to-curve and serialization.


def point_from_hash(curve: Curve, seed: bytes) -> Point:
    """Hash-and-increment: derive x candidates from the seed until one lands
    on the curve, then take the numerically smaller y root."""
    counter = 0
    while True:
        digest = hashlib.sha256(seed + counter.to_bytes(4, "big")).digest()
        x = int.from_bytes(digest, "big") % curve.p
        y = curve.y_for_x(x)
        if y is not None:
            y = min(y, curve.p - y)
            if y == 0:  # avoid the (rare) 2-torsion-looking edge on toy fields
                counter += 1
                continue
            return Point(curve, x, y)
        counter += 1


def derive_generators(curve: Curve, count: int, label: bytes) -> List[Point]:
    """Deterministic, label-separated generators with unknown dlog relations."""
    if count < 1:
        raise ValueError("generator count must be >= 1")
    if not label:
        raise ValueError("generator label must be non-empty")
    seed_base = b"ats-gen|" + curve.name.encode() + b"|" + label + b"|"
    return [
        point_from_hash(curve, seed_base + i.to_bytes(4, "big")) for i in range(count)
    ]


def point_encode(P: Point) -> bytes:
    """Compressed encoding: sign byte (0x02 even y / 0x03 odd y, 0x00 for the
    identity) followed by big-endian x padded to the field width."""
    n = P.curve.field_bytes
    if P.x is None:
        return b"\x00" + b"\x00" * n
    sign = 0x03 if P.y & 1 else 0x02
    return bytes([sign]) + P.x.to_bytes(n, "big")


def point_decode(curve: Curve, data: bytes) -> Point:
    n = curve.field_bytes
    if len(data) != n + 1:
        raise ValueError(f"point encoding must be {n + 1} bytes, got {len(data)}")
    sign, xb = data[0], data[1:]
    if sign == 0x00:
        if any(xb):
            raise ValueError("identity encoding carries nonzero payload")
        return Point(curve, None, None)
    if sign not in (0x02, 0x03):
        raise ValueError(f"bad sign byte 0x{sign:02x}")
    x = int.from_bytes(xb, "big")
    if x >= curve.p:
        raise ValueError("x coordinate out of field range")
    y = curve.y_for_x(x)
    if y is None:
        raise ValueError("x coordinate is not on the curve")
    if (y & 1) != (sign == 0x03):
        y = curve.p - y
    return Point(curve, x, y)
