"""Discrete-log sigma protocols over a prime-order curve.

Provided relations:

* ``open``     - knowledge of the opening of a Pedersen multi-commitment.
* ``issue``    - opening knowledge where slot 2 is zero and slot 3 is the
                 discrete log of a public key (token-issuance shape).
* ``add``      - committed value is the sum/difference of two committed values.
* ``mul``      - committed value is the product of two committed values.
* ``add_mul``  - committed value equals x*y + z for committed x, y, z.
* ``or_eq``    - one-out-of-many: C* differs from one of C_1..C_l by a
                 multiple of H (the select-and-rerandomize step).
* ``dlog_eq``  - one exponent ties several base/point pairs together.

Every protocol ships in two modes behind the same data types: Fiat-Shamir
(challenge squeezed from a transcript that absorbed the statement and the
prover's first message) and interactive (caller supplies the challenge),
the latter kept so rewinding extractors can run.  HVZK simulators are
provided where the test oracles need them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from .encoding import Reader, ser_points, ser_scalars, write_vec_len
from .groups import Curve, Point, msm
from .pedersen import Opening
from .transcript import Transcript

__all__ = [
    "OpenProof",
    "IssueProof",
    "AddMulProof",
    "AddProof",
    "MulProof",
    "OrEqProof",
    "DlogEqProof",
    "prove_open",
    "verify_open",
    "simulate_open",
    "extract_open",
    "prove_issue",
    "verify_issue",
    "simulate_issue",
    "prove_add_mul",
    "verify_add_mul",
    "simulate_add_mul",
    "prove_add",
    "verify_add",
    "simulate_add",
    "extract_add",
    "prove_mul",
    "verify_mul",
    "simulate_mul",
    "extract_mul",
    "prove_or_eq",
    "verify_or_eq",
    "prove_dlog_eq",
    "verify_dlog_eq",
]


def _rand_unit(rng, order: int) -> int:
    return rng.randrange(1, order)


# ---------------------------------------------------------------------------
# pi_open


@dataclass
class OpenProof:
    t1: Point
    c: int
    s: List[int]   # responses for the message slots
    sx: int        # response for the blinding scalar

    def to_bytes(self) -> bytes:
        curve = self.t1.curve
        return (
            self.t1.encode()
            + ser_scalars(curve, [self.c])
            + write_vec_len(len(self.s))
            + ser_scalars(curve, self.s)
            + ser_scalars(curve, [self.sx])
        )

    @classmethod
    def from_bytes(cls, curve: Curve, data: bytes) -> "OpenProof":
        r = Reader(data)
        proof = cls.read(curve, r)
        r.done()
        return proof

    @classmethod
    def read(cls, curve: Curve, r: Reader) -> "OpenProof":
        t1 = r.point(curve)
        c = r.scalar(curve)
        n = r.vec_len()
        s = r.scalars(curve, n)
        sx = r.scalar(curve)
        return cls(t1, c, s, sx)


def _open_absorb(tr: Transcript, C: Point, gens: Sequence[Point], blind: Point):
    tr.absorb(b"proof", b"pi-open")
    tr.absorb_points(b"gens", gens)
    tr.absorb_point(b"H", blind)
    tr.absorb_point(b"C", C)


def open_commit(n: int, gens: Sequence[Point], blind: Point, rng) -> Tuple[dict, Point]:
    order = blind.curve.order
    alphas = [_rand_unit(rng, order) for _ in range(n)]
    ax = _rand_unit(rng, order)
    t1 = msm([(ax, blind)] + list(zip(alphas, gens)), blind.curve)
    return {"alphas": alphas, "ax": ax}, t1


def open_respond(state: dict, opening: Opening, c: int, order: int) -> Tuple[List[int], int]:
    s = [
        (m * c + a) % order
        for m, a in zip(opening.messages, state["alphas"])
    ]
    sx = (opening.r * c + state["ax"]) % order
    return s, sx


def prove_open(opening: Opening, C: Point, gens: Sequence[Point], blind: Point,
               tr: Transcript, rng) -> OpenProof:
    n = len(opening.messages)
    if n > len(gens):
        raise ValueError("more messages than generators")
    gens = list(gens)[:n]
    order = blind.curve.order
    _open_absorb(tr, C, gens, blind)
    state, t1 = open_commit(n, gens, blind, rng)
    tr.absorb_point(b"t1", t1)
    c = tr.challenge_scalar(b"c", order)
    s, sx = open_respond(state, opening, c, order)
    return OpenProof(t1, c, s, sx)


def verify_open_with_challenge(proof: OpenProof, C: Point, gens: Sequence[Point],
                               blind: Point) -> bool:
    if len(proof.s) != len(gens):
        return False
    curve = blind.curve
    lhs = msm([(proof.c, C)], curve) + proof.t1
    rhs = msm([(proof.sx, blind)] + list(zip(proof.s, gens)), curve)
    return lhs == rhs


def verify_open(proof: OpenProof, C: Point, gens: Sequence[Point], blind: Point,
                tr: Transcript) -> bool:
    gens = list(gens)
    if len(proof.s) != len(gens):
        return False
    _open_absorb(tr, C, gens, blind)
    tr.absorb_point(b"t1", proof.t1)
    c = tr.challenge_scalar(b"c", blind.curve.order)
    if c != proof.c:
        return False
    return verify_open_with_challenge(proof, C, gens, blind)


def simulate_open(C: Point, c: int, n: int, gens: Sequence[Point], blind: Point,
                  rng) -> OpenProof:
    """HVZK simulator: t1 = sx*H + sum s_k*G_k - c*C verifies by construction."""
    order = blind.curve.order
    s = [_rand_unit(rng, order) for _ in range(n)]
    sx = _rand_unit(rng, order)
    t1 = msm([(sx, blind)] + list(zip(s, gens)), blind.curve) - c * C
    return OpenProof(t1, c % order, s, sx)


def extract_open(p1: OpenProof, p2: OpenProof, order: int) -> Opening:
    """Special-soundness extractor from two accepting transcripts with the
    same first message and distinct challenges."""
    if p1.t1 != p2.t1 or p1.c == p2.c:
        raise ValueError("transcripts do not collide")
    inv = pow((p1.c - p2.c) % order, -1, order)
    msgs = [(a - b) * inv % order for a, b in zip(p1.s, p2.s)]
    r = (p1.sx - p2.sx) * inv % order
    return Opening(msgs, r)


# ---------------------------------------------------------------------------
# pi_issue: token commitment C = r*H + m1*G1 + m2*G2 + m3*G3 + m4*G4 with
# m2 = 0 and pk = m3 * G.  Responses cover slots {1, 3, 4} plus blinding.

_ISSUE_SLOTS = (0, 2, 3)  # 0-based indices of slots 1, 3, 4


@dataclass
class IssueProof:
    t1: Point
    t2: Point
    c: int
    s1: int
    s3: int
    s4: int
    s5: int

    def to_bytes(self) -> bytes:
        curve = self.t1.curve
        return (
            self.t1.encode()
            + self.t2.encode()
            + ser_scalars(curve, [self.c, self.s1, self.s3, self.s4, self.s5])
        )

    @classmethod
    def from_bytes(cls, curve: Curve, data: bytes) -> "IssueProof":
        r = Reader(data)
        proof = cls.read(curve, r)
        r.done()
        return proof

    @classmethod
    def read(cls, curve: Curve, r: Reader) -> "IssueProof":
        t1, t2 = r.point(curve), r.point(curve)
        c, s1, s3, s4, s5 = r.scalars(curve, 5)
        return cls(t1, t2, c, s1, s3, s4, s5)


def _issue_absorb(tr: Transcript, C: Point, pk: Point, base: Point,
                  gens: Sequence[Point], blind: Point):
    tr.absorb(b"proof", b"pi-issue")
    tr.absorb_point(b"G", base)
    tr.absorb_points(b"gens", gens[:4])
    tr.absorb_point(b"H", blind)
    tr.absorb_point(b"C", C)
    tr.absorb_point(b"pk", pk)


def prove_issue(opening: Opening, C: Point, pk: Point, base: Point,
                gens: Sequence[Point], blind: Point, tr: Transcript, rng) -> IssueProof:
    """Prover side; a witness with nonzero slot 2 still emits bytes, but the
    resulting proof cannot satisfy the verifier's equations."""
    if len(opening.messages) != 4:
        raise ValueError("issuance opening must carry exactly 4 slots")
    order = blind.curve.order
    _issue_absorb(tr, C, pk, base, gens, blind)
    a1, a3, a4, a5 = (_rand_unit(rng, order) for _ in range(4))
    t1 = a3 * base
    t2 = msm([(a5, blind), (a1, gens[0]), (a3, gens[2]), (a4, gens[3])], blind.curve)
    tr.absorb_point(b"t1", t1)
    tr.absorb_point(b"t2", t2)
    c = tr.challenge_scalar(b"c", order)
    m = opening.messages
    s1 = (m[0] * c + a1) % order
    s3 = (m[2] * c + a3) % order
    s4 = (m[3] * c + a4) % order
    s5 = (opening.r * c + a5) % order
    return IssueProof(t1, t2, c, s1, s3, s4, s5)


def verify_issue(proof: IssueProof, C: Point, pk: Point, base: Point,
                 gens: Sequence[Point], blind: Point, tr: Transcript) -> bool:
    order = blind.curve.order
    _issue_absorb(tr, C, pk, base, gens, blind)
    tr.absorb_point(b"t1", proof.t1)
    tr.absorb_point(b"t2", proof.t2)
    c = tr.challenge_scalar(b"c", order)
    if c != proof.c:
        return False
    if msm([(c, pk)], pk.curve) + proof.t1 != proof.s3 * base:
        return False
    lhs = msm([(c, C)], C.curve) + proof.t2
    rhs = msm(
        [(proof.s5, blind), (proof.s1, gens[0]), (proof.s3, gens[2]), (proof.s4, gens[3])],
        blind.curve,
    )
    return lhs == rhs


def simulate_issue(C: Point, pk: Point, c: int, base: Point, gens: Sequence[Point],
                   blind: Point, rng) -> IssueProof:
    order = blind.curve.order
    s1, s3, s4, s5 = (_rand_unit(rng, order) for _ in range(4))
    t1 = s3 * base - c * pk
    t2 = msm(
        [(s5, blind), (s1, gens[0]), (s3, gens[2]), (s4, gens[3])], blind.curve
    ) - c * C
    return IssueProof(t1, t2, c % order, s1, s3, s4, s5)


# ---------------------------------------------------------------------------
# pi_add-mul: m = x*y + z over single-slot commitments
#   C1 = x G + r1 H,  C2 = y G + r2 H,  C3 = z G + r3 H,
#   C4 = xy G + r4 H, C5 = (xy + z) G + (r4 + r3) H


@dataclass
class AddMulProof:
    commits: List[Point]   # C1..C5
    t: List[Point]         # t1..t6
    c: int
    s: List[int]           # s1..s9

    def to_bytes(self) -> bytes:
        curve = self.c_curve()
        return (
            ser_points(self.commits)
            + ser_points(self.t)
            + ser_scalars(curve, [self.c])
            + ser_scalars(curve, self.s)
        )

    def c_curve(self) -> Curve:
        return self.commits[0].curve

    @classmethod
    def from_bytes(cls, curve: Curve, data: bytes) -> "AddMulProof":
        r = Reader(data)
        proof = cls.read(curve, r)
        r.done()
        return proof

    @classmethod
    def read(cls, curve: Curve, r: Reader) -> "AddMulProof":
        commits = r.points(curve, 5)
        t = r.points(curve, 6)
        c = r.scalar(curve)
        s = r.scalars(curve, 9)
        return cls(commits, t, c, s)


def _add_mul_absorb(tr: Transcript, commits: Sequence[Point], base: Point, blind: Point):
    tr.absorb(b"proof", b"pi-add-mul")
    tr.absorb_point(b"G", base)
    tr.absorb_point(b"H", blind)
    tr.absorb_points(b"C", commits)


def prove_add_mul(x: int, y: int, z: int, r: Sequence[int], base: Point, blind: Point,
                  tr: Transcript, rng) -> AddMulProof:
    """r = (r1, r2, r3, r4); the five statement commitments are computed here
    and carried in the proof."""
    order = base.curve.order
    r1, r2, r3, r4 = (ri % order for ri in r)
    x, y, z = x % order, y % order, z % order
    xy = x * y % order
    commits = [
        msm([(x, base), (r1, blind)], base.curve),
        msm([(y, base), (r2, blind)], base.curve),
        msm([(z, base), (r3, blind)], base.curve),
        msm([(xy, base), (r4, blind)], base.curve),
        msm([((xy + z) % order, base), ((r4 + r3) % order, blind)], base.curve),
    ]
    a = [_rand_unit(rng, order) for _ in range(9)]
    t = [
        msm([(a[0], base), (a[1], blind)], base.curve),
        msm([(a[2], base), (a[3], blind)], base.curve),
        msm([(a[4], base), (a[5], blind)], base.curve),
        msm([(a[2], commits[0]), (a[6], blind)], base.curve),
        a[7] * base,
        a[8] * blind,
    ]
    _add_mul_absorb(tr, commits, base, blind)
    tr.absorb_points(b"t", t)
    c = tr.challenge_scalar(b"c", order)
    s = [
        (c * x + a[0]) % order,
        (c * r1 + a[1]) % order,
        (c * y + a[2]) % order,
        (c * r2 + a[3]) % order,
        (c * z + a[4]) % order,
        (c * r3 + a[5]) % order,
        (c * (r4 - r1 * y) + a[6]) % order,
        (c * (xy + z) + a[7]) % order,
        (c * (r4 + r3) + a[8]) % order,
    ]
    return AddMulProof(commits, t, c, s)


def verify_add_mul(proof: AddMulProof, base: Point, blind: Point, tr: Transcript) -> bool:
    if len(proof.commits) != 5 or len(proof.t) != 6 or len(proof.s) != 9:
        return False
    order = base.curve.order
    _add_mul_absorb(tr, proof.commits, base, blind)
    tr.absorb_points(b"t", proof.t)
    c = tr.challenge_scalar(b"c", order)
    if c != proof.c:
        return False
    return verify_add_mul_equations(proof, base, blind)


def verify_add_mul_equations(proof: AddMulProof, base: Point, blind: Point) -> bool:
    C = proof.commits
    t = proof.t
    s = proof.s
    c = proof.c
    curve = base.curve
    checks = [
        (msm([(s[0], base), (s[1], blind)], curve), t[0] + msm([(c, C[0])], curve)),
        (msm([(s[2], base), (s[3], blind)], curve), t[1] + msm([(c, C[1])], curve)),
        (msm([(s[4], base), (s[5], blind)], curve), t[2] + msm([(c, C[2])], curve)),
        (msm([(s[2], C[0]), (s[6], blind)], curve), t[3] + msm([(c, C[3])], curve)),
        (msm([(s[7], base), (s[8], blind)], curve), (t[4] + t[5]) + msm([(c, C[4])], curve)),
    ]
    return all(lhs == rhs for lhs, rhs in checks)


def simulate_add_mul(commits: Sequence[Point], c: int, base: Point, blind: Point,
                     rng) -> AddMulProof:
    order = base.curve.order
    s = [_rand_unit(rng, order) for _ in range(9)]
    curve = base.curve
    t1 = msm([(s[0], base), (s[1], blind)], curve) - c * commits[0]
    t2 = msm([(s[2], base), (s[3], blind)], curve) - c * commits[1]
    t3 = msm([(s[4], base), (s[5], blind)], curve) - c * commits[2]
    t4 = msm([(s[2], commits[0]), (s[6], blind)], curve) - c * commits[3]
    t6 = _rand_unit(rng, order) * blind
    t5 = msm([(s[7], base), (s[8], blind)], curve) - c * commits[4] - t6
    return AddMulProof(list(commits), [t1, t2, t3, t4, t5, t6], c % order, s)


# ---------------------------------------------------------------------------
# pi_add (and the subtraction variant): C3 = C1 +/- C2


@dataclass
class AddProof:
    sign: int              # +1 add, -1 subtract
    t: List[Point]         # t1..t4
    c: int
    s: List[int]           # s1..s6

    def to_bytes(self) -> bytes:
        curve = self.t[0].curve
        return (
            bytes([1 if self.sign > 0 else 0])
            + ser_points(self.t)
            + ser_scalars(curve, [self.c])
            + ser_scalars(curve, self.s)
        )

    @classmethod
    def from_bytes(cls, curve: Curve, data: bytes) -> "AddProof":
        r = Reader(data)
        proof = cls.read(curve, r)
        r.done()
        return proof

    @classmethod
    def read(cls, curve: Curve, r: Reader) -> "AddProof":
        flag = r.take(1)[0]
        if flag not in (0, 1):
            raise ValueError(f"bad sign flag 0x{flag:02x}")
        sign = 1 if flag else -1
        t = r.points(curve, 4)
        c = r.scalar(curve)
        s = r.scalars(curve, 6)
        return cls(sign, t, c, s)


def _add_absorb(tr: Transcript, commits: Sequence[Point], sign: int,
                base: Point, blind: Point):
    tr.absorb(b"proof", b"pi-add" if sign > 0 else b"pi-sub-lin")
    tr.absorb_point(b"G", base)
    tr.absorb_point(b"H", blind)
    tr.absorb_points(b"C", commits)


def prove_add(x: int, y: int, r1: int, r2: int, sign: int, base: Point, blind: Point,
              tr: Transcript, rng) -> Tuple[AddProof, List[Point]]:
    """Returns the proof and the statement commitments [C1, C2, C3]."""
    order = base.curve.order
    curve = base.curve
    x, y, r1, r2 = x % order, y % order, r1 % order, r2 % order
    C1 = msm([(x, base), (r1, blind)], curve)
    C2 = msm([(y, base), (r2, blind)], curve)
    C3 = C1 + C2 if sign > 0 else C1 - C2
    a = [_rand_unit(rng, order) for _ in range(6)]
    t = [
        a[0] * base,
        a[1] * blind,
        msm([(a[2], base), (a[3], blind)], curve),
        msm([(a[4], base), (a[5], blind)], curve),
    ]
    commits = [C1, C2, C3]
    _add_absorb(tr, commits, sign, base, blind)
    tr.absorb_points(b"t", t)
    c = tr.challenge_scalar(b"c", order)
    s = [
        (c * (x + sign * y) + a[0]) % order,
        (c * (r1 + sign * r2) + a[1]) % order,
        (c * x + a[2]) % order,
        (c * r1 + a[3]) % order,
        (c * y + a[4]) % order,
        (c * r2 + a[5]) % order,
    ]
    return AddProof(sign, t, c, s), commits


def verify_add(proof: AddProof, commits: Sequence[Point], base: Point, blind: Point,
               tr: Transcript) -> bool:
    if len(proof.t) != 4 or len(proof.s) != 6 or len(commits) != 3:
        return False
    order = base.curve.order
    _add_absorb(tr, commits, proof.sign, base, blind)
    tr.absorb_points(b"t", proof.t)
    c = tr.challenge_scalar(b"c", order)
    if c != proof.c:
        return False
    curve = base.curve
    C1, C2, C3 = commits
    s = proof.s
    t = proof.t
    if msm([(s[2], base), (s[3], blind)], curve) != t[2] + msm([(c, C1)], curve):
        return False
    if msm([(s[4], base), (s[5], blind)], curve) != t[3] + msm([(c, C2)], curve):
        return False
    return msm([(s[0], base), (s[1], blind)], curve) == (t[0] + t[1]) + msm(
        [(c, C3)], curve
    )


def simulate_add(commits: Sequence[Point], sign: int, c: int, base: Point,
                 blind: Point, rng) -> AddProof:
    order = base.curve.order
    curve = base.curve
    s = [_rand_unit(rng, order) for _ in range(6)]
    t3 = msm([(s[2], base), (s[3], blind)], curve) - c * commits[0]
    t4 = msm([(s[4], base), (s[5], blind)], curve) - c * commits[1]
    t2 = _rand_unit(rng, order) * blind
    t1 = msm([(s[0], base), (s[1], blind)], curve) - c * commits[2] - t2
    return AddProof(sign, [t1, t2, t3, t4], c % order, s)


def extract_add(p1: AddProof, p2: AddProof, order: int) -> dict:
    """Appendix extractor: openings for C1, C2 and the combined C3."""
    if p1.c == p2.c:
        raise ValueError("transcripts do not collide")
    inv = pow((p1.c - p2.c) % order, -1, order)
    d = lambda i: (p1.s[i] - p2.s[i]) * inv % order
    return {
        "x": d(2), "r1": d(3), "y": d(4), "r2": d(5),
        "combined": d(0), "combined_r": d(1),
    }


# ---------------------------------------------------------------------------
# pi_mul: C3 commits x*y for C1 = xG + r1H, C2 = yG + r2H


@dataclass
class MulProof:
    t: List[Point]         # t1..t3
    c: int
    s: List[int]           # s1..s5

    def to_bytes(self) -> bytes:
        curve = self.t[0].curve
        return ser_points(self.t) + ser_scalars(curve, [self.c]) + ser_scalars(curve, self.s)

    @classmethod
    def from_bytes(cls, curve: Curve, data: bytes) -> "MulProof":
        r = Reader(data)
        proof = cls.read(curve, r)
        r.done()
        return proof

    @classmethod
    def read(cls, curve: Curve, r: Reader) -> "MulProof":
        t = r.points(curve, 3)
        c = r.scalar(curve)
        s = r.scalars(curve, 5)
        return cls(t, c, s)


def _mul_absorb(tr: Transcript, commits: Sequence[Point], base: Point, blind: Point):
    tr.absorb(b"proof", b"pi-mul")
    tr.absorb_point(b"G", base)
    tr.absorb_point(b"H", blind)
    tr.absorb_points(b"C", commits)


def prove_mul(x: int, y: int, r1: int, r2: int, r3: int, base: Point, blind: Point,
              tr: Transcript, rng) -> Tuple[MulProof, List[Point]]:
    order = base.curve.order
    curve = base.curve
    x, y, r1, r2, r3 = (v % order for v in (x, y, r1, r2, r3))
    C1 = msm([(x, base), (r1, blind)], curve)
    C2 = msm([(y, base), (r2, blind)], curve)
    C3 = msm([(x * y % order, base), (r3, blind)], curve)
    a = [_rand_unit(rng, order) for _ in range(5)]
    t = [
        msm([(a[0], base), (a[1], blind)], curve),
        msm([(a[2], base), (a[3], blind)], curve),
        msm([(a[2], C1), (a[4], blind)], curve),
    ]
    commits = [C1, C2, C3]
    _mul_absorb(tr, commits, base, blind)
    tr.absorb_points(b"t", t)
    c = tr.challenge_scalar(b"c", order)
    s = [
        (c * x + a[0]) % order,
        (c * r1 + a[1]) % order,
        (c * y + a[2]) % order,
        (c * r2 + a[3]) % order,
        (c * (r3 - r1 * y) + a[4]) % order,
    ]
    return MulProof(t, c, s), commits


def verify_mul(proof: MulProof, commits: Sequence[Point], base: Point, blind: Point,
               tr: Transcript) -> bool:
    if len(proof.t) != 3 or len(proof.s) != 5 or len(commits) != 3:
        return False
    order = base.curve.order
    _mul_absorb(tr, commits, base, blind)
    tr.absorb_points(b"t", proof.t)
    c = tr.challenge_scalar(b"c", order)
    if c != proof.c:
        return False
    return verify_mul_equations(proof, commits, base, blind)


def verify_mul_equations(proof: MulProof, commits: Sequence[Point], base: Point,
                         blind: Point) -> bool:
    curve = base.curve
    C1, C2, C3 = commits
    s, t, c = proof.s, proof.t, proof.c
    if msm([(s[0], base), (s[1], blind)], curve) != t[0] + msm([(c, C1)], curve):
        return False
    if msm([(s[2], base), (s[3], blind)], curve) != t[1] + msm([(c, C2)], curve):
        return False
    return msm([(s[2], C1), (s[4], blind)], curve) == t[2] + msm([(c, C3)], curve)


def simulate_mul(commits: Sequence[Point], c: int, base: Point, blind: Point,
                 rng) -> MulProof:
    order = base.curve.order
    curve = base.curve
    s = [_rand_unit(rng, order) for _ in range(5)]
    t1 = msm([(s[0], base), (s[1], blind)], curve) - c * commits[0]
    t2 = msm([(s[2], base), (s[3], blind)], curve) - c * commits[1]
    t3 = msm([(s[2], commits[0]), (s[4], blind)], curve) - c * commits[2]
    return MulProof([t1, t2, t3], c % order, s)


def extract_mul(p1: MulProof, p2: MulProof, commits: Sequence[Point], base: Point,
                blind: Point, order: int) -> dict:
    """Rewinding extractor: recovers (x, r1, y, r2) and the C3 opening."""
    if p1.t != p2.t or p1.c == p2.c:
        raise ValueError("transcripts do not collide")
    inv = pow((p1.c - p2.c) % order, -1, order)
    d = lambda i: (p1.s[i] - p2.s[i]) * inv % order
    x, r1, y, r2 = d(0), d(1), d(2), d(3)
    r3 = (y * r1 + d(4)) % order
    return {"x": x, "r1": r1, "y": y, "r2": r2, "xy": x * y % order, "r3": r3}


# ---------------------------------------------------------------------------
# One-out-of-many rerandomization proof: exists i with C* - C_i in <H>


@dataclass
class OrEqProof:
    t: List[Point]
    shares: List[int]   # per-branch challenge shares, summing to the master
    s: List[int]

    def to_bytes(self) -> bytes:
        curve = self.t[0].curve
        return (
            write_vec_len(len(self.t))
            + ser_points(self.t)
            + ser_scalars(curve, self.shares)
            + ser_scalars(curve, self.s)
        )

    @classmethod
    def from_bytes(cls, curve: Curve, data: bytes) -> "OrEqProof":
        r = Reader(data)
        proof = cls.read(curve, r)
        r.done()
        return proof

    @classmethod
    def read(cls, curve: Curve, r: Reader) -> "OrEqProof":
        n = r.vec_len()
        t = r.points(curve, n)
        shares = r.scalars(curve, n)
        s = r.scalars(curve, n)
        return cls(t, shares, s)


def _or_eq_absorb(tr: Transcript, c_star: Point, children: Sequence[Point], blind: Point):
    tr.absorb(b"proof", b"pi-oreq")
    tr.absorb_point(b"H", blind)
    tr.absorb_point(b"C*", c_star)
    tr.absorb_points(b"children", children)


def prove_or_eq(c_star: Point, children: Sequence[Point], index: int, delta: int,
                blind: Point, tr: Transcript, rng) -> OrEqProof:
    """Standard OR composition: simulate every branch but ``index``, then
    derive the real branch's challenge share from the master challenge."""
    order = blind.curve.order
    n = len(children)
    if not 0 <= index < n:
        raise ValueError("branch index out of range")
    diffs = [c_star - ch for ch in children]
    t: List[Optional[Point]] = [None] * n
    shares = [0] * n
    s = [0] * n
    for i in range(n):
        if i == index:
            continue
        shares[i] = _rand_unit(rng, order)
        s[i] = _rand_unit(rng, order)
        t[i] = s[i] * blind - shares[i] * diffs[i]
    alpha = _rand_unit(rng, order)
    t[index] = alpha * blind
    _or_eq_absorb(tr, c_star, children, blind)
    tr.absorb_points(b"t", t)
    master = tr.challenge_scalar(b"c", order)
    shares[index] = (master - sum(shares)) % order
    s[index] = (alpha + shares[index] * delta) % order
    return OrEqProof(t, shares, s)


def verify_or_eq(proof: OrEqProof, c_star: Point, children: Sequence[Point],
                 blind: Point, tr: Transcript) -> bool:
    n = len(children)
    if len(proof.t) != n or len(proof.shares) != n or len(proof.s) != n:
        return False
    order = blind.curve.order
    _or_eq_absorb(tr, c_star, children, blind)
    tr.absorb_points(b"t", proof.t)
    master = tr.challenge_scalar(b"c", order)
    if sum(proof.shares) % order != master:
        return False
    for i in range(n):
        if proof.s[i] * blind != proof.t[i] + proof.shares[i] * (c_star - children[i]):
            return False
    return True


# ---------------------------------------------------------------------------
# Discrete-log equality across several bases, single response


@dataclass
class DlogEqProof:
    t: List[Point]
    c: int
    s: int

    def to_bytes(self) -> bytes:
        curve = self.t[0].curve
        return (
            write_vec_len(len(self.t))
            + ser_points(self.t)
            + ser_scalars(curve, [self.c, self.s])
        )

    @classmethod
    def from_bytes(cls, curve: Curve, data: bytes) -> "DlogEqProof":
        r = Reader(data)
        proof = cls.read(curve, r)
        r.done()
        return proof

    @classmethod
    def read(cls, curve: Curve, r: Reader) -> "DlogEqProof":
        n = r.vec_len()
        t = r.points(curve, n)
        c = r.scalar(curve)
        s = r.scalar(curve)
        return cls(t, c, s)


def _dlog_eq_absorb(tr: Transcript, bases: Sequence[Point], points: Sequence[Point]):
    tr.absorb(b"proof", b"pi-dlogeq")
    tr.absorb_points(b"bases", bases)
    tr.absorb_points(b"points", points)


def prove_dlog_eq(gamma: int, bases: Sequence[Point], tr: Transcript, rng,
                  points: Optional[Sequence[Point]] = None) -> DlogEqProof:
    order = bases[0].curve.order
    if points is None:
        points = [gamma * B for B in bases]
    alpha = _rand_unit(rng, order)
    t = [alpha * B for B in bases]
    _dlog_eq_absorb(tr, bases, points)
    tr.absorb_points(b"t", t)
    c = tr.challenge_scalar(b"c", order)
    s = (alpha + c * gamma) % order
    return DlogEqProof(t, c, s)


def verify_dlog_eq(proof: DlogEqProof, bases: Sequence[Point],
                   points: Sequence[Point], tr: Transcript) -> bool:
    if len(bases) != len(points) or len(proof.t) != len(bases):
        return False
    order = bases[0].curve.order
    _dlog_eq_absorb(tr, bases, points)
    tr.absorb_points(b"t", proof.t)
    c = tr.challenge_scalar(b"c", order)
    if c != proof.c:
        return False
    for B, P, t in zip(bases, points, proof.t):
        if proof.s * B != t + msm([(c, P)], B.curve):
            return False
    return True
