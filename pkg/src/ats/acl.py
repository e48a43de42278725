"""Blind signatures with attributes (three-move, Abe-style OR of knowing the
signing key or the tag key's discrete log).

The signer blind-signs a Pedersen commitment to the user's attributes; the
user walks away with a signature carrying blinded commitment values the
signer has never seen, so issuing and showing are unlinkable.  Selective
disclosure reuses the opening proof over generator images blinded by the
same exponent, tied together with a discrete-log-equality proof.

Signing sessions are stateful on both ends; one state value per session.
Concurrent sessions are independent, but no claim is made about concurrent
security of the underlying scheme.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .encoding import Reader, ser_points, ser_scalars, write_vec_len
from .groups import Curve, Point, msm, point_from_hash, warm_fixed_base
from .params import GeneratorSet
from .pedersen import Opening, commit
from .sigma import (
    DlogEqProof,
    OpenProof,
    prove_dlog_eq,
    prove_open,
    verify_dlog_eq,
    verify_open,
)
from .transcript import Transcript

__all__ = [
    "SignerKeys",
    "SignerCommitMessage",
    "SignerCommitState",
    "SignerResponse",
    "UserSignState",
    "BlindSignature",
    "SigOpening",
    "ShowBundle",
    "SessionAbort",
    "keygen",
    "reg_user",
    "reg_signer",
    "signer_commit",
    "user_challenge",
    "signer_respond",
    "user_finish",
    "verify",
    "show_gen",
    "show_verify",
]


class SessionAbort(Exception):
    """The counterparty broke the protocol; abandon the session."""


@dataclass
class SignerKeys:
    """Long-term signer key material.  ``sk`` is None on the public copy.

    The tag key z is a hash-to-curve image of (G, y, h), so nobody knows its
    discrete log; h is likewise derived from y.
    """

    gens: GeneratorSet
    sk: Optional[int]
    y: Point
    h: Point
    z: Point

    def public(self) -> "SignerKeys":
        return SignerKeys(self.gens, None, self.y, self.h, self.z)

    @property
    def curve(self) -> Curve:
        return self.y.curve


def keygen(gens: GeneratorSet, rng) -> SignerKeys:
    curve = gens.curve
    sk = rng.randrange(1, curve.order)
    y = sk * gens.base
    h = point_from_hash(curve, b"acl-h|" + y.encode())
    z = point_from_hash(
        curve, b"acl-z|" + gens.base.encode() + y.encode() + h.encode()
    )
    for point in (y, h, z):  # long-lived: every session multiplies by these
        warm_fixed_base(point)
    return SignerKeys(gens, sk, y, h, z)


def reg_user(keys: SignerKeys, attributes: Sequence[int], rng,
             r: Optional[int] = None) -> Tuple[Point, int, OpenProof]:
    """Commit to the attribute vector and prove knowledge of the opening.

    Returns (C, r, proof); the user keeps r for the later showing step.
    """
    if not attributes:
        raise ValueError("attribute vector must be non-empty")
    gens = keys.gens
    if len(attributes) > len(gens.gens):
        raise ValueError("more attributes than generators")
    order = keys.curve.order
    if r is None:
        r = rng.randrange(1, order)
    C = commit(attributes, r, gens.gens, gens.blind)
    tr = Transcript(b"acl-reg", keys.y.encode())
    proof = prove_open(
        Opening(list(attributes), r), C, gens.gens[: len(attributes)],
        gens.blind, tr, rng,
    )
    return C, r, proof


def reg_signer(keys: SignerKeys, C: Point, proof: OpenProof) -> bool:
    gens = keys.gens
    tr = Transcript(b"acl-reg", keys.y.encode())
    return verify_open(proof, C, gens.gens[: len(proof.s)], gens.blind, tr)


# ---------------------------------------------------------------------------
# Three-move signing


@dataclass
class SignerCommitMessage:
    rand: int
    a: Point
    a1: Point
    a2: Point

    def to_bytes(self) -> bytes:
        curve = self.a.curve
        return ser_scalars(curve, [self.rand]) + ser_points([self.a, self.a1, self.a2])

    @classmethod
    def read(cls, curve: Curve, r: Reader) -> "SignerCommitMessage":
        rand = r.scalar(curve)
        a, a1, a2 = r.points(curve, 3)
        return cls(rand, a, a1, a2)


@dataclass
class SignerCommitState:
    C: Point
    rand: int
    u: int
    r1: int
    r2: int
    c: int


@dataclass
class SignerResponse:
    ch: int
    c: int
    r: int
    r1: int
    r2: int

    def to_bytes(self, curve: Curve) -> bytes:
        return ser_scalars(curve, [self.ch, self.c, self.r, self.r1, self.r2])

    @classmethod
    def read(cls, curve: Curve, r: Reader) -> "SignerResponse":
        ch, c, rr, r1, r2 = r.scalars(curve, 5)
        return cls(ch, c, rr, r1, r2)


@dataclass
class BlindSignature:
    zeta1: Point
    zeta: Point
    rho: int
    omega: int
    rho1: int
    rho2: int
    nu: int
    omega1: int

    def to_bytes(self) -> bytes:
        curve = self.zeta.curve
        return ser_points([self.zeta1, self.zeta]) + ser_scalars(
            curve, [self.rho, self.omega, self.rho1, self.rho2, self.nu, self.omega1]
        )

    @classmethod
    def from_bytes(cls, curve: Curve, data: bytes) -> "BlindSignature":
        r = Reader(data)
        sig = cls.read(curve, r)
        r.done()
        return sig

    @classmethod
    def read(cls, curve: Curve, r: Reader) -> "BlindSignature":
        zeta1, zeta = r.points(curve, 2)
        rho, omega, rho1, rho2, nu, omega1 = r.scalars(curve, 6)
        return cls(zeta1, zeta, rho, omega, rho1, rho2, nu, omega1)


@dataclass
class SigOpening:
    gamma: int
    rand: int


@dataclass
class UserSignState:
    C: Point
    m: bytes
    rand: int
    gamma: int
    tau: int
    t: List[int]
    zeta: Point
    zeta1: Point
    zeta2: Point
    e: int


def signer_commit(keys: SignerKeys, C: Point, rng) -> Tuple[SignerCommitState, SignerCommitMessage]:
    if keys.sk is None:
        raise ValueError("signing requires the private key")
    gens = keys.gens
    order = keys.curve.order
    while True:
        # avoid degenerate session values (relevant on tiny test groups):
        # z1 or z2 as the identity would break the blinding algebra
        rand = rng.randrange(1, order)
        z1 = C + rand * gens.base
        z2 = keys.z - z1
        if not z1.is_identity() and not z2.is_identity():
            break
    u = rng.randrange(1, order)
    r1 = rng.randrange(1, order)
    r2 = rng.randrange(1, order)
    c = rng.randrange(1, order)
    a = u * gens.base
    a1 = msm([(r1, gens.base), (c, z1)], keys.curve)
    a2 = msm([(r2, keys.h), (c, z2)], keys.curve)
    return SignerCommitState(C, rand, u, r1, r2, c), SignerCommitMessage(rand, a, a1, a2)


def _epsilon(keys: SignerKeys, zeta: Point, zeta1: Point, p1: Point, p2: Point,
             p3: Point, p4: Point, m: bytes) -> int:
    tr = Transcript(b"acl-challenge", keys.y.encode() + keys.z.encode() + keys.h.encode())
    for label, pt in ((b"zeta", zeta), (b"zeta1", zeta1), (b"alpha", p1),
                      (b"alpha1", p2), (b"alpha2", p3), (b"mu", p4)):
        tr.absorb_point(label, pt)
    tr.absorb(b"m", m)
    return tr.challenge_scalar(b"epsilon", keys.curve.order)


def user_challenge(keys: SignerKeys, C: Point, R: SignerCommitMessage, m: bytes,
                   rng) -> Tuple[UserSignState, int]:
    """Blind the signer's commitments and produce the challenge e."""
    order = keys.curve.order
    gens = keys.gens
    if R.rand % order == 0:
        raise SessionAbort("signer sent rand = 0")
    for pt in (R.a, R.a1, R.a2):
        if pt.curve != keys.curve:
            raise SessionAbort("commitment points on the wrong curve")
    z1 = C + R.rand * gens.base
    if z1.is_identity() or (keys.z - z1).is_identity():
        raise SessionAbort("degenerate signer commitment")
    gamma = rng.randrange(1, order)
    tau = rng.randrange(1, order)
    zeta = gamma * keys.z
    zeta1 = gamma * z1
    zeta2 = zeta - zeta1
    mu = tau * keys.z
    t = [rng.randrange(1, order) for _ in range(5)]
    alpha = R.a + msm([(t[0], gens.base), (t[1], keys.y)], keys.curve)
    alpha1 = msm([(gamma, R.a1), (t[2], gens.base), (t[3], zeta1)], keys.curve)
    alpha2 = msm([(gamma, R.a2), (t[4], keys.h), (t[3], zeta2)], keys.curve)
    eps = _epsilon(keys, zeta, zeta1, alpha, alpha1, alpha2, mu, m)
    e = (eps - t[1] - t[3]) % order
    state = UserSignState(C, m, R.rand % order, gamma, tau, t, zeta, zeta1, zeta2, e)
    return state, e


def signer_respond(keys: SignerKeys, state: SignerCommitState, e: int) -> SignerResponse:
    if keys.sk is None:
        raise ValueError("signing requires the private key")
    order = keys.curve.order
    ch = (e - state.c) % order
    r = (state.u - ch * keys.sk) % order
    return SignerResponse(ch, state.c, r, state.r1, state.r2)


def user_finish(keys: SignerKeys, state: UserSignState,
                S: SignerResponse) -> Tuple[BlindSignature, SigOpening]:
    """Unblind the response into the final signature; aborts when the
    signer's answers fail the hash identity."""
    order = keys.curve.order
    t = state.t
    rho = (S.r + t[0]) % order
    omega = (S.ch + t[1]) % order
    rho1 = (state.gamma * S.r1 + t[2]) % order
    rho2 = (state.gamma * S.r2 + t[4]) % order
    omega1 = (S.c + t[3]) % order
    nu = (state.tau - omega1 * state.gamma) % order
    sig = BlindSignature(state.zeta1, state.zeta, rho, omega, rho1, rho2, nu, omega1)
    if not verify(keys, sig, state.m):
        raise SessionAbort("signer response failed the signature identity")
    return sig, SigOpening(state.gamma, state.rand)


def verify(keys: SignerKeys, sig: BlindSignature, m: bytes) -> bool:
    """Deterministic hash-identity check."""
    curve = keys.curve
    order = curve.order
    gens = keys.gens
    if sig.zeta.is_identity() or sig.zeta1.is_identity():
        return False
    zeta2 = sig.zeta - sig.zeta1
    p1 = msm([(sig.rho, gens.base), (sig.omega, keys.y)], curve)
    p2 = msm([(sig.rho1, gens.base), (sig.omega1, sig.zeta1)], curve)
    p3 = msm([(sig.rho2, keys.h), (sig.omega1, zeta2)], curve)
    p4 = msm([(sig.nu, keys.z), (sig.omega1, sig.zeta)], curve)
    eps = _epsilon(keys, sig.zeta, sig.zeta1, p1, p2, p3, p4, m)
    return (sig.omega + sig.omega1) % order == eps


# ---------------------------------------------------------------------------
# Selective showing


@dataclass
class ShowBundle:
    gamma_point: Point        # Gamma = gamma * G
    blinded: List[Point]      # [gamma*H, gamma*G_1, ..., gamma*G_n]
    eq: DlogEqProof
    opening: OpenProof

    def to_bytes(self) -> bytes:
        return (
            self.gamma_point.encode()
            + write_vec_len(len(self.blinded))
            + ser_points(self.blinded)
            + self.eq.to_bytes()
            + self.opening.to_bytes()
        )

    @classmethod
    def from_bytes(cls, curve: Curve, data: bytes) -> "ShowBundle":
        r = Reader(data)
        bundle = cls.read(curve, r)
        r.done()
        return bundle

    @classmethod
    def read(cls, curve: Curve, r: Reader) -> "ShowBundle":
        gamma_point = r.point(curve)
        n = r.vec_len()
        blinded = r.points(curve, n)
        eq = DlogEqProof.read(curve, r)
        opening = OpenProof.read(curve, r)
        return cls(gamma_point, blinded, eq, opening)


def _show_bases(keys: SignerKeys, n_attrs: int) -> List[Point]:
    gens = keys.gens
    return [keys.z, gens.base, gens.blind] + list(gens.gens[:n_attrs])


def show_gen(keys: SignerKeys, sig: BlindSignature, opening: SigOpening,
             attributes: Sequence[int], r: int, revealed: Set[int], rng,
             tr: Optional[Transcript] = None) -> ShowBundle:
    """Reveal the attribute subset ``revealed`` (indices into the vector) and
    prove knowledge of the rest, bound to the signature's zeta values."""
    gens = keys.gens
    curve = keys.curve
    n = len(attributes)
    if any(i >= n for i in revealed):
        raise ValueError("revealed index out of range")
    gamma = opening.gamma
    gamma_point = gamma * gens.base
    blinded = [gamma * gens.blind] + [gamma * g for g in gens.gens[:n]]
    if tr is None:
        tr = Transcript(b"acl-show", keys.y.encode())
    bases = _show_bases(keys, n)
    points = [sig.zeta, gamma_point] + blinded
    eq = prove_dlog_eq(gamma, bases, tr, rng, points=points)
    hidden = [i for i in range(n) if i not in revealed]
    # zeta1 = r*(gamma H) + sum_i l_i*(gamma G_i) + rand*Gamma
    reduced = sig.zeta1 - msm(
        [(attributes[i], blinded[1 + i]) for i in revealed], curve
    )
    open_gens = [blinded[1 + i] for i in hidden] + [gamma_point]
    witness = Opening([attributes[i] for i in hidden] + [opening.rand], r)
    proof = prove_open(witness, reduced, open_gens, blinded[0], tr, rng)
    return ShowBundle(gamma_point, blinded, eq, proof)


def show_verify(keys: SignerKeys, sig: BlindSignature, n_attrs: int,
                revealed: Dict[int, int], bundle: ShowBundle,
                tr: Optional[Transcript] = None) -> bool:
    curve = keys.curve
    if len(bundle.blinded) != n_attrs + 1:
        return False
    if bundle.gamma_point.is_identity():
        return False
    if any(i >= n_attrs for i in revealed):
        return False
    if tr is None:
        tr = Transcript(b"acl-show", keys.y.encode())
    bases = _show_bases(keys, n_attrs)
    points = [sig.zeta, bundle.gamma_point] + bundle.blinded
    if not verify_dlog_eq(bundle.eq, bases, points, tr):
        return False
    reduced = sig.zeta1 - msm(
        [(v, bundle.blinded[1 + i]) for i, v in revealed.items()], curve
    )
    hidden = [i for i in range(n_attrs) if i not in revealed]
    open_gens = [bundle.blinded[1 + i] for i in hidden] + [bundle.gamma_point]
    return verify_open(bundle.opening, reduced, open_gens, bundle.blinded[0], tr)
