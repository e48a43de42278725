"""Logarithmic range proofs and the inner-product reward proof.

The range proof follows the classic bit-decomposition design: commit to the
bit vectors of the value, reduce the three required constraints to a single
inner product via two verifier challenges, then compress the final vectors
with a log-round folding argument.  The reward proof binds a spend vector
(committed on the g-bases), a policy vector (committed on the h-bases) and
their inner product (on u) into one point and runs the same folding argument
on it, plus a range proof bounding the reward below the policy limit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

from .encoding import Reader, ser_points, ser_scalars, write_vec_len
from .groups import Curve, Point, msm
from .params import GeneratorSet
from .transcript import Transcript

__all__ = [
    "RangeParams",
    "RangeProof",
    "RewardProof",
    "IPAArgument",
    "prove_range",
    "verify_range",
    "prove_reward",
    "verify_reward",
    "ipa_prove",
    "ipa_verify",
    "spend_commitment",
    "policy_commitment",
    "reward_bases",
]


@dataclass(frozen=True)
class RangeParams:
    """Bit width for range statements and the reward limit (2**limit_bits)."""

    bits: int = 16
    limit_bits: int = 16

    def __post_init__(self):
        if self.bits < 1 or self.bits & (self.bits - 1):
            raise ValueError("bit width must be a positive power of two")

    @property
    def limit(self) -> int:
        return 1 << self.limit_bits


# ---------------------------------------------------------------------------
# Inner-product folding argument


@dataclass
class IPAArgument:
    L: List[Point]
    R: List[Point]
    a: int
    b: int

    def to_bytes(self, curve: Curve) -> bytes:
        if len(self.L) > 255:
            raise ValueError("too many folding rounds")
        return (
            bytes([len(self.L)])
            + ser_points(self.L)
            + ser_points(self.R)
            + ser_scalars(curve, [self.a, self.b])
        )

    @classmethod
    def from_bytes(cls, curve: Curve, data: bytes) -> "IPAArgument":
        r = Reader(data)
        arg = cls.read(curve, r)
        r.done()
        return arg

    @classmethod
    def read(cls, curve: Curve, r: Reader) -> "IPAArgument":
        rounds = r.take(1)[0]
        L = r.points(curve, rounds)
        R = r.points(curve, rounds)
        a = r.scalar(curve)
        b = r.scalar(curve)
        return cls(L, R, a, b)


def _inner(a: Sequence[int], b: Sequence[int], order: int) -> int:
    return sum(x * y for x, y in zip(a, b)) % order


def ipa_prove(a: List[int], b: List[int], g: List[Point], h: List[Point],
              u: Point, tr: Transcript) -> IPAArgument:
    """Prove <a, b> = c for P = sum a_i g_i + sum b_i h_i + c u.

    Vector length must be a power of two (callers zero-pad); length one means
    zero folding rounds and a direct terminal check.
    """
    order = u.curve.order
    n = len(a)
    if n == 0 or n & (n - 1) or len(b) != n or len(g) != n or len(h) != n:
        raise ValueError("inner-product vectors must share a power-of-two length")
    a = [x % order for x in a]
    b = [x % order for x in b]
    g = list(g)
    h = list(h)
    Ls: List[Point] = []
    Rs: List[Point] = []
    curve = u.curve
    while n > 1:
        n //= 2
        cl = _inner(a[:n], b[n:], order)
        cr = _inner(a[n:], b[:n], order)
        L = msm(list(zip(a[:n], g[n:])) + list(zip(b[n:], h[:n])) + [(cl, u)], curve)
        R = msm(list(zip(a[n:], g[:n])) + list(zip(b[:n], h[n:])) + [(cr, u)], curve)
        Ls.append(L)
        Rs.append(R)
        tr.absorb_point(b"ipa-L", L)
        tr.absorb_point(b"ipa-R", R)
        x = tr.challenge_scalar(b"ipa-x", order)
        xi = pow(x, -1, order)
        a = [(a[i] * x + a[n + i] * xi) % order for i in range(n)]
        b = [(b[i] * xi + b[n + i] * x) % order for i in range(n)]
        g = [msm([(xi, g[i]), (x, g[n + i])], curve) for i in range(n)]
        h = [msm([(x, h[i]), (xi, h[n + i])], curve) for i in range(n)]
    return IPAArgument(Ls, Rs, a[0], b[0])


def ipa_verify(P: Point, proof: IPAArgument, g: List[Point], h: List[Point],
               u: Point, tr: Transcript, h_scale: Optional[List[int]] = None) -> bool:
    """Single-pass verification: instead of folding the generator vectors
    round by round, accumulate each base's challenge product and check one
    multi-scalar relation over the original bases.

    ``h_scale`` optionally pre-multiplies the h-side coefficients, letting
    callers verify against implicitly rescaled h bases (the range proof's
    y-power twist) without materializing them.
    """
    order = u.curve.order
    curve = u.curve
    n = len(g)
    if n == 0 or n & (n - 1) or len(h) != n:
        return False
    rounds = n.bit_length() - 1
    if len(proof.L) != rounds or len(proof.R) != rounds:
        return False
    xs = []
    for L, R in zip(proof.L, proof.R):
        tr.absorb_point(b"ipa-L", L)
        tr.absorb_point(b"ipa-R", R)
        xs.append(tr.challenge_scalar(b"ipa-x", order))
    xinv = [pow(x, -1, order) for x in xs]
    # base i collects x_j when round j selected its half, x_j^-1 otherwise;
    # the h side uses the opposite pattern, i.e. the inverse product
    coeff = [1] * n
    for j, (x, xi) in enumerate(zip(xs, xinv)):
        half = 1 << (rounds - 1 - j)
        for i in range(n):
            coeff[i] = coeff[i] * (x if i & half else xi) % order
    a, b = proof.a % order, proof.b % order
    terms = [(a * coeff[i] % order, g[i]) for i in range(n)]
    if h_scale is None:
        terms += [(b * pow(coeff[i], -1, order) % order, h[i]) for i in range(n)]
    else:
        terms += [
            (b * pow(coeff[i], -1, order) % order * h_scale[i] % order, h[i])
            for i in range(n)
        ]
    terms.append((a * b % order, u))
    expect = msm(terms, curve)
    folded = [(1, P)]
    folded += [(x * x % order, L) for x, L in zip(xs, proof.L)]
    folded += [(xi * xi % order, R) for xi, R in zip(xinv, proof.R)]
    return msm(folded, curve) == expect


# ---------------------------------------------------------------------------
# Range proof


@dataclass
class RangeProof:
    V: Point
    A: Point
    S: Point
    T1: Point
    T2: Point
    tau_x: int
    mu: int
    t_hat: int
    ipa: IPAArgument

    def to_bytes(self) -> bytes:
        curve = self.V.curve
        return (
            ser_points([self.V, self.A, self.S, self.T1, self.T2])
            + ser_scalars(curve, [self.tau_x, self.mu, self.t_hat])
            + self.ipa.to_bytes(curve)
        )

    @classmethod
    def from_bytes(cls, curve: Curve, data: bytes) -> "RangeProof":
        r = Reader(data)
        proof = cls.read(curve, r)
        r.done()
        return proof

    @classmethod
    def read(cls, curve: Curve, r: Reader) -> "RangeProof":
        V, A, S, T1, T2 = r.points(curve, 5)
        tau_x, mu, t_hat = r.scalars(curve, 3)
        ipa = IPAArgument.read(curve, r)
        return cls(V, A, S, T1, T2, tau_x, mu, t_hat, ipa)

    @property
    def bits(self) -> int:
        return 1 << len(self.ipa.L)


def _range_bases(gens: GeneratorSet, bits: int) -> Tuple[List[Point], List[Point], Point]:
    g = gens.extended(bits, b"range-g")
    h = gens.extended(bits, b"range-h")
    u = gens.extended(1, b"range-u")[0]
    return g, h, u


def prove_range(value: int, gamma: int, params: RangeParams, gens: GeneratorSet,
                tr: Transcript, rng, value_base: Point = None,
                _forced_bits: Sequence[int] = None) -> RangeProof:
    """Prove value in [0, 2^bits) for V = value * B + gamma * H.

    ``value_base`` defaults to the generator set's base point; protocol users
    pass a message-slot generator so V lines up with a commitment slot.
    ``_forced_bits`` lets adversarial tests install an inconsistent bit
    decomposition; honest callers never touch it.
    """
    n = params.bits
    if _forced_bits is None and not 0 <= value < (1 << n):
        raise ValueError(f"value out of range [0, 2^{n})")
    B = value_base if value_base is not None else gens.base
    H = gens.blind
    curve = B.curve
    order = curve.order
    g, h, u = _range_bases(gens, n)
    value %= order
    gamma %= order
    V = msm([(value, B), (gamma, H)], curve)
    aL = list(_forced_bits) if _forced_bits is not None else [
        (value >> i) & 1 for i in range(n)
    ]
    aR = [(x - 1) % order for x in aL]
    alpha = rng.randrange(1, order)
    A = msm([(alpha, H)] + list(zip(aL, g)) + list(zip(aR, h)), curve)
    sL = [rng.randrange(1, order) for _ in range(n)]
    sR = [rng.randrange(1, order) for _ in range(n)]
    rho = rng.randrange(1, order)
    S = msm([(rho, H)] + list(zip(sL, g)) + list(zip(sR, h)), curve)
    tr.absorb(b"proof", b"pi-range")
    tr.absorb_scalar(b"bits", n, 2)
    tr.absorb_point(b"B", B)
    tr.absorb_point(b"V", V)
    tr.absorb_point(b"A", A)
    tr.absorb_point(b"S", S)
    y = tr.challenge_scalar(b"y", order)
    z = tr.challenge_scalar(b"z", order)
    ypow = _powers(y, n, order)
    two = _powers(2, n, order)
    l0 = [(aL[i] - z) % order for i in range(n)]
    l1 = sL
    r0 = [(ypow[i] * (aR[i] + z) + z * z % order * two[i]) % order for i in range(n)]
    r1 = [ypow[i] * sR[i] % order for i in range(n)]
    t1 = (_inner(l0, r1, order) + _inner(l1, r0, order)) % order
    t2 = _inner(l1, r1, order)
    tau1 = rng.randrange(1, order)
    tau2 = rng.randrange(1, order)
    T1 = msm([(t1, B), (tau1, H)], curve)
    T2 = msm([(t2, B), (tau2, H)], curve)
    tr.absorb_point(b"T1", T1)
    tr.absorb_point(b"T2", T2)
    x = tr.challenge_scalar(b"x", order)
    lvec = [(l0[i] + l1[i] * x) % order for i in range(n)]
    rvec = [(r0[i] + r1[i] * x) % order for i in range(n)]
    t_hat = _inner(lvec, rvec, order)
    tau_x = (tau2 * x * x + tau1 * x + z * z % order * gamma) % order
    mu = (alpha + rho * x) % order
    tr.absorb_scalar(b"tau_x", tau_x, curve.scalar_bytes)
    tr.absorb_scalar(b"mu", mu, curve.scalar_bytes)
    tr.absorb_scalar(b"t_hat", t_hat, curve.scalar_bytes)
    w = tr.challenge_scalar(b"w", order)
    U = w * u
    hprime = [msm([(pow(y, -(i), order) if i else 1, h[i])], curve) for i in range(n)]
    ipa = ipa_prove(lvec, rvec, g, hprime, U, tr)
    return RangeProof(V, A, S, T1, T2, tau_x, mu, t_hat, ipa)


def verify_range(proof: RangeProof, params: RangeParams, gens: GeneratorSet,
                 tr: Transcript, value_base: Point = None) -> bool:
    n = params.bits
    if proof.bits != n:
        return False
    B = value_base if value_base is not None else gens.base
    H = gens.blind
    curve = B.curve
    order = curve.order
    g, h, u = _range_bases(gens, n)
    tr.absorb(b"proof", b"pi-range")
    tr.absorb_scalar(b"bits", n, 2)
    tr.absorb_point(b"B", B)
    tr.absorb_point(b"V", proof.V)
    tr.absorb_point(b"A", proof.A)
    tr.absorb_point(b"S", proof.S)
    y = tr.challenge_scalar(b"y", order)
    z = tr.challenge_scalar(b"z", order)
    tr.absorb_point(b"T1", proof.T1)
    tr.absorb_point(b"T2", proof.T2)
    x = tr.challenge_scalar(b"x", order)
    ypow = _powers(y, n, order)
    two = _powers(2, n, order)
    zsq = z * z % order
    delta = ((z - zsq) * sum(ypow) - zsq * z % order * sum(two)) % order
    lhs = msm([(proof.t_hat, B), (proof.tau_x, H)], curve)
    rhs = msm(
        [(zsq, proof.V), (delta, B), (x, proof.T1), (x * x % order, proof.T2)], curve
    )
    if lhs != rhs:
        return False
    tr.absorb_scalar(b"tau_x", proof.tau_x, curve.scalar_bytes)
    tr.absorb_scalar(b"mu", proof.mu, curve.scalar_bytes)
    tr.absorb_scalar(b"t_hat", proof.t_hat, curve.scalar_bytes)
    w = tr.challenge_scalar(b"w", order)
    U = w * u
    # the argument runs over h'_i = y^-i h_i; fold the y powers into the
    # coefficients so every multi-scalar term stays on the fixed bases
    yinv = pow(y, -1, order)
    yinv_pow = _powers(yinv, n, order)
    # P = A + xS - z*sum(g) + sum((z*y^i + z^2*2^i) h'_i) - mu*H + t_hat*U
    terms = [(1, proof.A), (x, proof.S), ((order - proof.mu) % order, H),
             (proof.t_hat, U)]
    terms += [((order - z) % order, gi) for gi in g]
    terms += [
        ((z * ypow[i] + zsq * two[i]) % order * yinv_pow[i] % order, h[i])
        for i in range(n)
    ]
    P = msm(terms, curve)
    return ipa_verify(P, proof.ipa, g, h, U, tr, h_scale=yinv_pow)


def _powers(base: int, n: int, order: int) -> List[int]:
    out = [1] * n
    for i in range(1, n):
        out[i] = out[i - 1] * base % order
    return out


# ---------------------------------------------------------------------------
# Reward proof: reward = <spend, policy>, committed as
# P = sum spend_i g_i + sum policy_i h_i + reward * u, with a range proof
# keeping the reward below the policy limit.


def _pad_pow2(vec: Sequence[int]) -> List[int]:
    out = list(vec)
    n = 1
    while n < len(out):
        n *= 2
    out += [0] * (n - len(out))
    return out


def reward_bases(gens: GeneratorSet, n: int) -> Tuple[List[Point], List[Point], Point]:
    g = gens.extended(n, b"reward-g")
    h = gens.extended(n, b"reward-h")
    u = gens.extended(1, b"reward-u")[0]
    return g, h, u


def spend_commitment(spend: Sequence[int], gens: GeneratorSet) -> Point:
    vec = _pad_pow2(spend)
    g, _, _ = reward_bases(gens, len(vec))
    return msm(list(zip(vec, g)), gens.curve)


def policy_commitment(policy: Sequence[int], gens: GeneratorSet) -> Point:
    vec = _pad_pow2(policy)
    _, h, _ = reward_bases(gens, len(vec))
    return msm(list(zip(vec, h)), gens.curve)


@dataclass
class RewardProof:
    n: int                 # padded catalogue size
    ipa: IPAArgument
    range_proof: RangeProof

    def to_bytes(self) -> bytes:
        curve = self.range_proof.V.curve
        return (
            write_vec_len(self.n)
            + self.ipa.to_bytes(curve)
            + self.range_proof.to_bytes()
        )

    @classmethod
    def from_bytes(cls, curve: Curve, data: bytes) -> "RewardProof":
        r = Reader(data)
        proof = cls.read(curve, r)
        r.done()
        return proof

    @classmethod
    def read(cls, curve: Curve, r: Reader) -> "RewardProof":
        n = r.vec_len()
        ipa = IPAArgument.read(curve, r)
        range_proof = RangeProof.read(curve, r)
        return cls(n, ipa, range_proof)

    def linear_part_size(self) -> int:
        """Serialized size of the folding argument (grows with the catalogue)."""
        curve = self.range_proof.V.curve
        return len(self.ipa.to_bytes(curve))

    def range_part_size(self) -> int:
        return len(self.range_proof.to_bytes())


def prove_reward(spend: Sequence[int], policy: Sequence[int], params: RangeParams,
                 gens: GeneratorSet, tr: Transcript, rng) -> Tuple[int, RewardProof]:
    """Compute reward = <spend, policy> and prove it; refuses when the reward
    reaches the policy limit or the vectors disagree in length."""
    if len(spend) != len(policy):
        raise ValueError("spend and policy vectors must have equal length")
    order = gens.curve.order
    a = _pad_pow2(spend)
    b = _pad_pow2(policy)
    n = len(a)
    reward = _inner(a, b, order)
    if reward >= params.limit:
        raise ValueError("reward exceeds the policy limit")
    g, h, u = reward_bases(gens, n)
    tr.absorb(b"proof", b"pi-reward")
    tr.absorb_scalar(b"n", n, 2)
    A = msm(list(zip(a, g)), gens.curve)
    Bc = msm(list(zip(b, h)), gens.curve)
    P = A + Bc + msm([(reward, u)], gens.curve)
    tr.absorb_point(b"P", P)
    tr.absorb_scalar(b"reward", reward, gens.curve.scalar_bytes)
    ipa = ipa_prove(a, b, g, h, u, tr)
    range_params = RangeParams(bits=_range_width(params), limit_bits=params.limit_bits)
    rproof = prove_range(reward, 0, range_params, gens, tr, rng)
    return reward, RewardProof(n, ipa, rproof)


def verify_reward(reward: int, spend_comm: Point, policy_comm: Point,
                  proof: RewardProof, params: RangeParams, gens: GeneratorSet,
                  tr: Transcript) -> bool:
    order = gens.curve.order
    n = proof.n
    if n < 1 or n & (n - 1):
        return False
    if not 0 <= reward < params.limit:
        return False
    g, h, u = reward_bases(gens, n)
    tr.absorb(b"proof", b"pi-reward")
    tr.absorb_scalar(b"n", n, 2)
    P = spend_comm + policy_comm + msm([(reward % order, u)], gens.curve)
    tr.absorb_point(b"P", P)
    tr.absorb_scalar(b"reward", reward, gens.curve.scalar_bytes)
    if not ipa_verify(P, proof.ipa, g, h, u, tr):
        return False
    range_params = RangeParams(bits=_range_width(params), limit_bits=params.limit_bits)
    if proof.range_proof.V != msm([(reward % order, gens.base)], gens.curve):
        return False
    return verify_range(proof.range_proof, range_params, gens, tr)


def _range_width(params: RangeParams) -> int:
    width = 1
    while width < params.limit_bits:
        width *= 2
    return width
