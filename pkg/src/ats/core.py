"""Accumulation-token protocol: setup, issuance, collection, spending with
optional reward verification, and double-spending detection.

The client and the issuer (one process wearing the issuer/accumulator/
verifier hats, sharing one key pair) exchange the messages below.  Message
builders and handlers are split per protocol move so the same logic drives
both in-process tests and the framed network transport.

Token layout: a token is (serial, balance, client key, position) committed
into message slots 1..4 of a Pedersen multi-commitment on E1, with the
token's double-spend randomness r1 as the commitment blinding.  Balance
updates ride on the homomorphism: the issuer adds (or subtracts for spends)
its own share commitment, so neither side ever reveals the token contents.

Every interaction leaves a double-spend tag (tag, serial, r2) with
tag = sk*r2 + r1: one honest use per serial reveals nothing, while two uses
with distinct r2 let anyone solve for sk and flag the culprit's public key.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

from . import acl
from .curvetree import (
    CurveTree,
    CurveTreeParams,
    MembershipProof,
    build,
    prove_membership,
    replace_leaf,
    verify_membership,
)
from .groups import Point, msm
from .params import CycleParams, GeneratorSet
from .pedersen import Opening, commit
from .rangeproof import (
    RangeParams,
    RangeProof,
    RewardProof,
    policy_commitment,
    prove_range,
    prove_reward,
    spend_commitment,
    verify_range,
    verify_reward,
)
from .sigma import (
    AddMulProof,
    IssueProof,
    OpenProof,
    prove_add_mul,
    prove_issue,
    prove_open,
    verify_add_mul,
    verify_issue,
    verify_open,
)
from .transcript import Transcript

log = logging.getLogger("ats")

__all__ = [
    "Token",
    "DTag",
    "DTagDB",
    "SpendRecord",
    "ClientState",
    "IssuerState",
    "ProtocolAbort",
    "OverspendError",
    "StateError",
    "setup",
    "run_issuance",
    "run_collection",
    "run_spend",
    "detect_double_spend",
    "token_cap_check",
    "DEFAULT_TOKEN_CAP",
    "DEFAULT_POLICY",
]

DEFAULT_TOKEN_CAP = 100
DEFAULT_POLICY = [3, 5, 2, 3, 3, 2]


class ProtocolAbort(Exception):
    """A verification step failed; the session is dead."""


class OverspendError(ValueError):
    """The requested spend exceeds the token's balance."""


class StateError(ValueError):
    """Local state does not allow the requested operation."""


# ---------------------------------------------------------------------------
# Data model


@dataclass
class Token:
    serial: int      # ID, jointly randomized with the issuer
    balance: int     # v
    sk: int          # the client's long-term secret
    r1: int          # double-spend randomness; doubles as commitment blinding
    position: int    # j, the slot in the client's state vector

    def opening(self) -> Opening:
        return Opening([self.serial, self.balance, self.sk, self.position], self.r1)


@dataclass(frozen=True)
class DTag:
    tag: int
    serial: int
    r2: int


class DTagDB:
    """Append-only double-spend tag store, optionally mirrored to a binary
    log file (fixed-width records: serial | tag | r2)."""

    def __init__(self, scalar_width: int, path: Optional[str] = None):
        self.scalar_width = scalar_width
        self.records: List[DTag] = []
        self._by_serial: Dict[int, List[int]] = {}
        self.path = path
        self._fh = None
        if path is not None:
            self._fh = open(path, "ab")

    def insert(self, dtag: DTag) -> List[DTag]:
        """Append and return previously stored tags with the same serial."""
        prior = [self.records[i] for i in self._by_serial.get(dtag.serial, [])]
        self._by_serial.setdefault(dtag.serial, []).append(len(self.records))
        self.records.append(dtag)
        if self._fh is not None:
            w = self.scalar_width
            self._fh.write(
                dtag.serial.to_bytes(w, "big")
                + dtag.tag.to_bytes(w, "big")
                + dtag.r2.to_bytes(w, "big")
            )
            self._fh.flush()
        return prior

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    @classmethod
    def load(cls, path: str, scalar_width: int) -> "DTagDB":
        db = cls(scalar_width)
        rec = 3 * scalar_width
        with open(path, "rb") as fh:
            blob = fh.read()
        if len(blob) % rec:
            raise ValueError("truncated double-spend log")
        for off in range(0, len(blob), rec):
            w = scalar_width
            serial = int.from_bytes(blob[off : off + w], "big")
            tag = int.from_bytes(blob[off + w : off + 2 * w], "big")
            r2 = int.from_bytes(blob[off + 2 * w : off + 3 * w], "big")
            db.insert(DTag(tag, serial, r2))
        return db


@dataclass
class SpendRecord:
    spend: List[int]
    policy: List[int]
    reward: int


# ---------------------------------------------------------------------------
# Party state


def _tree_shape(n: int) -> Tuple[int, int]:
    """Depth and branching for n tokens: single-token states use the minimal
    (1, 1) tree; larger states use branching 32."""
    if n <= 1:
        return 1, 1
    ell = 32
    depth = 1
    cap = ell
    while cap < n:
        depth += 1
        cap *= ell
    return depth, ell


class ClientState:
    def __init__(self, cycle: CycleParams, n: int, issuer_pub: acl.SignerKeys, rng,
                 tree_params: Optional[CurveTreeParams] = None):
        if n < 1:
            raise ValueError("token count must be >= 1")
        self.cycle = cycle
        self.gens: GeneratorSet = cycle.g1
        order = cycle.e1.order
        self.issuer_pub = issuer_pub
        self.sk = rng.randrange(1, order)
        self.pk = self.sk * self.gens.base
        self.n = n
        self.reward_params = RangeParams()
        if tree_params is None:
            depth, ell = _tree_shape(n)
            tree_params = CurveTreeParams(depth, ell, cycle)
        self.tree_params = tree_params
        self.tokens: List[Token] = []
        self.comm_state: List[Point] = []
        self.sig_state: List[Optional[Tuple[acl.BlindSignature, acl.SigOpening]]] = []
        for j in range(n):
            token = Token(
                serial=rng.randrange(order),
                balance=0,
                sk=self.sk,
                r1=rng.randrange(1, order),
                position=j,
            )
            self.tokens.append(token)
            self.comm_state.append(self._commit(token))
            self.sig_state.append(None)
        self.tree: CurveTree = build(self.comm_state, tree_params)
        self.pending: Dict[int, dict] = {}

    def _commit(self, token: Token) -> Point:
        return commit(
            token.opening().messages, token.r1, self.gens.gens, self.gens.blind
        )

    def signed(self, j: int) -> bool:
        return self.sig_state[j] is not None

    def signed_count(self) -> int:
        return sum(1 for s in self.sig_state if s is not None)

    def root(self) -> Point:
        return self.tree.root

    def _replace(self, j: int, token: Token, commitment: Point):
        self.tokens[j] = token
        self.comm_state[j] = commitment
        self.tree = replace_leaf(self.tree, j, commitment)

    def snapshot(self) -> "ClientState":
        """Deep copy (used by adversarial replay tests)."""
        return copy.deepcopy(self)


class IssuerState:
    """One process playing issuer, accumulator, and verifier under a single
    long-term key pair."""

    def __init__(self, cycle: CycleParams, rng,
                 policy: Optional[Sequence[int]] = None,
                 token_cap: int = DEFAULT_TOKEN_CAP,
                 reward_params: Optional[RangeParams] = None,
                 dtag_path: Optional[str] = None):
        self.cycle = cycle
        self.gens: GeneratorSet = cycle.g1
        self.keys = acl.keygen(self.gens, rng)
        self.dtags = DTagDB(cycle.e1.scalar_bytes, dtag_path)
        self.known_roots: Set[bytes] = set()
        self.issued_counts: Dict[bytes, int] = {}
        self.token_cap = token_cap
        self.policy: List[int] = list(policy) if policy is not None else list(DEFAULT_POLICY)
        self.reward_params = reward_params or RangeParams()
        self.detections: List[Tuple[Point, OpenProof]] = []
        self.rate_limiter = None  # hook: callable(pk_bytes) -> bool, None = allow

    def public(self) -> acl.SignerKeys:
        return self.keys.public()

    def record_root(self, root: Point):
        self.known_roots.add(root.encode())

    def _check_rate(self, pk_bytes: bytes):
        if self.rate_limiter is not None and not self.rate_limiter(pk_bytes):
            raise ProtocolAbort("rate limit exceeded")

    def _note_detection(self, prior: List[DTag], dtag: DTag):
        hits = _extract_culprits(prior + [dtag], self.gens)
        self.detections.extend(hits)


def setup(n: int, cycle: CycleParams, rng,
          policy: Optional[Sequence[int]] = None) -> Tuple[ClientState, IssuerState]:
    """Fresh issuer and a client with n zero-balance unsigned tokens."""
    issuer = IssuerState(cycle, rng, policy=policy)
    client = ClientState(cycle, n, issuer.public(), rng)
    return client, issuer


def token_cap_check(client: ClientState, cap: int = DEFAULT_TOKEN_CAP) -> bool:
    """Reject interactions once the held signed-token count exceeds the cap."""
    return client.signed_count() <= cap


# ---------------------------------------------------------------------------
# Issuance (4 moves)


@dataclass
class IssuanceM1:
    pk: Point
    c_prime: Point
    proof: IssueProof


@dataclass
class IssuanceM2:
    c_joint: Point
    id_share: int
    R: acl.SignerCommitMessage


@dataclass
class IssuanceM3:
    e: int
    new_root: Point


@dataclass
class IssuanceM4:
    S: acl.SignerResponse


@dataclass
class IssuerSession:
    procedure: str
    transcript: Transcript
    r2: int = 0
    amount: int = 0
    acl_state: Optional[acl.SignerCommitState] = None
    pk_bytes: bytes = b""
    reward: int = 0
    stage: str = "new"


def _session_transcript(label: bytes, cycle: CycleParams, session_id: bytes) -> Transcript:
    return Transcript(label, cycle.digest() + session_id)


def issuance_m1(client: ClientState, j: int, rng, session_id: bytes) -> IssuanceM1:
    if client.signed(j):
        raise StateError(f"slot {j} already holds a signed token")
    token = client.tokens[j]
    if token.balance != 0:
        # an honest client never gets here; the dishonest path still emits a
        # proof, which the issuer's equations then reject
        log.warning("issuing a token with nonzero balance; issuer will reject")
    c_prime = client.comm_state[j]
    tr = _session_transcript(b"ats-issue", client.cycle, session_id)
    tr.absorb_point(b"pk", client.pk)
    proof = prove_issue(
        token.opening(), c_prime, client.pk, client.gens.base,
        client.gens.gens, client.gens.blind, tr, rng,
    )
    client.pending[j] = {"procedure": "issue", "session_id": session_id}
    return IssuanceM1(client.pk, c_prime, proof)


def issuance_m2(issuer: IssuerState, m1: IssuanceM1, session: IssuerSession,
                rng) -> IssuanceM2:
    pk_bytes = m1.pk.encode()
    issuer._check_rate(pk_bytes)
    count = issuer.issued_counts.get(pk_bytes, 0)
    if count >= issuer.token_cap:
        raise ProtocolAbort("token cap reached for this client key")
    tr = session.transcript
    tr.absorb_point(b"pk", m1.pk)
    gens = issuer.gens
    if not verify_issue(m1.proof, m1.c_prime, m1.pk, gens.base, gens.gens,
                        gens.blind, tr):
        raise ProtocolAbort("issuance proof rejected")
    order = issuer.cycle.e1.order
    id_share = rng.randrange(order)
    c_issuer = commit([id_share], 0, gens.gens, gens.blind)  # slot 1 only
    c_joint = m1.c_prime + c_issuer
    session.acl_state, R = acl.signer_commit(issuer.keys, c_joint, rng)
    session.pk_bytes = pk_bytes
    session.stage = "committed"
    issuer.issued_counts[pk_bytes] = count + 1
    return IssuanceM2(c_joint, id_share, R)


def issuance_m3(client: ClientState, j: int, m2: IssuanceM2, rng) -> IssuanceM3:
    pend = client.pending.get(j)
    if not pend or pend["procedure"] != "issue":
        raise StateError("no issuance in flight for this slot")
    token = client.tokens[j]
    order = client.cycle.e1.order
    gens = client.gens
    expected = client.comm_state[j] + commit([m2.id_share], 0, gens.gens, gens.blind)
    if m2.c_joint != expected:
        raise ProtocolAbort("issuer commitment does not match the homomorphic sum")
    new_token = Token(
        serial=(token.serial + m2.id_share) % order,
        balance=token.balance,
        sk=token.sk,
        r1=token.r1,
        position=j,
    )
    m_bytes = new_token.serial.to_bytes(client.cycle.e1.scalar_bytes, "big")
    ustate, e = acl.user_challenge(client.issuer_pub, m2.c_joint,
                                   m2.R, m_bytes, rng)
    pend.update(token=new_token, commitment=m2.c_joint, acl_state=ustate)
    # the new root only depends on commitments, so it is announced before the
    # signature lands
    new_tree = replace_leaf(client.tree, j, m2.c_joint)
    pend["tree"] = new_tree
    return IssuanceM3(e, new_tree.root)


def issuance_m4(issuer: IssuerState, m3: IssuanceM3, session: IssuerSession) -> IssuanceM4:
    if session.stage != "committed" or session.acl_state is None:
        raise ProtocolAbort("issuance session out of order")
    S = acl.signer_respond(issuer.keys, session.acl_state, m3.e)
    issuer.record_root(m3.new_root)
    session.stage = "done"
    return IssuanceM4(S)


def issuance_finish(client: ClientState, j: int, m4: IssuanceM4):
    pend = client.pending.pop(j, None)
    if not pend or "acl_state" not in pend:
        raise StateError("no issuance awaiting a signature")
    sig, opening = acl.user_finish(client.issuer_pub, pend["acl_state"], m4.S)
    client.tokens[j] = pend["token"]
    client.comm_state[j] = pend["commitment"]
    client.tree = pend["tree"]
    client.sig_state[j] = (sig, opening)


def run_issuance(client: ClientState, issuer: IssuerState, j: int, rng,
                 session_id: bytes = None):
    session_id = session_id or _rand_session(rng)
    session = IssuerSession(
        "issue", _session_transcript(b"ats-issue", issuer.cycle, session_id)
    )
    m1 = issuance_m1(client, j, rng, session_id)
    m2 = issuance_m2(issuer, m1, session, rng)
    m3 = issuance_m3(client, j, m2, rng)
    m4 = issuance_m4(issuer, m3, session)
    issuance_finish(client, j, m4)


def _rand_session(rng) -> bytes:
    return bytes(rng.randrange(256) for _ in range(16))


# ---------------------------------------------------------------------------
# Collection and spending (5 moves); spending adds the range proof and the
# balance decrement, and optionally the reward proof.


@dataclass
class CollectM1:
    r2: int


@dataclass
class CollectM2:
    root: Point
    c_star: Point
    membership: MembershipProof
    c_prime: Point
    tag: int
    cur_serial: int
    amount: int
    sigma: acl.BlindSignature
    show: acl.ShowBundle
    open_new: OpenProof
    bind_old: OpenProof
    persist: OpenProof
    add_mul: AddMulProof
    rho5: int
    # spend-only extras
    catalogue_slot: int = 0
    range_v: Optional[RangeProof] = None
    bind_range: Optional[OpenProof] = None


@dataclass
class CollectM3:
    c_joint: Point
    id_share: int
    R: acl.SignerCommitMessage
    reward: int = 0
    policy_comm: Optional[Point] = None
    reward_proof: Optional[RewardProof] = None


@dataclass
class CollectM4:
    e: int
    new_root: Point


@dataclass
class CollectM5:
    S: acl.SignerResponse


def collect_m1(issuer: IssuerState, session: IssuerSession, rng) -> CollectM1:
    session.r2 = rng.randrange(1, issuer.cycle.e1.order)
    session.stage = "r2-sent"
    return CollectM1(session.r2)


def _prove_update_bundle(client: ClientState, j: int, r2: int, tr: Transcript,
                         rng) -> Tuple[dict, CollectM2]:
    """Everything common to collection and spending message 2."""
    if not client.signed(j):
        raise StateError(f"slot {j} holds no signed token")
    token = client.tokens[j]
    gens = client.gens
    order = client.cycle.e1.order
    tag = (token.sk * r2 + token.r1) % order

    c_star, membership, delta = prove_membership(client.tree, j, tr, rng)

    new_token = Token(
        serial=rng.randrange(order),
        balance=token.balance,
        sk=token.sk,
        r1=rng.randrange(1, order),
        position=j,
    )
    c_prime = commit(new_token.opening().messages, new_token.r1, gens.gens, gens.blind)

    tr.absorb_scalar(b"tag", tag, client.cycle.e1.scalar_bytes)
    tr.absorb_scalar(b"serial", token.serial, client.cycle.e1.scalar_bytes)
    tr.absorb_scalar(b"r2", r2, client.cycle.e1.scalar_bytes)
    tr.absorb_point(b"c-prime", c_prime)

    # knowledge of the new token's full opening
    open_new = prove_open(new_token.opening(), c_prime, gens.gens[:4], gens.blind,
                          tr, rng)
    # the rerandomized leaf opens to (serial, w, sk, j): subtracting the
    # public serial from slot 1 leaves a 3-slot opening
    d_old = c_star - token.serial * gens.gens[0]
    bind_old = prove_open(
        Opening([token.balance, token.sk, token.position], (token.r1 + delta) % order),
        d_old, gens.gens[1:4], gens.blind, tr, rng,
    )
    # old-minus-new differs only in slot 1 and blinding: balance, key and
    # position carry over unchanged
    d_persist = d_old - c_prime
    persist = prove_open(
        Opening([(-new_token.serial) % order],
                (token.r1 + delta - new_token.r1) % order),
        d_persist, gens.gens[:1], gens.blind, tr, rng,
    )
    # tag structure: tag = sk * r2 + r1 with r2 public (commitment blinding 0)
    # and the tag commitment blinding revealed so the verifier can pin both
    r3 = rng.randrange(1, order)
    r4 = rng.randrange(1, order)
    add_mul = prove_add_mul(token.sk, r2, token.r1, [rng.randrange(1, order), 0, r3, r4],
                            gens.base, gens.blind, tr, rng)
    rho5 = (r4 + r3) % order

    sigma, sig_opening = client.sig_state[j]
    tr.absorb(b"sigma", sigma.to_bytes())
    show = acl.show_gen(client.issuer_pub, sigma, sig_opening,
                        token.opening().messages, token.r1, set(), rng, tr=tr)

    m2 = CollectM2(
        root=client.tree.root,
        c_star=c_star,
        membership=membership,
        c_prime=c_prime,
        tag=tag,
        cur_serial=token.serial,
        amount=0,
        sigma=sigma,
        show=show,
        open_new=open_new,
        bind_old=bind_old,
        persist=persist,
        add_mul=add_mul,
        rho5=rho5,
    )
    return {"token": new_token, "c_prime": c_prime}, m2


def collect_m2(client: ClientState, j: int, amount: int, m1: CollectM1, rng,
               session_id: bytes) -> CollectM2:
    tr = _session_transcript(b"ats-collect", client.cycle, session_id)
    pend, m2 = _prove_update_bundle(client, j, m1.r2, tr, rng)
    amount %= client.cycle.e1.order
    m2.amount = amount
    pend.update(procedure="collect", session_id=session_id, slot=j, amount=amount)
    client.pending[j] = pend
    return m2


def _verify_update_bundle(issuer: IssuerState, m2: CollectM2, r2: int,
                          tr: Transcript, spend: bool) -> None:
    gens = issuer.gens
    cycle = issuer.cycle
    order = cycle.e1.order
    width = cycle.e1.scalar_bytes
    if m2.root.encode() not in issuer.known_roots:
        raise ProtocolAbort("membership proof targets an unknown tree root")
    if not m2.membership.levels:
        raise ProtocolAbort("empty membership proof")
    params = CurveTreeParams(
        len(m2.membership.levels), len(m2.membership.levels[0].children), cycle
    )
    if not verify_membership(m2.root, m2.c_star, m2.membership, params, tr):
        raise ProtocolAbort("tree membership proof rejected")

    tr.absorb_scalar(b"tag", m2.tag, width)
    tr.absorb_scalar(b"serial", m2.cur_serial, width)
    tr.absorb_scalar(b"r2", r2, width)
    tr.absorb_point(b"c-prime", m2.c_prime)

    if not verify_open(m2.open_new, m2.c_prime, gens.gens[:4], gens.blind, tr):
        raise ProtocolAbort("opening proof for the refreshed token rejected")
    d_old = m2.c_star - m2.cur_serial * gens.gens[0]
    if not verify_open(m2.bind_old, d_old, gens.gens[1:4], gens.blind, tr):
        raise ProtocolAbort("serial binding proof for the shown token rejected")
    d_persist = d_old - m2.c_prime
    if not verify_open(m2.persist, d_persist, gens.gens[:1], gens.blind, tr):
        raise ProtocolAbort("carry-over proof rejected (balance/key/position)")

    # the tag relation: C2 must pin the issuer's r2 (blinding zero) and C5
    # the public tag under the revealed blinding
    if m2.add_mul.commits[1] != msm([(r2, gens.base)], cycle.e1):
        raise ProtocolAbort("tag proof does not bind the session randomness")
    expected_c5 = msm([(m2.tag, gens.base), (m2.rho5, gens.blind)], cycle.e1)
    if m2.add_mul.commits[4] != expected_c5:
        raise ProtocolAbort("tag proof does not bind the published tag")
    if not verify_add_mul(m2.add_mul, gens.base, gens.blind, tr):
        raise ProtocolAbort("tag structure proof rejected")

    tr.absorb(b"sigma", m2.sigma.to_bytes())
    m_bytes = m2.cur_serial.to_bytes(width, "big")
    if not acl.verify(issuer.keys, m2.sigma, m_bytes):
        raise ProtocolAbort("blind signature on the shown serial rejected")
    if not acl.show_verify(issuer.keys, m2.sigma, 4, {}, m2.show, tr=tr):
        raise ProtocolAbort("attribute showing for the shown token rejected")

    if spend:
        tr.absorb_scalar(b"amount", m2.amount, width)
        tr.absorb_scalar(b"cat-slot", m2.catalogue_slot, 2)
        if m2.range_v is None or m2.bind_range is None:
            raise ProtocolAbort("spend is missing its range proof")
        if not 0 <= m2.catalogue_slot < len(issuer.policy):
            raise ProtocolAbort("catalogue slot out of range")
        slot_gen = gens.gens[1]
        if not verify_range(m2.range_v, RangeParams(bits=m2.range_v.bits),
                            gens, tr, value_base=slot_gen):
            raise ProtocolAbort("balance range proof rejected")
        d_range = (m2.c_prime - m2.amount * slot_gen) - m2.range_v.V
        if not verify_open(m2.bind_range, d_range,
                           [gens.gens[0], gens.gens[2], gens.gens[3]],
                           gens.blind, tr):
            raise ProtocolAbort("range commitment is not bound to the token")


def collect_m3(issuer: IssuerState, m2: CollectM2, session: IssuerSession,
               rng, session_id: bytes, spend: bool = False,
               want_reward: bool = False) -> CollectM3:
    if session.stage != "r2-sent":
        raise ProtocolAbort("collection session out of order")
    label = _proc_label(spend, want_reward)
    tr = _session_transcript(label, issuer.cycle, session_id)
    _verify_update_bundle(issuer, m2, session.r2, tr, spend)

    prior = issuer.dtags.insert(DTag(m2.tag, m2.cur_serial, session.r2))
    if prior:
        issuer._note_detection(prior, DTag(m2.tag, m2.cur_serial, session.r2))

    order = issuer.cycle.e1.order
    gens = issuer.gens
    id_share = rng.randrange(order)
    amount = m2.amount % order
    c_issuer = commit([id_share, amount], 0, gens.gens, gens.blind)
    c_joint = m2.c_prime - c_issuer if spend else m2.c_prime + c_issuer
    session.acl_state, R = acl.signer_commit(issuer.keys, c_joint, rng)
    session.amount = amount
    session.stage = "committed"

    reward = 0
    policy_comm = None
    reward_proof = None
    if spend:
        sp = [0] * len(issuer.policy)
        sp[m2.catalogue_slot] = amount
        reward = sum(a * b for a, b in zip(sp, issuer.policy)) % order
        session.reward = reward
        if want_reward:
            rtr = _session_transcript(b"ats-reward", issuer.cycle, session_id)
            reward, reward_proof = prove_reward(
                sp, issuer.policy, issuer.reward_params, gens, rtr, rng
            )
            policy_comm = policy_commitment(issuer.policy, gens)
    return CollectM3(c_joint, id_share, R, reward, policy_comm, reward_proof)


def _proc_label(spend: bool, want_reward: bool) -> bytes:
    if not spend:
        return b"ats-collect"
    return b"ats-spend-verify" if want_reward else b"ats-spend"


def collect_m4(client: ClientState, j: int, m3: CollectM3, rng,
               spend: bool = False, want_reward: bool = False) -> CollectM4:
    pend = client.pending.get(j)
    if not pend or pend.get("procedure") not in ("collect", "spend"):
        raise StateError("no collection in flight for this slot")
    order = client.cycle.e1.order
    gens = client.gens
    token = pend["token"]
    amount = pend["amount"]
    c_issuer = commit([m3.id_share, amount], 0, gens.gens, gens.blind)
    expected = pend["c_prime"] - c_issuer if spend else pend["c_prime"] + c_issuer
    if m3.c_joint != expected:
        raise ProtocolAbort("issuer commitment does not match the homomorphic sum")

    if spend and want_reward:
        if m3.reward_proof is None or m3.policy_comm is None:
            raise ProtocolAbort("issuer did not attach the requested reward proof")
        sp = [0] * pend["catalogue_size"]
        sp[pend["catalogue_slot"]] = amount
        a_comm = spend_commitment(sp, gens)
        rtr = _session_transcript(b"ats-reward", client.cycle, pend["session_id"])
        if not verify_reward(m3.reward, a_comm, m3.policy_comm, m3.reward_proof,
                             client.reward_params, gens, rtr):
            raise ProtocolAbort("reward proof rejected")

    new_serial = (token.serial - m3.id_share) % order if spend \
        else (token.serial + m3.id_share) % order
    new_balance = (token.balance - amount) % order if spend \
        else (token.balance + amount) % order
    final = Token(new_serial, new_balance, token.sk, token.r1, token.position)
    m_bytes = final.serial.to_bytes(client.cycle.e1.scalar_bytes, "big")
    ustate, e = acl.user_challenge(client.issuer_pub, m3.c_joint, m3.R, m_bytes, rng)
    pend.update(token=final, commitment=m3.c_joint, acl_state=ustate,
                reward=m3.reward)
    new_tree = replace_leaf(client.tree, j, m3.c_joint)
    pend["tree"] = new_tree
    return CollectM4(e, new_tree.root)


def collect_m5(issuer: IssuerState, m4: CollectM4, session: IssuerSession) -> CollectM5:
    if session.stage != "committed" or session.acl_state is None:
        raise ProtocolAbort("collection session out of order")
    S = acl.signer_respond(issuer.keys, session.acl_state, m4.e)
    issuer.record_root(m4.new_root)
    session.stage = "done"
    return CollectM5(S)


def collect_finish(client: ClientState, j: int, m5: CollectM5):
    pend = client.pending.pop(j, None)
    if not pend or "acl_state" not in pend:
        raise StateError("no collection awaiting a signature")
    sig, opening = acl.user_finish(client.issuer_pub, pend["acl_state"], m5.S)
    client._replace(j, pend["token"], pend["commitment"])
    client.tree = pend["tree"]
    client.sig_state[j] = (sig, opening)


def run_collection(client: ClientState, issuer: IssuerState, j: int, amount: int,
                   rng, session_id: bytes = None):
    session_id = session_id or _rand_session(rng)
    session = IssuerSession("collect", None)
    m1 = collect_m1(issuer, session, rng)
    m2 = collect_m2(client, j, amount, m1, rng, session_id)
    m3 = collect_m3(issuer, m2, session, rng, session_id)
    m4 = collect_m4(client, j, m3, rng)
    m5 = collect_m5(issuer, m4, session)
    collect_finish(client, j, m5)


# ---------------------------------------------------------------------------
# Spending


def spend_m2(client: ClientState, j: int, amount: int, catalogue_slot: int,
             m1: CollectM1, rng, session_id: bytes, want_reward: bool = False,
             catalogue_size: int = None,
             _forge_out_of_range: bool = False) -> CollectM2:
    """Spend ``amount`` from slot j.  The range proof shows the remaining
    balance stays in the allowed interval; honest clients refuse overspends
    outright, and ``_forge_out_of_range`` (adversarial harness only) emits a
    doomed proof instead."""
    label = _proc_label(True, want_reward)
    tr = _session_transcript(label, client.cycle, session_id)
    pend, m2 = _prove_update_bundle(client, j, m1.r2, tr, rng)
    gens = client.gens
    order = client.cycle.e1.order
    width = client.cycle.e1.scalar_bytes
    token = client.tokens[j]
    amount %= order
    bits = client.reward_params.bits
    remaining = (token.balance - amount) % order
    forced_bits = None
    if not 0 <= (token.balance - amount) < (1 << bits):
        if not _forge_out_of_range:
            raise OverspendError(
                f"spend of {amount} exceeds balance {token.balance}"
            )
        forced_bits = [(remaining >> i) & 1 for i in range(bits)]

    m2.amount = amount
    m2.catalogue_slot = catalogue_slot
    tr.absorb_scalar(b"amount", amount, width)
    tr.absorb_scalar(b"cat-slot", catalogue_slot, 2)
    slot_gen = gens.gens[1]
    gamma_v = rng.randrange(1, order)
    m2.range_v = prove_range(remaining, gamma_v,
                             RangeParams(bits=bits), gens, tr, rng,
                             value_base=slot_gen, _forced_bits=forced_bits)
    new_token = pend["token"]
    d_range = (pend["c_prime"] - amount * slot_gen) - m2.range_v.V
    m2.bind_range = prove_open(
        Opening([new_token.serial, new_token.sk, new_token.position],
                (new_token.r1 - gamma_v) % order),
        d_range, [gens.gens[0], gens.gens[2], gens.gens[3]], gens.blind, tr, rng,
    )
    pend.update(procedure="spend", session_id=session_id, slot=j, amount=amount,
                catalogue_slot=catalogue_slot,
                catalogue_size=catalogue_size or len(DEFAULT_POLICY))
    client.pending[j] = pend
    return m2


def run_spend(client: ClientState, issuer: IssuerState, j: int, amount: int,
              rng, catalogue_slot: int = 0, want_reward: bool = False,
              session_id: bytes = None,
              _forge_out_of_range: bool = False) -> SpendRecord:
    session_id = session_id or _rand_session(rng)
    session = IssuerSession("spend", None)
    m1 = collect_m1(issuer, session, rng)
    m2 = spend_m2(client, j, amount, catalogue_slot, m1, rng, session_id,
                  want_reward=want_reward, catalogue_size=len(issuer.policy),
                  _forge_out_of_range=_forge_out_of_range)
    m3 = collect_m3(issuer, m2, session, rng, session_id, spend=True,
                    want_reward=want_reward)
    m4 = collect_m4(client, j, m3, rng, spend=True, want_reward=want_reward)
    m5 = collect_m5(issuer, m4, session)
    collect_finish(client, j, m5)
    sp = [0] * len(issuer.policy)
    sp[catalogue_slot] = amount
    return SpendRecord(sp, list(issuer.policy), m3.reward)


# ---------------------------------------------------------------------------
# Double-spend detection


def _extract_culprits(tags: Sequence[DTag], gens: GeneratorSet,
                      rng=None) -> List[Tuple[Point, OpenProof]]:
    import random as _random

    rng = rng or _random.Random(0x0D7A6)
    order = gens.curve.order
    out: List[Tuple[Point, OpenProof]] = []
    seen: Set[bytes] = set()
    by_serial: Dict[int, List[DTag]] = {}
    for t in tags:
        by_serial.setdefault(t.serial, []).append(t)
    for serial, group in by_serial.items():
        for i in range(len(group)):
            for k in range(i + 1, len(group)):
                a, b = group[i], group[k]
                if a.r2 == b.r2:
                    log.warning(
                        "duplicate serial %d with identical r2; cannot extract",
                        serial,
                    )
                    continue
                sk = (a.tag - b.tag) * pow((a.r2 - b.r2) % order, -1, order) % order
                pk = sk * gens.base
                enc = pk.encode()
                if enc in seen:
                    continue
                seen.add(enc)
                tr = Transcript(b"ats-detect", gens.curve.name.encode())
                proof = prove_open(Opening([sk], 0), pk, [gens.base], gens.blind,
                                   tr, rng)
                out.append((pk, proof))
    return out


def detect_double_spend(db: DTagDB, gens: GeneratorSet,
                        rng=None) -> List[Tuple[Point, OpenProof]]:
    """Scan the tag database: every serial reused with distinct session
    randomness yields the culprit's recovered public key plus a proof of
    knowledge of the matching secret.  Honest histories return []."""
    return _extract_culprits(list(db), gens, rng)


def verify_detection(pk: Point, proof: OpenProof, gens: GeneratorSet) -> bool:
    tr = Transcript(b"ats-detect", gens.curve.name.encode())
    return verify_open(proof, pk, [gens.base], gens.blind, tr)


# ---------------------------------------------------------------------------
# Persistence: client snapshots and the issuer's public-key file.  Both start
# with a magic and a version byte; scalars are fixed width per the cycle.

_SNAP_MAGIC = b"ATSC"
_PUB_MAGIC = b"ATSP"
_CYCLE_IDS = {"secp256k1/secq256k1": 1, "medium-28bit": 2}


def _cycle_by_id(tag: int) -> CycleParams:
    from . import params as _params

    if tag == 1:
        return _params.secp256k1_cycle()
    if tag == 2:
        return _params.medium_cycle()
    raise ValueError(f"unknown cycle id {tag}")


def _cycle_id(cycle: CycleParams) -> int:
    try:
        return _CYCLE_IDS[cycle.name]
    except KeyError:
        raise ValueError(
            f"cycle {cycle.name!r} has no stable id; snapshots support the "
            "named production and mid-size cycles"
        ) from None


def save_issuer_pub(keys: acl.SignerKeys, cycle: CycleParams, path: str):
    blob = _PUB_MAGIC + bytes([1, _cycle_id(cycle)])
    blob += keys.y.encode() + keys.h.encode() + keys.z.encode()
    with open(path, "wb") as fh:
        fh.write(blob)


def load_issuer_pub(path: str) -> Tuple[acl.SignerKeys, CycleParams]:
    from .encoding import Reader

    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _PUB_MAGIC or blob[4] != 1:
        raise ValueError("not an issuer public-key file")
    cycle = _cycle_by_id(blob[5])
    r = Reader(blob[6:])
    y = r.point(cycle.e1)
    h = r.point(cycle.e1)
    z = r.point(cycle.e1)
    r.done()
    return acl.SignerKeys(cycle.g1, None, y, h, z), cycle


def save_client(client: ClientState, path: str):
    from .encoding import ser_scalar

    e1 = client.cycle.e1
    w = e1.scalar_bytes
    out = [_SNAP_MAGIC, bytes([1, _cycle_id(client.cycle)])]
    out.append(client.n.to_bytes(4, "big"))
    out.append(bytes([client.tree_params.depth]))
    out.append(client.tree_params.branching.to_bytes(2, "big"))
    out.append(ser_scalar(e1, client.sk))
    out.append(client.issuer_pub.y.encode())
    out.append(client.issuer_pub.h.encode())
    out.append(client.issuer_pub.z.encode())
    for j in range(client.n):
        token = client.tokens[j]
        out.append(ser_scalar(e1, token.serial))
        out.append(ser_scalar(e1, token.balance))
        out.append(ser_scalar(e1, token.r1))
        out.append(client.comm_state[j].encode())
        entry = client.sig_state[j]
        if entry is None:
            out.append(b"\x00")
        else:
            sig, opening = entry
            out.append(b"\x01" + sig.to_bytes()
                       + ser_scalar(e1, opening.gamma)
                       + ser_scalar(e1, opening.rand))
    with open(path, "wb") as fh:
        fh.write(b"".join(out))


def load_client(path: str) -> ClientState:
    from .curvetree import CurveTreeParams as _CTP
    from .encoding import Reader

    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _SNAP_MAGIC or blob[4] != 1:
        raise ValueError("not a client snapshot file")
    cycle = _cycle_by_id(blob[5])
    e1 = cycle.e1
    r = Reader(blob[6:])
    n = r.uint(4)
    depth = r.take(1)[0]
    branching = r.uint(2)
    sk = r.scalar(e1)
    y = r.point(e1)
    h = r.point(e1)
    z = r.point(e1)
    issuer_pub = acl.SignerKeys(cycle.g1, None, y, h, z)

    client = ClientState.__new__(ClientState)
    client.cycle = cycle
    client.gens = cycle.g1
    client.issuer_pub = issuer_pub
    client.sk = sk
    client.pk = sk * cycle.g1.base
    client.n = n
    client.reward_params = RangeParams()
    client.tree_params = _CTP(depth, branching, cycle)
    client.tokens = []
    client.comm_state = []
    client.sig_state = []
    client.pending = {}
    for j in range(n):
        serial = r.scalar(e1)
        balance = r.scalar(e1)
        r1 = r.scalar(e1)
        client.tokens.append(Token(serial, balance, sk, r1, j))
        client.comm_state.append(r.point(e1))
        if r.take(1)[0]:
            sig = acl.BlindSignature.read(e1, r)
            gamma = r.scalar(e1)
            rand = r.scalar(e1)
            client.sig_state.append((sig, acl.SigOpening(gamma, rand)))
        else:
            client.sig_state.append(None)
    r.done()
    client.tree = build(client.comm_state, client.tree_params)
    return client
