"""Framed binary protocol between clients and the issuer.

Frame layout (big-endian):

    length   4 bytes   counts everything after this field
    version  1 byte    0x01
    proc     1 byte    0x01 issuance, 0x02 collection, 0x03 spend,
                       0x04 spend+verify, 0xFF error
    index    1 byte    0x00 session-open request, 0x01..0x05 = M1..M5
    session  16 bytes  client-chosen session id
    payload  variable  schema depends on (proc, index)

Frames above 1 MiB are rejected before allocation.  Error frames carry a
2-byte code plus a UTF-8 reason.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional, Tuple

from . import acl, core
from .curvetree import MembershipProof
from .encoding import Reader, ser_scalar
from .groups import Point, point_encode
from .params import CycleParams
from .rangeproof import RangeProof, RewardProof
from .sigma import AddMulProof, IssueProof, OpenProof

__all__ = [
    "Frame",
    "FrameError",
    "VERSION",
    "PROC_ISSUE",
    "PROC_COLLECT",
    "PROC_SPEND",
    "PROC_SPEND_VERIFY",
    "PROC_ERROR",
    "MAX_FRAME",
    "encode_frame",
    "read_frame",
    "decode_frame",
    "encode_payload",
    "decode_payload",
    "error_frame",
]

VERSION = 0x01
PROC_ISSUE = 0x01
PROC_COLLECT = 0x02
PROC_SPEND = 0x03
PROC_SPEND_VERIFY = 0x04
PROC_ERROR = 0xFF
MAX_FRAME = 1 << 20

ERR_BAD_VERSION = 1
ERR_BAD_FRAME = 2
ERR_PROTOCOL = 3
ERR_STATE = 4
ERR_INTERNAL = 5


class FrameError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class Frame:
    procedure: int
    index: int
    session: bytes
    payload: bytes

    def encode(self) -> bytes:
        return encode_frame(self.procedure, self.index, self.session, self.payload)


def encode_frame(procedure: int, index: int, session: bytes, payload: bytes) -> bytes:
    if len(session) != 16:
        raise ValueError("session id must be 16 bytes")
    body = struct.pack(">BBB", VERSION, procedure, index) + session + payload
    if len(body) > MAX_FRAME:
        raise ValueError("frame exceeds the 1 MiB cap")
    return struct.pack(">I", len(body)) + body


def decode_frame(body: bytes) -> Frame:
    if len(body) < 19:
        raise FrameError(ERR_BAD_FRAME, "frame too short")
    version, procedure, index = struct.unpack(">BBB", body[:3])
    if version != VERSION:
        raise FrameError(ERR_BAD_VERSION, f"unsupported version 0x{version:02x}")
    return Frame(procedure, index, body[3:19], body[19:])


def read_frame(sock) -> Optional[Frame]:
    """Read one frame from a socket-like object; None on clean EOF."""
    header = _read_exact(sock, 4)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME:
        raise FrameError(ERR_BAD_FRAME, "declared frame length exceeds the cap")
    if length < 19:
        raise FrameError(ERR_BAD_FRAME, "declared frame length too short")
    body = _read_exact(sock, length)
    if body is None:
        raise FrameError(ERR_BAD_FRAME, "connection closed mid-frame")
    return decode_frame(body)


def _read_exact(sock, n: int) -> Optional[bytes]:
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(n - got)
        if not chunk:
            return None
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def error_frame(session: bytes, code: int, message: str) -> bytes:
    payload = struct.pack(">H", code) + message.encode()[:512]
    return encode_frame(PROC_ERROR, 0, session, payload)


def parse_error(frame: Frame) -> Tuple[int, str]:
    if len(frame.payload) < 2:
        return ERR_BAD_FRAME, "malformed error frame"
    (code,) = struct.unpack(">H", frame.payload[:2])
    return code, frame.payload[2:].decode(errors="replace")


# ---------------------------------------------------------------------------
# Payload codecs.  Points know their curve; roots carry a curve tag because
# the tree's top level alternates with depth.


def _ser_root(root: Point, cycle: CycleParams) -> bytes:
    tag = b"\x01" if root.curve == cycle.e1 else b"\x02"
    return tag + point_encode(root)


def _de_root(r: Reader, cycle: CycleParams) -> Point:
    tag = r.take(1)[0]
    if tag == 0x01:
        return r.point(cycle.e1)
    if tag == 0x02:
        return r.point(cycle.e2)
    raise ValueError(f"bad root curve tag 0x{tag:02x}")


def _ser_R(R: acl.SignerCommitMessage) -> bytes:
    return R.to_bytes()


def _ser_opt(blob: Optional[bytes]) -> bytes:
    return b"\x00" if blob is None else b"\x01" + blob


def encode_payload(msg, cycle: CycleParams) -> bytes:
    e1 = cycle.e1
    if isinstance(msg, core.IssuanceM1):
        return point_encode(msg.pk) + point_encode(msg.c_prime) + msg.proof.to_bytes()
    if isinstance(msg, core.IssuanceM2):
        return point_encode(msg.c_joint) + ser_scalar(e1, msg.id_share) + _ser_R(msg.R)
    if isinstance(msg, core.IssuanceM3):
        return ser_scalar(e1, msg.e) + _ser_root(msg.new_root, cycle)
    if isinstance(msg, core.IssuanceM4):
        return msg.S.to_bytes(e1)
    if isinstance(msg, core.CollectM1):
        return ser_scalar(e1, msg.r2)
    if isinstance(msg, core.CollectM2):
        out = [
            _ser_root(msg.root, cycle),
            msg.membership.to_bytes(),
            point_encode(msg.c_star),
            point_encode(msg.c_prime),
            ser_scalar(e1, msg.tag),
            ser_scalar(e1, msg.cur_serial),
            ser_scalar(e1, msg.amount),
            struct.pack(">H", msg.catalogue_slot),
            msg.sigma.to_bytes(),
            msg.show.to_bytes(),
            msg.open_new.to_bytes(),
            msg.bind_old.to_bytes(),
            msg.persist.to_bytes(),
            msg.add_mul.to_bytes(),
            ser_scalar(e1, msg.rho5),
        ]
        if msg.range_v is None:
            out.append(b"\x00")
        else:
            out.append(b"\x01" + msg.range_v.to_bytes() + msg.bind_range.to_bytes())
        return b"".join(out)
    if isinstance(msg, core.CollectM3):
        out = [
            point_encode(msg.c_joint),
            ser_scalar(e1, msg.id_share),
            _ser_R(msg.R),
            ser_scalar(e1, msg.reward),
        ]
        if msg.reward_proof is None:
            out.append(b"\x00")
        else:
            out.append(
                b"\x01" + point_encode(msg.policy_comm) + msg.reward_proof.to_bytes()
            )
        return b"".join(out)
    if isinstance(msg, core.CollectM4):
        return ser_scalar(e1, msg.e) + _ser_root(msg.new_root, cycle)
    if isinstance(msg, core.CollectM5):
        return msg.S.to_bytes(e1)
    raise TypeError(f"no codec for {type(msg).__name__}")


def decode_payload(procedure: int, index: int, payload: bytes, cycle: CycleParams):
    e1 = cycle.e1
    r = Reader(payload)
    try:
        if procedure == PROC_ISSUE:
            if index == 1:
                pk = r.point(e1)
                c_prime = r.point(e1)
                proof = IssueProof.read(e1, r)
                r.done()
                return core.IssuanceM1(pk, c_prime, proof)
            if index == 2:
                c_joint = r.point(e1)
                id_share = r.scalar(e1)
                R = acl.SignerCommitMessage.read(e1, r)
                r.done()
                return core.IssuanceM2(c_joint, id_share, R)
            if index == 3:
                e = r.scalar(e1)
                root = _de_root(r, cycle)
                r.done()
                return core.IssuanceM3(e, root)
            if index == 4:
                S = acl.SignerResponse.read(e1, r)
                r.done()
                return core.IssuanceM4(S)
        elif procedure in (PROC_COLLECT, PROC_SPEND, PROC_SPEND_VERIFY):
            if index == 0:
                r.done()
                return None
            if index == 1:
                r2 = r.scalar(e1)
                r.done()
                return core.CollectM1(r2)
            if index == 2:
                root = _de_root(r, cycle)
                membership = MembershipProof.read(cycle, r)
                c_star = r.point(e1)
                c_prime = r.point(e1)
                tag = r.scalar(e1)
                cur_serial = r.scalar(e1)
                amount = r.scalar(e1)
                (slot,) = struct.unpack(">H", r.take(2))
                sigma = acl.BlindSignature.read(e1, r)
                show = acl.ShowBundle.read(e1, r)
                open_new = OpenProof.read(e1, r)
                bind_old = OpenProof.read(e1, r)
                persist = OpenProof.read(e1, r)
                add_mul = AddMulProof.read(e1, r)
                rho5 = r.scalar(e1)
                range_v = bind_range = None
                if r.take(1)[0]:
                    range_v = RangeProof.read(e1, r)
                    bind_range = OpenProof.read(e1, r)
                r.done()
                return core.CollectM2(
                    root, c_star, membership, c_prime, tag, cur_serial, amount,
                    sigma, show, open_new, bind_old, persist, add_mul, rho5,
                    catalogue_slot=slot, range_v=range_v, bind_range=bind_range,
                )
            if index == 3:
                c_joint = r.point(e1)
                id_share = r.scalar(e1)
                R = acl.SignerCommitMessage.read(e1, r)
                reward = r.scalar(e1)
                policy_comm = reward_proof = None
                if r.take(1)[0]:
                    policy_comm = r.point(e1)
                    reward_proof = RewardProof.read(e1, r)
                r.done()
                return core.CollectM3(c_joint, id_share, R, reward, policy_comm,
                                      reward_proof)
            if index == 4:
                e = r.scalar(e1)
                root = _de_root(r, cycle)
                r.done()
                return core.CollectM4(e, root)
            if index == 5:
                S = acl.SignerResponse.read(e1, r)
                r.done()
                return core.CollectM5(S)
    except ValueError as exc:
        raise FrameError(ERR_BAD_FRAME, f"payload parse error: {exc}") from exc
    raise FrameError(ERR_BAD_FRAME, f"unknown message (proc={procedure}, M{index})")
