import random
import socket
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ats import core, wire
from ats.server import ClientDriver, IssuerServer


# -- frame layer ---------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(
    proc=st.sampled_from([1, 2, 3, 4, 0xFF]),
    index=st.integers(min_value=0, max_value=5),
    session=st.binary(min_size=16, max_size=16),
    payload=st.binary(min_size=0, max_size=512),
)
def test_frame_roundtrip(proc, index, session, payload):
    blob = wire.encode_frame(proc, index, session, payload)
    frame = wire.decode_frame(blob[4:])
    assert (frame.procedure, frame.index, frame.session, frame.payload) == (
        proc, index, session, payload,
    )


def test_frame_cap():
    with pytest.raises(ValueError):
        wire.encode_frame(1, 1, bytes(16), b"x" * wire.MAX_FRAME)


def test_frame_rejects_bad_version():
    blob = wire.encode_frame(1, 1, bytes(16), b"")
    body = bytearray(blob[4:])
    body[0] = 0x02
    with pytest.raises(wire.FrameError):
        wire.decode_frame(bytes(body))


def test_frame_rejects_short_body():
    with pytest.raises(wire.FrameError):
        wire.decode_frame(b"\x01\x01")


def test_oversize_length_rejected_before_allocation():
    a, b = socket.socketpair()
    try:
        a.sendall((wire.MAX_FRAME + 1).to_bytes(4, "big"))
        with pytest.raises(wire.FrameError, match="cap"):
            wire.read_frame(b)
    finally:
        a.close()
        b.close()


def test_error_frame_roundtrip():
    blob = wire.error_frame(bytes(16), wire.ERR_PROTOCOL, "nope")
    frame = wire.decode_frame(blob[4:])
    assert frame.procedure == wire.PROC_ERROR
    code, msg = wire.parse_error(frame)
    assert code == wire.ERR_PROTOCOL and msg == "nope"


# -- payload codecs --------------------------------------------------------------


def exchange_messages(med, rng):
    """Drive one collection and one spend-verify in process, capturing every
    message for codec round-trip checks."""
    client, issuer = core.setup(1, med, rng)
    sid = bytes(range(16))
    msgs = []
    m1 = core.issuance_m1(client, 0, rng, sid)
    session = core.IssuerSession(
        "issue", core._session_transcript(b"ats-issue", med, sid)
    )
    m2 = core.issuance_m2(issuer, m1, session, rng)
    m3 = core.issuance_m3(client, 0, m2, rng)
    m4 = core.issuance_m4(issuer, m3, session)
    core.issuance_finish(client, 0, m4)
    msgs += [(wire.PROC_ISSUE, 1, m1), (wire.PROC_ISSUE, 2, m2),
             (wire.PROC_ISSUE, 3, m3), (wire.PROC_ISSUE, 4, m4)]

    session = core.IssuerSession("collect", None)
    c1 = core.collect_m1(issuer, session, rng)
    c2 = core.collect_m2(client, 0, 9, c1, rng, sid)
    c3 = core.collect_m3(issuer, c2, session, rng, sid)
    c4 = core.collect_m4(client, 0, c3, rng)
    c5 = core.collect_m5(issuer, c4, session)
    core.collect_finish(client, 0, c5)
    msgs += [(wire.PROC_COLLECT, 1, c1), (wire.PROC_COLLECT, 2, c2),
             (wire.PROC_COLLECT, 3, c3), (wire.PROC_COLLECT, 4, c4),
             (wire.PROC_COLLECT, 5, c5)]

    session = core.IssuerSession("spend", None)
    s1 = core.collect_m1(issuer, session, rng)
    s2 = core.spend_m2(client, 0, 4, 2, s1, rng, sid, want_reward=True,
                       catalogue_size=len(issuer.policy))
    s3 = core.collect_m3(issuer, s2, session, rng, sid, spend=True,
                         want_reward=True)
    s4 = core.collect_m4(client, 0, s3, rng, spend=True, want_reward=True)
    s5 = core.collect_m5(issuer, s4, session)
    core.collect_finish(client, 0, s5)
    msgs += [(wire.PROC_SPEND_VERIFY, 2, s2), (wire.PROC_SPEND_VERIFY, 3, s3)]
    return msgs


def test_payload_roundtrips(med, rng):
    for proc, index, msg in exchange_messages(med, rng):
        blob = wire.encode_payload(msg, med)
        back = wire.decode_payload(proc, index, blob, med)
        assert wire.encode_payload(back, med) == blob, (proc, index)


def test_payload_truncation_rejected(med, rng):
    msgs = exchange_messages(med, rng)
    proc, index, msg = msgs[5]  # collection M2, the big bundle
    blob = wire.encode_payload(msg, med)
    with pytest.raises(wire.FrameError):
        wire.decode_payload(proc, index, blob[:-1], med)
    with pytest.raises(wire.FrameError):
        wire.decode_payload(proc, index, blob + b"\x00", med)


def test_unknown_message_rejected(med):
    with pytest.raises(wire.FrameError):
        wire.decode_payload(wire.PROC_ISSUE, 5, b"", med)


# -- end-to-end over sockets -------------------------------------------------------


def test_loopback_full_flow(med, rng):
    issuer = core.IssuerState(med, rng)
    with IssuerServer(issuer, seed=11) as server:
        server.start()
        client = core.ClientState(med, 1, issuer.public(), rng)
        with ClientDriver(server.address, client, rng) as driver:
            report = driver.run_script(
                ["issue", "collect 0 5", "collect 0 7", "spend 0 4",
                 "spend 0 2 --verify"]
            )
        assert client.tokens[0].balance == 6
        procs = [r.procedure for r in report.rows]
        assert procs == ["issuance", "collection", "collection", "spending",
                         "spending-verify"]
        assert all(r.bytes_up > 0 and r.bytes_down > 0 for r in report.rows)


def test_empty_script_empty_report(med, rng):
    issuer = core.IssuerState(med, rng)
    with IssuerServer(issuer, seed=11) as server:
        server.start()
        client = core.ClientState(med, 1, issuer.public(), rng)
        with ClientDriver(server.address, client, rng) as driver:
            report = driver.run_script([])
        assert report.rows == []


def test_server_error_frame_on_bad_version(med, rng):
    issuer = core.IssuerState(med, rng)
    with IssuerServer(issuer, seed=11) as server:
        server.start()
        sock = socket.create_connection(server.address)
        try:
            good = wire.encode_frame(wire.PROC_COLLECT, 0, bytes(16), b"")
            bad = bytearray(good)
            bad[4] = 0x7F  # version byte
            sock.sendall(bytes(bad))
            frame = wire.read_frame(sock)
            assert frame.procedure == wire.PROC_ERROR
            code, _ = wire.parse_error(frame)
            assert code == wire.ERR_BAD_VERSION
            # session closed afterwards
            assert sock.recv(1) == b""
        finally:
            sock.close()


def test_server_rejects_protocol_violation(med, rng):
    """Forged overspend travels the wire and dies at the range proof."""
    issuer = core.IssuerState(med, rng)
    with IssuerServer(issuer, seed=11) as server:
        server.start()
        client = core.ClientState(med, 1, issuer.public(), rng)
        with ClientDriver(server.address, client, rng) as driver:
            driver.issue(0)
            driver.collect(0, 10)
            session = driver._fresh_session()
            driver._send(wire.PROC_SPEND, 0, session, None)
            m1, _ = driver._recv(wire.PROC_SPEND, 1)
            m2 = core.spend_m2(client, 0, 25, 0, m1, rng, session,
                               _forge_out_of_range=True)
            driver._send(wire.PROC_SPEND, 2, session, m2)
            with pytest.raises(core.ProtocolAbort, match="range"):
                driver._recv(wire.PROC_SPEND, 3)


def test_stale_m3_replay_rejected(med, rng):
    """Re-sending a finished session's M4 (the old ACL challenge) cannot
    harvest a second signature."""
    issuer = core.IssuerState(med, rng)
    with IssuerServer(issuer, seed=11) as server:
        server.start()
        client = core.ClientState(med, 1, issuer.public(), rng)
        with ClientDriver(server.address, client, rng) as driver:
            driver.issue(0)
            session = driver._fresh_session()
            driver._send(wire.PROC_COLLECT, 0, session, None)
            m1, _ = driver._recv(wire.PROC_COLLECT, 1)
            m2 = core.collect_m2(client, 0, 5, m1, rng, session)
            driver._send(wire.PROC_COLLECT, 2, session, m2)
            m3, _ = driver._recv(wire.PROC_COLLECT, 3)
            m4 = core.collect_m4(client, 0, m3, rng)
            driver._send(wire.PROC_COLLECT, 4, session, m4)
            m5, _ = driver._recv(wire.PROC_COLLECT, 5)
            core.collect_finish(client, 0, m5)
            # replay M4 on the same (now finished) session id
            driver._send(wire.PROC_COLLECT, 4, session, m4)
            with pytest.raises(core.ProtocolAbort, match="out of order"):
                driver._recv(wire.PROC_COLLECT, 5)


def test_session_isolation_concurrent(med):
    """Interleaved sessions from parallel clients never cross-contaminate:
    every client ends with its own correct balance."""
    boot = random.Random(123)
    issuer = core.IssuerState(med, boot)
    with IssuerServer(issuer, threaded=True, seed=5) as server:
        server.start()
        results = {}
        errors = []

        def worker(uid):
            try:
                rng = random.Random(1000 + uid)
                client = core.ClientState(med, 1, issuer.public(), rng)
                with ClientDriver(server.address, client, rng) as driver:
                    driver.issue(0)
                    driver.collect(0, uid + 1)
                    driver.collect(0, 10)
                    driver.spend(0, uid + 1)
                results[uid] = client.tokens[0].balance
            except Exception as exc:  # noqa: BLE001
                errors.append((uid, exc))

        threads = [threading.Thread(target=worker, args=(u,)) for u in range(10)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors, errors
        assert results == {u: 10 for u in range(10)}
        # ten independent clients left ten independent serial trails
        assert len(issuer.dtags) == 30
        assert not core.detect_double_spend(issuer.dtags, issuer.gens)


def test_session_table_cap(med, rng):
    issuer = core.IssuerState(med, rng)
    with IssuerServer(issuer, seed=11, max_sessions=1) as server:
        server.start()
        client = core.ClientState(med, 1, issuer.public(), rng)
        with ClientDriver(server.address, client, rng) as driver:
            driver._send(wire.PROC_COLLECT, 0, b"A" * 16, None)
            driver._recv(wire.PROC_COLLECT, 1)
            driver._send(wire.PROC_COLLECT, 0, b"B" * 16, None)
            with pytest.raises(core.ProtocolAbort, match="session table full"):
                driver._recv(wire.PROC_COLLECT, 1)
