"""Issuer server and client driver over the framed protocol.

The server drives one ``IssuerState`` shared by every connection.  Sessions
are keyed by the client-chosen 16-byte session id, so interleaved sessions
on one or many connections never share per-session secrets.  The server is
single-threaded by default (one accept loop, sequential handling) to mirror
a minimal deployment; ``threaded=True`` serves connections concurrently for
the isolation tests, serializing tag-database and root-set mutations behind
a lock.
"""

from __future__ import annotations

import random
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from . import core, wire

__all__ = ["IssuerServer", "ClientDriver", "ProcedureStats", "BenchReport"]

_PROC_NAMES = {
    wire.PROC_ISSUE: "issuance",
    wire.PROC_COLLECT: "collection",
    wire.PROC_SPEND: "spending",
    wire.PROC_SPEND_VERIFY: "spending-verify",
}


class IssuerServer:
    def __init__(self, issuer: core.IssuerState, host: str = "127.0.0.1",
                 port: int = 0, threaded: bool = False, seed: Optional[int] = None,
                 max_sessions: int = 1024):
        self.issuer = issuer
        self.cycle = issuer.cycle
        self.threaded = threaded
        self.max_sessions = max_sessions
        self.rng = random.Random(seed) if seed is not None else random.SystemRandom()
        self.sessions: Dict[bytes, core.IssuerSession] = {}
        self._lock = threading.Lock()
        self._sock = socket.create_server((host, port))
        self._sock.settimeout(0.2)
        self.address = self._sock.getsockname()
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> "IssuerServer":
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self):
        workers: List[threading.Thread] = []
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            if self.threaded:
                t = threading.Thread(target=self._serve_conn, args=(conn,), daemon=True)
                t.start()
                workers.append(t)
            else:
                self._serve_conn(conn)
        for t in workers:
            t.join(timeout=1.0)

    def close(self):
        self._stop.set()
        try:
            self._sock.close()
        except OSError:
            pass
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- per-connection loop -------------------------------------------------

    def _serve_conn(self, conn: socket.socket):
        with conn:
            while True:
                try:
                    frame = wire.read_frame(conn)
                except wire.FrameError as err:
                    conn.sendall(wire.error_frame(b"\x00" * 16, err.code, str(err)))
                    return
                if frame is None:
                    return
                try:
                    replies = self._dispatch(frame)
                except wire.FrameError as err:
                    conn.sendall(wire.error_frame(frame.session, err.code, str(err)))
                    return
                except core.ProtocolAbort as err:
                    conn.sendall(
                        wire.error_frame(frame.session, wire.ERR_PROTOCOL, str(err))
                    )
                    return
                except Exception as err:  # noqa: BLE001 - answer, then drop
                    conn.sendall(
                        wire.error_frame(frame.session, wire.ERR_INTERNAL, str(err))
                    )
                    return
                for reply in replies:
                    conn.sendall(reply)

    def _session(self, frame: wire.Frame, label: bytes) -> core.IssuerSession:
        with self._lock:
            session = self.sessions.get(frame.session)
            if session is None:
                if len(self.sessions) >= self.max_sessions:
                    raise wire.FrameError(wire.ERR_STATE, "session table full")
                transcript = core._session_transcript(label, self.cycle, frame.session)
                session = core.IssuerSession(_PROC_NAMES[frame.procedure], transcript)
                self.sessions[frame.session] = session
            return session

    def _dispatch(self, frame: wire.Frame) -> List[bytes]:
        proc = frame.procedure
        if proc not in _PROC_NAMES:
            raise wire.FrameError(wire.ERR_BAD_FRAME, f"unknown procedure 0x{proc:02x}")
        msg = wire.decode_payload(proc, frame.index, frame.payload, self.cycle)
        out: List[bytes] = []

        def reply(index: int, body) -> None:
            payload = wire.encode_payload(body, self.cycle)
            out.append(wire.encode_frame(proc, index, frame.session, payload))

        if proc == wire.PROC_ISSUE:
            session = self._session(frame, b"ats-issue")
            if frame.index == 1:
                with self._lock:
                    reply(2, core.issuance_m2(self.issuer, msg, session, self.rng))
            elif frame.index == 3:
                with self._lock:
                    reply(4, core.issuance_m4(self.issuer, msg, session))
                self._drop(frame.session)
            else:
                raise wire.FrameError(wire.ERR_BAD_FRAME, f"unexpected M{frame.index}")
            return out

        spend = proc in (wire.PROC_SPEND, wire.PROC_SPEND_VERIFY)
        want_reward = proc == wire.PROC_SPEND_VERIFY
        label = core._proc_label(spend, want_reward) if spend else b"ats-collect"
        session = self._session(frame, label)
        if frame.index == 0:
            with self._lock:
                reply(1, core.collect_m1(self.issuer, session, self.rng))
        elif frame.index == 2:
            with self._lock:
                reply(3, core.collect_m3(self.issuer, msg, session, self.rng,
                                         frame.session, spend=spend,
                                         want_reward=want_reward))
        elif frame.index == 4:
            with self._lock:
                reply(5, core.collect_m5(self.issuer, msg, session))
            self._drop(frame.session)
        else:
            raise wire.FrameError(wire.ERR_BAD_FRAME, f"unexpected M{frame.index}")
        return out

    def _drop(self, session_id: bytes):
        with self._lock:
            self.sessions.pop(session_id, None)


# ---------------------------------------------------------------------------
# Client side


@dataclass
class ProcedureStats:
    procedure: str
    ms: float
    bytes_up: int
    bytes_down: int
    # per-message frame sizes, e.g. {"M1": 96, "M2": 94, ...}
    messages: Dict[str, int] = field(default_factory=dict)

    def line(self) -> str:
        return (
            f"proc={self.procedure} ms={self.ms:.3f} "
            f"bytes_up={self.bytes_up} bytes_down={self.bytes_down}"
        )


@dataclass
class BenchReport:
    rows: List[ProcedureStats] = field(default_factory=list)

    def add(self, row: ProcedureStats):
        self.rows.append(row)

    def extend(self, other: "BenchReport"):
        self.rows.extend(other.rows)

    def by_procedure(self) -> Dict[str, List[ProcedureStats]]:
        out: Dict[str, List[ProcedureStats]] = {}
        for row in self.rows:
            out.setdefault(row.procedure, []).append(row)
        return out

    def mean_ms(self, procedure: str) -> float:
        rows = [r.ms for r in self.rows if r.procedure == procedure]
        return sum(rows) / len(rows) if rows else 0.0

    def total_ms(self) -> float:
        return sum(r.ms for r in self.rows)

    def lines(self) -> List[str]:
        return [r.line() for r in self.rows]

    def table(self) -> str:
        groups = self.by_procedure()
        header = f"{'procedure':<18}{'runs':>6}{'mean ms':>12}{'median ms':>12}{'up B':>10}{'down B':>10}"
        out = [header, "-" * len(header)]
        for name, rows in groups.items():
            ms = sorted(r.ms for r in rows)
            median = ms[len(ms) // 2] if len(ms) % 2 else (ms[len(ms) // 2 - 1] + ms[len(ms) // 2]) / 2
            out.append(
                f"{name:<18}{len(rows):>6}{sum(ms) / len(ms):>12.3f}{median:>12.3f}"
                f"{max(r.bytes_up for r in rows):>10}{max(r.bytes_down for r in rows):>10}"
            )
        return "\n".join(out)


class ClientDriver:
    """Runs protocol procedures for one client over a framed connection."""

    def __init__(self, address, client: core.ClientState, rng=None):
        self.client = client
        self.cycle = client.cycle
        self.rng = rng or random.SystemRandom()
        self.sock = socket.create_connection(address)
        self.report = BenchReport()

    def close(self):
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- framed exchange helpers -------------------------------------------

    def _send(self, proc: int, index: int, session: bytes, msg) -> int:
        payload = b"" if msg is None else wire.encode_payload(msg, self.cycle)
        frame = wire.encode_frame(proc, index, session, payload)
        self.sock.sendall(frame)
        return len(frame)

    def _recv(self, proc: int, index: int):
        frame = wire.read_frame(self.sock)
        if frame is None:
            raise core.ProtocolAbort("server closed the connection")
        if frame.procedure == wire.PROC_ERROR:
            code, message = wire.parse_error(frame)
            raise core.ProtocolAbort(f"server error {code} at M{index}: {message}")
        if frame.procedure != proc or frame.index != index:
            raise core.ProtocolAbort(
                f"unexpected frame (proc={frame.procedure}, M{frame.index})"
            )
        size = 19 + 4 + len(frame.payload)
        return wire.decode_payload(proc, frame.index, frame.payload, self.cycle), size

    def _fresh_session(self) -> bytes:
        return bytes(self.rng.randrange(256) for _ in range(16))

    # -- procedures ----------------------------------------------------------

    def issue(self, j: int) -> ProcedureStats:
        session = self._fresh_session()
        sizes: Dict[str, int] = {}
        start = time.perf_counter()
        m1 = core.issuance_m1(self.client, j, self.rng, session)
        sizes["M1"] = self._send(wire.PROC_ISSUE, 1, session, m1)
        m2, sizes["M2"] = self._recv(wire.PROC_ISSUE, 2)
        m3 = core.issuance_m3(self.client, j, m2, self.rng)
        sizes["M3"] = self._send(wire.PROC_ISSUE, 3, session, m3)
        m4, sizes["M4"] = self._recv(wire.PROC_ISSUE, 4)
        core.issuance_finish(self.client, j, m4)
        stats = ProcedureStats(
            "issuance", (time.perf_counter() - start) * 1000,
            sizes["M1"] + sizes["M3"], sizes["M2"] + sizes["M4"], sizes,
        )
        self.report.add(stats)
        return stats

    def collect(self, j: int, amount: int) -> ProcedureStats:
        session = self._fresh_session()
        sizes: Dict[str, int] = {}
        start = time.perf_counter()
        open_bytes = self._send(wire.PROC_COLLECT, 0, session, None)
        m1, sizes["M1"] = self._recv(wire.PROC_COLLECT, 1)
        m2 = core.collect_m2(self.client, j, amount, m1, self.rng, session)
        sizes["M2"] = self._send(wire.PROC_COLLECT, 2, session, m2)
        m3, sizes["M3"] = self._recv(wire.PROC_COLLECT, 3)
        m4 = core.collect_m4(self.client, j, m3, self.rng)
        sizes["M4"] = self._send(wire.PROC_COLLECT, 4, session, m4)
        m5, sizes["M5"] = self._recv(wire.PROC_COLLECT, 5)
        core.collect_finish(self.client, j, m5)
        stats = ProcedureStats(
            "collection", (time.perf_counter() - start) * 1000,
            open_bytes + sizes["M2"] + sizes["M4"],
            sizes["M1"] + sizes["M3"] + sizes["M5"], sizes,
        )
        self.report.add(stats)
        return stats

    def spend(self, j: int, amount: int, catalogue_slot: int = 0,
              want_reward: bool = False,
              catalogue_size: Optional[int] = None) -> Tuple[ProcedureStats, int]:
        proc = wire.PROC_SPEND_VERIFY if want_reward else wire.PROC_SPEND
        session = self._fresh_session()
        sizes: Dict[str, int] = {}
        start = time.perf_counter()
        open_bytes = self._send(proc, 0, session, None)
        m1, sizes["M1"] = self._recv(proc, 1)
        m2 = core.spend_m2(self.client, j, amount, catalogue_slot, m1, self.rng,
                           session, want_reward=want_reward,
                           catalogue_size=catalogue_size)
        sizes["M2"] = self._send(proc, 2, session, m2)
        m3, sizes["M3"] = self._recv(proc, 3)
        m4 = core.collect_m4(self.client, j, m3, self.rng, spend=True,
                             want_reward=want_reward)
        sizes["M4"] = self._send(proc, 4, session, m4)
        m5, sizes["M5"] = self._recv(proc, 5)
        core.collect_finish(self.client, j, m5)
        stats = ProcedureStats(
            "spending-verify" if want_reward else "spending",
            (time.perf_counter() - start) * 1000,
            open_bytes + sizes["M2"] + sizes["M4"],
            sizes["M1"] + sizes["M3"] + sizes["M5"], sizes,
        )
        self.report.add(stats)
        # kept for reward-record export (ats spend --reward-out)
        self.last_spend = {
            "session": session, "m3": m3, "slot": catalogue_slot,
            "amount": amount,
            "catalogue_size": catalogue_size or len(core.DEFAULT_POLICY),
        }
        return stats, m3.reward

    def run_script(self, script: List[str]) -> BenchReport:
        """Each line: ``issue``, ``collect J V``, or ``spend J V [--verify]``."""
        for line in script:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            op = parts[0]
            if op == "issue":
                self.issue(int(parts[1]) if len(parts) > 1 else 0)
            elif op == "collect":
                self.collect(int(parts[1]), int(parts[2]))
            elif op == "spend":
                want = "--verify" in parts
                args = [p for p in parts[1:] if not p.startswith("--")]
                self.spend(int(args[0]), int(args[1]), want_reward=want)
            else:
                raise ValueError(f"unknown script operation: {op}")
        return self.report
