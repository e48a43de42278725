"""Benchmark harness: scripted client sessions against a loopback server.

One repetition = a fresh issuer and N fresh clients, each running the same
four-procedure script (issue, collect, spend, spend with reward proof).
Reports carry wall time and byte counts per procedure, both as an aligned
table and as machine-readable lines.
"""

from __future__ import annotations

import random
import threading
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import core
from .params import CycleParams, secp256k1_cycle
from .rangeproof import RangeParams, prove_reward
from .server import BenchReport, ClientDriver, IssuerServer
from .transcript import Transcript

__all__ = [
    "BenchResult",
    "run_bench",
    "reward_proof_sizes",
    "DEFAULT_SCRIPT",
]

DEFAULT_SCRIPT = ["issue 0", "collect 0 5", "spend 0 3", "spend 0 1 --verify"]

_ORDER = ["issuance", "collection", "spending", "spending-verify"]


@dataclass
class BenchResult:
    users: int
    catalogue: int
    reports: List[BenchReport] = field(default_factory=list)  # one per repetition
    wall_s: List[float] = field(default_factory=list)

    def combined(self) -> BenchReport:
        out = BenchReport()
        for rep in self.reports:
            out.extend(rep)
        return out

    def mean_ms(self, procedure: str) -> float:
        return self.combined().mean_ms(procedure)

    def ordering_holds(self, report: Optional[BenchReport] = None) -> bool:
        """Issuance < collection < spending < spending-verify on mean times."""
        rep = report if report is not None else self.combined()
        means = [rep.mean_ms(name) for name in _ORDER]
        return all(a < b for a, b in zip(means, means[1:]))

    def ordering_score(self) -> Tuple[int, int]:
        hits = sum(1 for rep in self.reports if self.ordering_holds(rep))
        return hits, len(self.reports)

    def mean_wall_s(self) -> float:
        return sum(self.wall_s) / len(self.wall_s) if self.wall_s else 0.0

    def median_wall_s(self) -> float:
        if not self.wall_s:
            return 0.0
        walls = sorted(self.wall_s)
        mid = len(walls) // 2
        return walls[mid] if len(walls) % 2 else (walls[mid - 1] + walls[mid]) / 2

    def lines(self) -> List[str]:
        out = []
        for name in _ORDER:
            rows = [r for r in self.combined().rows if r.procedure == name]
            if not rows:
                continue
            out.append(
                f"proc={name} ms={sum(r.ms for r in rows) / len(rows):.3f} "
                f"bytes_up={max(r.bytes_up for r in rows)} "
                f"bytes_down={max(r.bytes_down for r in rows)}"
            )
        return out

    def table(self) -> str:
        head = (
            f"users={self.users} catalogue={self.catalogue} "
            f"reps={len(self.reports)} mean_wall={self.mean_wall_s():.2f}s"
        )
        return head + "\n" + self.combined().table()


def _run_user(address, cycle: CycleParams, issuer_pub, policy_len: int,
              script: Sequence[str], seed: int, out: List[BenchReport]):
    rng = random.Random(seed)
    client = core.ClientState(cycle, 1, issuer_pub, rng)
    with ClientDriver(address, client, rng) as driver:
        for line in script:
            parts = line.split()
            if parts[0] == "issue":
                driver.issue(int(parts[1]))
            elif parts[0] == "collect":
                driver.collect(int(parts[1]), int(parts[2]))
            elif parts[0] == "spend":
                want = "--verify" in parts
                args = [p for p in parts[1:] if not p.startswith("--")]
                driver.spend(int(args[0]), int(args[1]), want_reward=want,
                             catalogue_size=policy_len)
        out.append(driver.report)


def run_bench(users: int = 1, catalogue: int = 64, reps: int = 1,
              cycle: Optional[CycleParams] = None,
              script: Optional[Sequence[str]] = None,
              parallel: bool = False, seed: int = 0) -> BenchResult:
    cycle = cycle or secp256k1_cycle()
    script = list(script) if script is not None else list(DEFAULT_SCRIPT)
    policy = [(i % 7) + 1 for i in range(catalogue)]
    result = BenchResult(users, catalogue)
    for rep in range(reps):
        rng = random.Random((seed << 16) | rep)
        issuer = core.IssuerState(cycle, rng, policy=policy)
        with IssuerServer(issuer, threaded=parallel, seed=rep + 1) as server:
            server.start()
            reports: List[BenchReport] = []
            start = time.perf_counter()
            if parallel:
                threads = [
                    threading.Thread(
                        target=_run_user,
                        args=(server.address, cycle, issuer.public(), catalogue,
                              script, (seed << 20) | (rep << 10) | u, reports),
                    )
                    for u in range(users)
                ]
                for t in threads:
                    t.start()
                for t in threads:
                    t.join()
            else:
                for u in range(users):
                    _run_user(server.address, cycle, issuer.public(), catalogue,
                              script, (seed << 20) | (rep << 10) | u, reports)
            result.wall_s.append(time.perf_counter() - start)
            rep_report = BenchReport()
            for r in reports:
                rep_report.extend(r)
            result.reports.append(rep_report)
    return result


def reward_proof_sizes(catalogue_sizes: Sequence[int],
                       cycle: Optional[CycleParams] = None,
                       seed: int = 7) -> Dict[int, Tuple[int, int, int]]:
    """Serialized reward-proof sizes per catalogue size: the folding part
    grows by one L/R pair per doubling, the range part stays constant."""
    cycle = cycle or secp256k1_cycle()
    rng = random.Random(seed)
    gens = cycle.g1
    params = RangeParams()
    out: Dict[int, Tuple[int, int, int]] = {}
    for size in catalogue_sizes:
        spend = [0] * size
        spend[rng.randrange(size)] = rng.randrange(1, 50)
        policy = [rng.randrange(1, 8) for _ in range(size)]
        tr = Transcript(b"bench-reward", cycle.digest())
        _, proof = prove_reward(spend, policy, params, gens, tr, rng)
        linear = proof.linear_part_size()
        rng_part = proof.range_part_size()
        out[size] = (linear, rng_part, len(proof.to_bytes()))
    return out
