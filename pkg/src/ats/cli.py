"""Command-line entry point.

Server side:
    ats server --listen HOST:PORT [--pub-out FILE] [--db FILE] [--policy FILE]

Client side (persistent state file, one procedure per invocation):
    ats init    --state FILE --issuer-pub FILE [--tokens N]
    ats issue   --state FILE --connect HOST:PORT [--slot J]
    ats collect --state FILE --connect HOST:PORT --slot J --value V
    ats spend   --state FILE --connect HOST:PORT --slot J --value V
                [--catalogue-slot K] [--prove-reward] [--reward-out FILE]
    ats client  --state FILE --connect HOST:PORT --script FILE

Offline tools:
    ats bench --users N --catalogue K --reps R [--parallel] [--cycle NAME]
    ats detect --db FILE [--cycle NAME]
    ats verify-reward FILE
    ats gen-toy-cycle --max-prime N
    ats tree-root FILE [--cycle NAME] [--depth D] [--branching L]
"""

from __future__ import annotations

import argparse
import random
import struct

from . import core
from .curvetree import CurveTreeParams, build
from .encoding import Reader
from .groups import point_decode
from .params import CycleParams, CycleNotFound, find_toy_cycle, medium_cycle, secp256k1_cycle
from .rangeproof import RangeParams, RewardProof, spend_commitment, verify_reward
from .server import ClientDriver, IssuerServer

_CYCLES = {
    "secp256k1": secp256k1_cycle,
    "medium": medium_cycle,
}


def _cycle(name: str) -> CycleParams:
    try:
        return _CYCLES[name]()
    except KeyError:
        raise SystemExit(f"unknown cycle {name!r}; pick from {sorted(_CYCLES)}")


def _address(spec: str):
    host, _, port = spec.rpartition(":")
    return (host or "127.0.0.1", int(port))


def _load_policy(path):
    if path is None:
        return None
    with open(path) as fh:
        return [int(line.strip()) for line in fh if line.strip()]


# ---------------------------------------------------------------------------
# Reward record files: everything needed to re-verify a reward proof later.

_REWARD_MAGIC = b"ATSR"


def write_reward_record(path: str, cycle: CycleParams, catalogue_size: int,
                        slot: int, amount: int, reward: int, policy_comm,
                        proof: RewardProof, session_id: bytes):
    e1 = cycle.e1
    blob = _REWARD_MAGIC + bytes([1, core._cycle_id(cycle)])
    blob += struct.pack(">HHII", catalogue_size, slot, amount, reward)
    blob += session_id
    blob += policy_comm.encode()
    blob += proof.to_bytes()
    with open(path, "wb") as fh:
        fh.write(blob)


def verify_reward_record(path: str) -> bool:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _REWARD_MAGIC or blob[4] != 1:
        raise ValueError("not a reward record file")
    cycle = core._cycle_by_id(blob[5])
    catalogue_size, slot, amount, reward = struct.unpack(">HHII", blob[6:18])
    session_id = blob[18:34]
    r = Reader(blob[34:])
    policy_comm = r.point(cycle.e1)
    proof = RewardProof.read(cycle.e1, r)
    r.done()
    spend = [0] * catalogue_size
    spend[slot] = amount
    a_comm = spend_commitment(spend, cycle.g1)
    tr = core._session_transcript(b"ats-reward", cycle, session_id)
    return verify_reward(reward, a_comm, policy_comm, proof, RangeParams(),
                         cycle.g1, tr)


# ---------------------------------------------------------------------------


def cmd_server(args):
    cycle = _cycle(args.cycle)
    rng = random.SystemRandom()
    issuer = core.IssuerState(cycle, rng, policy=_load_policy(args.policy),
                              dtag_path=args.db)
    if args.pub_out:
        core.save_issuer_pub(issuer.keys, cycle, args.pub_out)
        print(f"issuer public key written to {args.pub_out}")
    host, port = _address(args.listen)
    server = IssuerServer(issuer, host, port, threaded=args.threaded)
    print(f"listening on {server.address[0]}:{server.address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.close()


def cmd_init(args):
    pub, cycle = core.load_issuer_pub(args.issuer_pub)
    rng = random.SystemRandom()
    client = core.ClientState(cycle, args.tokens, pub, rng)
    core.save_client(client, args.state)
    print(f"client state with {args.tokens} token(s) written to {args.state}")


def _with_client(args, fn):
    client = core.load_client(args.state)
    rng = random.SystemRandom()
    with ClientDriver(_address(args.connect), client, rng) as driver:
        result = fn(client, driver)
    core.save_client(client, args.state)
    return result


def cmd_issue(args):
    def fn(client, driver):
        stats = driver.issue(args.slot)
        print(stats.line())

    _with_client(args, fn)


def cmd_collect(args):
    def fn(client, driver):
        stats = driver.collect(args.slot, args.value)
        print(stats.line())
        print(f"balance[{args.slot}] = {client.tokens[args.slot].balance}")

    _with_client(args, fn)


def cmd_spend(args):
    def fn(client, driver):
        stats, reward = driver.spend(
            args.slot, args.value, catalogue_slot=args.catalogue_slot,
            want_reward=args.prove_reward, catalogue_size=args.catalogue_size,
        )
        print(stats.line())
        print(f"balance[{args.slot}] = {client.tokens[args.slot].balance} "
              f"reward = {reward}")
        if args.prove_reward and args.reward_out:
            last = driver.last_spend
            m3 = last["m3"]
            write_reward_record(
                args.reward_out, client.cycle, last["catalogue_size"],
                last["slot"], last["amount"], m3.reward, m3.policy_comm,
                m3.reward_proof, last["session"],
            )
            print(f"reward record written to {args.reward_out}")

    _with_client(args, fn)


def cmd_client(args):
    with open(args.script) as fh:
        script = [line.strip() for line in fh if line.strip()]

    def fn(client, driver):
        report = driver.run_script(script)
        for line in report.lines():
            print(line)

    _with_client(args, fn)


def cmd_bench(args):
    from .bench import reward_proof_sizes, run_bench

    cycle = _cycle(args.cycle)
    result = run_bench(users=args.users, catalogue=args.catalogue,
                       reps=args.reps, cycle=cycle, parallel=args.parallel)
    print(result.table())
    for line in result.lines():
        print(line)
    hits, total = result.ordering_score()
    print(f"ordering issuance<collection<spending<spending-verify: "
          f"{hits}/{total} repetitions")
    if args.sizes:
        sizes = reward_proof_sizes([64, 128, 256], cycle)
        print(f"{'catalogue':>10}{'linear B':>10}{'range B':>10}{'total B':>10}")
        for k, (lin, rng_part, total_b) in sizes.items():
            print(f"{k:>10}{lin:>10}{rng_part:>10}{total_b:>10}")


def cmd_detect(args):
    cycle = _cycle(args.cycle)
    db = core.DTagDB.load(args.db, cycle.e1.scalar_bytes)
    culprits = core.detect_double_spend(db, cycle.g1)
    if not culprits:
        print("no double-spending found")
        return
    for pk, proof in culprits:
        ok = core.verify_detection(pk, proof, cycle.g1)
        print(f"culprit pk = {pk.encode().hex()} proof_ok = {ok}")


def cmd_verify_reward(args):
    ok = verify_reward_record(args.record)
    print("reward proof OK" if ok else "reward proof REJECTED")
    raise SystemExit(0 if ok else 1)


def cmd_gen_toy_cycle(args):
    try:
        cyc = find_toy_cycle(args.max_prime)
    except CycleNotFound as err:
        raise SystemExit(f"error: {err}")
    e1, e2 = cyc.e1, cyc.e2
    print(f"# amicable pair under {args.max_prime}")
    print(f"E1: y^2 = x^3 + {e1.a}*x + {e1.b} over F_{e1.p}  order = {e1.order}")
    print(f"E2: y^2 = x^3 + {e2.a}*x + {e2.b} over F_{e2.p}  order = {e2.order}")
    print(f"cycle check: #E1 = {e1.order} = q, #E2 = {e2.order} = p")


def cmd_tree_root(args):
    cycle = _cycle(args.cycle)
    leaves = []
    with open(args.leaves) as fh:
        for line in fh:
            line = line.strip()
            if line:
                leaves.append(point_decode(cycle.e1, bytes.fromhex(line)))
    if args.depth and args.branching:
        params = CurveTreeParams(args.depth, args.branching, cycle)
    else:
        depth, ell = core._tree_shape(len(leaves))
        params = CurveTreeParams(depth, ell, cycle)
    tree = build(leaves, params)
    print(tree.root.encode().hex())


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="ats", description="accumulation-token system client/server tools"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("server", help="run the issuer server")
    p.add_argument("--listen", default="127.0.0.1:7700")
    p.add_argument("--cycle", default="secp256k1", choices=sorted(_CYCLES))
    p.add_argument("--policy", help="policy vector file (one integer per line)")
    p.add_argument("--db", help="append-only double-spend tag log")
    p.add_argument("--pub-out", help="write the issuer public key here")
    p.add_argument("--threaded", action="store_true")
    p.set_defaults(fn=cmd_server)

    p = sub.add_parser("init", help="create a fresh client state file")
    p.add_argument("--state", required=True)
    p.add_argument("--issuer-pub", required=True)
    p.add_argument("--tokens", type=int, default=1)
    p.set_defaults(fn=cmd_init)

    p = sub.add_parser("issue", help="run the issuance procedure")
    p.add_argument("--state", required=True)
    p.add_argument("--connect", required=True)
    p.add_argument("--slot", type=int, default=0)
    p.set_defaults(fn=cmd_issue)

    p = sub.add_parser("collect", help="accumulate value onto a token")
    p.add_argument("--state", required=True)
    p.add_argument("--connect", required=True)
    p.add_argument("--slot", type=int, required=True)
    p.add_argument("--value", type=int, required=True)
    p.set_defaults(fn=cmd_collect)

    p = sub.add_parser("spend", help="spend value from a token")
    p.add_argument("--state", required=True)
    p.add_argument("--connect", required=True)
    p.add_argument("--slot", type=int, required=True)
    p.add_argument("--value", type=int, required=True)
    p.add_argument("--catalogue-slot", type=int, default=0)
    p.add_argument("--catalogue-size", type=int, default=None)
    p.add_argument("--prove-reward", action="store_true")
    p.add_argument("--reward-out", help="write a re-verifiable reward record")
    p.set_defaults(fn=cmd_spend)

    p = sub.add_parser("client", help="run a script of operations")
    p.add_argument("--state", required=True)
    p.add_argument("--connect", required=True)
    p.add_argument("--script", required=True)
    p.set_defaults(fn=cmd_client)

    p = sub.add_parser("bench", help="loopback benchmark")
    p.add_argument("--users", type=int, default=1)
    p.add_argument("--catalogue", type=int, default=64)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--cycle", default="secp256k1", choices=sorted(_CYCLES))
    p.add_argument("--parallel", action="store_true")
    p.add_argument("--sizes", action="store_true",
                   help="also print reward-proof size growth")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("detect", help="scan a tag log for double spending")
    p.add_argument("--db", required=True)
    p.add_argument("--cycle", default="secp256k1", choices=sorted(_CYCLES))
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("verify-reward", help="re-verify a stored reward proof")
    p.add_argument("record")
    p.set_defaults(fn=cmd_verify_reward)

    p = sub.add_parser("gen-toy-cycle", help="search a tiny amicable pair")
    p.add_argument("--max-prime", type=int, required=True)
    p.set_defaults(fn=cmd_gen_toy_cycle)

    p = sub.add_parser("tree-root", help="recompute a tree root from leaves")
    p.add_argument("leaves", help="file with one hex-encoded commitment per line")
    p.add_argument("--cycle", default="secp256k1", choices=sorted(_CYCLES))
    p.add_argument("--depth", type=int)
    p.add_argument("--branching", type=int)
    p.set_defaults(fn=cmd_tree_root)

    args = parser.parse_args(argv)
    args.fn(args)


if __name__ == "__main__":
    main()
