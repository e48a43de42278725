"""Shared test machinery: bit-flip tamper harness and transcript factories."""

from ats.transcript import Transcript


def flip_bit(data: bytes, bit: int) -> bytes:
    out = bytearray(data)
    out[bit // 8] ^= 1 << (bit % 8)
    return bytes(out)


def tamper_all_reject(blob: bytes, parse, verify, rng, trials: int) -> int:
    """Flip ``trials`` random bit positions; count survivors that still parse
    AND verify (the expected count is zero)."""
    survivors = 0
    nbits = 8 * len(blob)
    for _ in range(trials):
        mutated = flip_bit(blob, rng.randrange(nbits))
        try:
            proof = parse(mutated)
        except ValueError:
            continue
        if verify(proof):
            survivors += 1
    return survivors


def make_tr(cycle, label=b"test"):
    return Transcript(label, cycle.digest())
