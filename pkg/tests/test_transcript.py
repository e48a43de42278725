import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ats.transcript import Transcript


def fresh():
    return Transcript(b"test-domain")


def test_framing_disambiguation():
    a = fresh().absorb(b"a", b"bc")
    b = fresh().absorb(b"ab", b"c")
    assert a.state != b.state


def test_identical_sequences_identical_states():
    a = fresh().absorb(b"x", b"1").absorb(b"y", b"2")
    b = fresh().absorb(b"x", b"1").absorb(b"y", b"2")
    assert a.state == b.state
    assert a.challenge_scalar(b"c", 1009) == b.challenge_scalar(b"c", 1009)


def test_absorb_order_matters():
    a = fresh().absorb(b"x", b"1").absorb(b"y", b"2")
    b = fresh().absorb(b"y", b"2").absorb(b"x", b"1")
    assert a.challenge_scalar(b"c", 1009) != b.challenge_scalar(b"c", 1009)


def test_domain_separation():
    a = Transcript(b"one").absorb(b"x", b"data")
    b = Transcript(b"two").absorb(b"x", b"data")
    assert a.state != b.state


def test_challenge_never_zero():
    # hammer many transcripts; the remap rule forbids 0 outright
    for i in range(2000):
        t = fresh().absorb(b"i", bytes([i % 256, i // 256]))
        c = t.challenge_scalar(b"c", 7)
        assert 1 <= c < 7


def test_one_bit_statement_flip_changes_challenge():
    base = fresh().absorb(b"stmt", b"\x00" * 8).challenge_scalar(b"c", 1 << 61)
    collisions = 0
    for bit in range(1000):
        data = bytearray(8)
        data[bit % 8] ^= 1 << (bit // 8 % 8)
        other = fresh().absorb(b"stmt", bytes(data)).challenge_scalar(b"c", 1 << 61)
        if other == base:
            collisions += 1
    assert collisions == 0


def test_sequential_challenges_differ():
    t = fresh().absorb(b"x", b"1")
    assert t.challenge_scalar(b"c", 1 << 61) != t.challenge_scalar(b"c", 1 << 61)


def test_clone_then_diverge():
    t = fresh().absorb(b"x", b"1")
    u = t.clone()
    assert t.challenge_scalar(b"c", 1009) == u.challenge_scalar(b"c", 1009)
    t.absorb(b"y", b"2")
    u.absorb(b"y", b"3")
    assert t.challenge_scalar(b"c", 1009) != u.challenge_scalar(b"c", 1009)


def test_rejects_empty_domain_and_tiny_order():
    with pytest.raises(ValueError):
        Transcript(b"")
    with pytest.raises(ValueError):
        fresh().challenge_scalar(b"c", 1)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(
        st.tuples(st.binary(min_size=0, max_size=16), st.binary(min_size=0, max_size=64)),
        min_size=1,
        max_size=6,
    ),
    st.lists(
        st.tuples(st.binary(min_size=0, max_size=16), st.binary(min_size=0, max_size=64)),
        min_size=1,
        max_size=6,
    ),
)
def test_distinct_absorption_distinct_state(seq_a, seq_b):
    ta, tb = fresh(), fresh()
    for label, data in seq_a:
        ta.absorb(label, data)
    for label, data in seq_b:
        tb.absorb(label, data)
    if seq_a == seq_b:
        assert ta.state == tb.state
    else:
        assert ta.state != tb.state
