import pytest

from ats.curvetree import (
    CurveTreeParams,
    MembershipProof,
    _pack,
    build,
    prove_membership,
    replace_leaf,
    verify_membership,
)
from ats.pedersen import commit
from helpers import make_tr


def leaf_of(cyc, rng):
    gs = cyc.g1
    order = cyc.e1.order
    return commit([rng.randrange(order) for _ in range(4)],
                  rng.randrange(1, order), gs.gens, gs.blind)


def naive_root(leaves, params):
    """Independent bottom-up fold used as the oracle for build()."""
    level = list(leaves) + [params.cycle.e1.identity()] * (params.capacity - len(leaves))
    for k in range(1, params.depth + 1):
        curve = params.level_curve(k)
        ell = params.branching
        level = [
            _pack(level[i : i + ell], params, curve)
            for i in range(0, len(level), ell)
        ]
    assert len(level) == 1
    return level[0]


def test_single_leaf_root(toy, rng):
    params = CurveTreeParams(1, 1, toy)
    leaf = leaf_of(toy, rng)
    tree = build([leaf], params)
    gens = params.pack_gens(toy.e2)
    assert tree.root == leaf.x * gens[0] + leaf.y * gens[1]


def test_build_deterministic(toy, rng):
    params = CurveTreeParams(2, 4, toy)
    leaves = [leaf_of(toy, rng) for _ in range(9)]
    assert build(leaves, params).root == build(leaves, params).root


def test_build_matches_naive_recompute(med, rng):
    params = CurveTreeParams(2, 32, med)
    leaves = [leaf_of(med, rng) for _ in range(1024)]
    tree = build(leaves, params)
    assert tree.root == naive_root(leaves, params)


def test_build_capacity_overflow(toy, rng):
    params = CurveTreeParams(1, 2, toy)
    with pytest.raises(ValueError):
        build([leaf_of(toy, rng) for _ in range(3)], params)


def test_levels_alternate_curves(toy, rng):
    params = CurveTreeParams(3, 2, toy)
    tree = build([leaf_of(toy, rng) for _ in range(5)], params)
    for k, level in enumerate(tree.levels):
        want = toy.e1 if k % 2 == 0 else toy.e2
        assert all(node.curve == want for node in level), f"level {k}"


def test_replace_leaf(toy, rng):
    params = CurveTreeParams(2, 4, toy)
    leaves = [leaf_of(toy, rng) for _ in range(10)]
    tree = build(leaves, params)
    new_leaf = leaf_of(toy, rng)

    same = replace_leaf(tree, 3, leaves[3])
    assert same.root == tree.root

    swapped = replace_leaf(tree, 3, new_leaf)
    assert swapped.root == build(leaves[:3] + [new_leaf] + leaves[4:], params).root
    assert replace_leaf(swapped, 3, leaves[3]).root == tree.root

    with pytest.raises(ValueError):
        replace_leaf(tree, 10, new_leaf)


def test_membership_minimal(toy, rng):
    params = CurveTreeParams(1, 2, toy)
    leaves = [leaf_of(toy, rng) for _ in range(2)]
    tree = build(leaves, params)
    c_star, proof, delta = prove_membership(tree, 0, make_tr(toy), rng)
    assert c_star == leaves[0] + delta * toy.g1.blind
    assert verify_membership(tree.root, c_star, proof, params, make_tr(toy))


def test_membership_non_member_rejects(med, rng):
    params = CurveTreeParams(2, 4, med)
    leaves = [leaf_of(med, rng) for _ in range(16)]
    tree = build(leaves, params)
    c_star, proof, delta = prove_membership(tree, 5, make_tr(med), rng)
    outsider = leaf_of(med, rng)
    assert not verify_membership(tree.root, outsider, proof, params, make_tr(med))
    # a proof against a different root also fails
    other = build(leaves[1:] + [leaf_of(med, rng)], params)
    assert not verify_membership(other.root, c_star, proof, params, make_tr(med))


def test_membership_large_tree(med, rng):
    params = CurveTreeParams(2, 32, med)
    leaves = [leaf_of(med, rng) for _ in range(1024)]
    tree = build(leaves, params)
    reference = naive_root(leaves, params)
    for index in (0, 511, 1023, rng.randrange(1024)):
        c_star, proof, _ = prove_membership(tree, index, make_tr(med), rng)
        assert verify_membership(reference, c_star, proof, params, make_tr(med))


def test_membership_serialization(med, rng):
    params = CurveTreeParams(2, 8, med)
    leaves = [leaf_of(med, rng) for _ in range(20)]
    tree = build(leaves, params)
    c_star, proof, _ = prove_membership(tree, 13, make_tr(med), rng)
    blob = proof.to_bytes()
    restored = MembershipProof.from_bytes(med, blob)
    assert restored.to_bytes() == blob
    assert verify_membership(tree.root, c_star, restored, params, make_tr(med))


def test_root_binding_randomized(med, rng):
    # accidental root collisions appear at rate ~1/q, so this runs on the
    # mid-size cycle where the rate is ~2^-28 rather than ~1/101
    params = CurveTreeParams(2, 4, med)
    for _ in range(200):
        leaves = [leaf_of(med, rng) for _ in range(6)]
        tree = build(leaves, params)
        i = rng.randrange(6)
        other = leaf_of(med, rng)
        if other == leaves[i]:
            continue
        tree2 = build(leaves[:i] + [other] + leaves[i + 1 :], params)
        assert tree.root != tree2.root


def test_membership_exhaustive_small_trees(toy, rng):
    """Every member accepts and non-members reject across tree shapes
    covering up to 64 leaves."""
    shapes = [(1, 1), (1, 4), (2, 3), (2, 8), (3, 4)]
    for depth, ell in shapes:
        params = CurveTreeParams(depth, ell, toy)
        n = min(params.capacity, 64)
        leaves = [leaf_of(toy, rng) for _ in range(n)]
        tree = build(leaves, params)
        for index in range(n):
            c_star, proof, _ = prove_membership(tree, index, make_tr(toy), rng)
            assert verify_membership(tree.root, c_star, proof, params, make_tr(toy))


def test_rerandomized_leaf_hides_index(toy, rng):
    """Distribution smoke: rerandomized leaves from two indices cover the
    whole group the same way."""
    scipy_stats = pytest.importorskip("scipy.stats")
    params = CurveTreeParams(1, 2, toy)
    leaves = [leaf_of(toy, rng) for _ in range(2)]
    tree = build(leaves, params)
    order = toy.e1.order
    samples = {0: [], 1: []}
    for index in (0, 1):
        for _ in range(1000):
            c_star, _, _ = prove_membership(tree, index, make_tr(toy), rng)
            samples[index].append(
                c_star.x if not c_star.is_identity() else toy.e1.p
            )
    bins = 8
    tables = []
    for index in (0, 1):
        counts = [0] * bins
        for v in samples[index]:
            counts[v * bins // (toy.e1.p + 1)] += 1
        tables.append(counts)
    _, p, _, _ = scipy_stats.chi2_contingency(tables)
    assert p > 0.01
