"""Curve-tree accumulator over the 2-cycle.

Leaves are commitments on E1.  Each parent is a (non-hiding) Pedersen
multi-commitment, on the sibling curve, to its children's affine
coordinates: child i's (x, y) occupy generator slots 2i and 2i+1.  Curves
alternate per level, which works because each curve's coordinate field is
the other's scalar field.

Membership is shown by walking the path from the public root: at every
level the prover reveals the parent's child list, proves the (possibly
rerandomized) parent matches their packed coordinates, and hands over a
rerandomized copy of the selected child plus a one-out-of-many proof hiding
which child it is.  The verifier ends up holding a rerandomized leaf and
never learns the leaf index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

from .encoding import Reader, ser_points, write_vec_len
from .groups import Curve, Point, msm
from .params import CycleParams
from .sigma import DlogEqProof, OrEqProof, prove_dlog_eq, prove_or_eq, verify_dlog_eq, verify_or_eq
from .transcript import Transcript

__all__ = [
    "CurveTreeParams",
    "CurveTree",
    "MembershipProof",
    "build",
    "replace_leaf",
    "prove_membership",
    "verify_membership",
]

_PACK_LABEL = b"ctree-pack"


@dataclass(frozen=True)
class CurveTreeParams:
    depth: int
    branching: int
    cycle: CycleParams

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.branching < 1:
            raise ValueError("branching factor must be >= 1")

    @property
    def capacity(self) -> int:
        return self.branching ** self.depth

    def level_curve(self, level: int) -> Curve:
        """Curve hosting nodes at ``level`` (0 = leaves, on E1)."""
        return self.cycle.e1 if level % 2 == 0 else self.cycle.e2

    def pack_gens(self, parent_curve: Curve) -> List[Point]:
        gs = self.cycle.gens_for(parent_curve)
        return gs.extended(2 * self.branching, _PACK_LABEL)


def _coords(point: Point) -> Tuple[int, int]:
    # identity packs as (0, 0); never a real point since our curves have b != 0
    if point.is_identity():
        return 0, 0
    return point.x, point.y


def _pack(children: Sequence[Point], params: CurveTreeParams,
          parent_curve: Curve) -> Point:
    gens = params.pack_gens(parent_curve)
    terms = []
    for i, child in enumerate(children):
        x, y = _coords(child)
        terms.append((x, gens[2 * i]))
        terms.append((y, gens[2 * i + 1]))
    return msm(terms, parent_curve)


class CurveTree:
    """Levels of commitments; level 0 holds the padded leaves, the last level
    is the single root."""

    __slots__ = ("params", "levels", "leaf_count")

    def __init__(self, params: CurveTreeParams, levels: List[List[Point]],
                 leaf_count: int):
        self.params = params
        self.levels = levels
        self.leaf_count = leaf_count

    @property
    def root(self) -> Point:
        return self.levels[-1][0]

    def leaves(self) -> List[Point]:
        return self.levels[0][: self.leaf_count]

    def children_of(self, level: int, index: int) -> List[Point]:
        ell = self.params.branching
        return self.levels[level][index * ell : (index + 1) * ell]


def build(leaves: Sequence[Point], params: CurveTreeParams) -> CurveTree:
    """Deterministic bottom-up construction; free slots hold the public
    padding commitment (the identity, i.e. the all-zero opening)."""
    if len(leaves) > params.capacity:
        raise ValueError(
            f"{len(leaves)} leaves exceed capacity {params.capacity}"
        )
    e1 = params.cycle.e1
    for leaf in leaves:
        if leaf.curve != e1:
            raise ValueError("leaves must live on E1")
    level0 = list(leaves) + [e1.identity()] * (params.capacity - len(leaves))
    levels = [level0]
    for level in range(1, params.depth + 1):
        curve = params.level_curve(level)
        below = levels[-1]
        ell = params.branching
        nodes = [
            _pack(below[i : i + ell], params, curve)
            for i in range(0, len(below), ell)
        ]
        levels.append(nodes)
    assert len(levels[-1]) == 1
    return CurveTree(params, levels, len(leaves))


def replace_leaf(tree: CurveTree, index: int, new_leaf: Point) -> CurveTree:
    """New tree with one leaf swapped; only the root path is recomputed."""
    if not 0 <= index < tree.leaf_count:
        raise ValueError("leaf index out of range")
    if new_leaf.curve != tree.params.cycle.e1:
        raise ValueError("leaves must live on E1")
    params = tree.params
    levels = [list(level) for level in tree.levels]
    levels[0][index] = new_leaf
    node = index
    ell = params.branching
    for level in range(1, params.depth + 1):
        node //= ell
        children = levels[level - 1][node * ell : (node + 1) * ell]
        levels[level][node] = _pack(children, params, params.level_curve(level))
    return CurveTree(params, levels, tree.leaf_count)


# ---------------------------------------------------------------------------
# Membership proofs


@dataclass
class LevelProof:
    children: List[Point]     # the opened child list of this level's parent
    link: DlogEqProof         # parent C* minus packed children lies in <H>
    c_star: Point             # rerandomized selected child
    or_eq: OrEqProof

    def to_bytes(self) -> bytes:
        return (
            write_vec_len(len(self.children))
            + ser_points(self.children)
            + self.link.to_bytes()
            + self.c_star.encode()
            + self.or_eq.to_bytes()
        )

    @classmethod
    def read(cls, parent_curve: Curve, child_curve: Curve, r: Reader) -> "LevelProof":
        n = r.vec_len()
        children = r.points(child_curve, n)
        link = DlogEqProof.read(parent_curve, r)
        c_star = r.point(child_curve)
        or_eq = OrEqProof.read(child_curve, r)
        return cls(children, link, c_star, or_eq)


@dataclass
class MembershipProof:
    levels: List[LevelProof]  # ordered from the root downwards

    def to_bytes(self) -> bytes:
        return bytes([len(self.levels)]) + b"".join(
            lv.to_bytes() for lv in self.levels
        )

    @classmethod
    def from_bytes(cls, cycle: CycleParams, data: bytes) -> "MembershipProof":
        r = Reader(data)
        proof = cls.read(cycle, r)
        r.done()
        return proof

    @classmethod
    def read(cls, cycle: CycleParams, r: Reader) -> "MembershipProof":
        count = r.take(1)[0]
        if count < 1:
            raise ValueError("membership proof must cover at least one level")
        levels = []
        for step in range(count):
            parent_level = count - step
            parent_curve = cycle.e1 if parent_level % 2 == 0 else cycle.e2
            child_curve = cycle.e1 if (parent_level - 1) % 2 == 0 else cycle.e2
            levels.append(LevelProof.read(parent_curve, child_curve, r))
        return cls(levels)


def _absorb_level(tr: Transcript, parent: Point, children: Sequence[Point]):
    tr.absorb(b"step", b"ctree-level")
    tr.absorb_point(b"parent", parent)
    tr.absorb_points(b"children", children)


def prove_membership(tree: CurveTree, index: int, tr: Transcript,
                     rng) -> Tuple[Point, MembershipProof, int]:
    """Walk from the root to leaf ``index``, rerandomizing at each level.

    Returns the rerandomized leaf, the proof, and the leaf's rerandomization
    delta (the caller needs it to open the rerandomized leaf later).
    """
    params = tree.params
    cycle = params.cycle
    tr.absorb(b"proof", b"pi-member")
    tr.absorb_point(b"root", tree.root)
    ell = params.branching
    # path node indices from the top: at level k the path passes node
    # index // ell^k
    parent = tree.root
    parent_delta = 0
    levels: List[LevelProof] = []
    leaf_delta = 0
    for step in range(params.depth):
        parent_level = params.depth - step
        child_level = parent_level - 1
        parent_curve = params.level_curve(parent_level)
        child_curve = params.level_curve(child_level)
        parent_index = index // (ell ** parent_level)
        child_index_global = index // (ell ** child_level)
        child_pos = child_index_global % ell
        children = tree.children_of(child_level, parent_index)
        blind_parent = cycle.gens_for(parent_curve).blind
        blind_child = cycle.gens_for(child_curve).blind
        _absorb_level(tr, parent, children)
        packed = _pack(children, params, parent_curve)
        link = prove_dlog_eq(
            parent_delta, [blind_parent], tr, rng, points=[parent - packed]
        )
        delta = rng.randrange(1, child_curve.order)
        c_star = children[child_pos] + delta * blind_child
        or_eq = prove_or_eq(c_star, children, child_pos, delta, blind_child, tr, rng)
        levels.append(LevelProof(list(children), link, c_star, or_eq))
        parent = c_star
        parent_delta = delta
        leaf_delta = delta
    return parent, MembershipProof(levels), leaf_delta


def verify_membership(root: Point, rerand_leaf: Point, proof: MembershipProof,
                      params: CurveTreeParams, tr: Transcript) -> bool:
    """Check the chain of link and select proofs from the public root down to
    the rerandomized leaf."""
    cycle = params.cycle
    if len(proof.levels) != params.depth:
        return False
    tr.absorb(b"proof", b"pi-member")
    tr.absorb_point(b"root", root)
    parent = root
    for step, lv in enumerate(proof.levels):
        parent_level = params.depth - step
        parent_curve = params.level_curve(parent_level)
        child_curve = params.level_curve(parent_level - 1)
        if parent.curve != parent_curve or lv.c_star.curve != child_curve:
            return False
        if len(lv.children) != params.branching:
            return False
        blind_parent = cycle.gens_for(parent_curve).blind
        blind_child = cycle.gens_for(child_curve).blind
        _absorb_level(tr, parent, lv.children)
        packed = _pack(lv.children, params, parent_curve)
        if not verify_dlog_eq(lv.link, [blind_parent], [parent - packed], tr):
            return False
        if not verify_or_eq(lv.or_eq, lv.c_star, lv.children, blind_child, tr):
            return False
        parent = lv.c_star
    return parent == rerand_leaf
