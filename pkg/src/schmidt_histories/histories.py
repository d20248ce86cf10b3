"""Branch-dependent history trees and their consistency functional.

Each node carries an unnormalized branch vector; leaf vectors evolve with the
state while interior vectors stay frozen at their branching time. For a pure
initial state the decoherence matrix of the leaf set is the Gram matrix of the
branch vectors, D[a, b] = <branch_b|branch_a>, so probabilities sit on the
diagonal and unitary evolution leaves D invariant.

Extending a leaf by a binary Schmidt partition replaces it with the two
projected children. The children are mutually orthogonal by construction, so
an extension is judged only against all other retained leaves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .schmidt import BipartiteState, SchmidtPartition

# absolute probability below which a branch is numerically dead: it is kept in
# the tree but never extended and never enters a DHP denominator
DEAD_FLOOR = 1e-14

CONSISTENCY_KINDS = ("medium-dhc", "weak-dhc", "absolute")
TRIVIALITY_MODES = ("relative", "absolute")


class UndefinedDhpError(RuntimeError):
    """DHP needs at least two leaves with probability above the dead floor."""


@dataclass(frozen=True)
class ConsistencyCriterion:
    kind: str
    epsilon: float

    def __post_init__(self):
        if self.kind not in CONSISTENCY_KINDS:
            raise ValueError(f"kind must be one of {CONSISTENCY_KINDS}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")

    def with_epsilon(self, epsilon: float) -> "ConsistencyCriterion":
        return ConsistencyCriterion(self.kind, epsilon)


@dataclass(frozen=True)
class TrivialityCriterion:
    mode: str
    delta: float

    def __post_init__(self):
        if self.mode not in TRIVIALITY_MODES:
            raise ValueError(f"mode must be one of {TRIVIALITY_MODES}")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")

    def threshold(self, parent_probability: float) -> float:
        if self.mode == "relative":
            return self.delta * parent_probability
        return self.delta


@dataclass
class HistoryNode:
    id: int
    parent: int | None
    born: float                      # creation time
    side: frozenset[int] | None      # partition side selecting this branch
    vector: np.ndarray               # current if leaf, frozen at last branching if interior
    probability: float
    children: list[int] = field(default_factory=list)
    dead: bool = False

    @property
    def is_leaf(self) -> bool:
        return not self.children


class HistoryTree:
    """Mutable branching record rooted at the initial state."""

    def __init__(self, state: BipartiteState):
        self.d1 = state.d1
        self.d2 = state.d2
        self.time = 0.0
        root = HistoryNode(0, None, 0.0, None, state.vector.copy(), 1.0)
        self.nodes: dict[int, HistoryNode] = {0: root}
        self._next_id = 1

    def leaf_ids(self) -> list[int]:
        return [n.id for n in self.nodes.values() if n.is_leaf]

    def live_leaf_ids(self) -> list[int]:
        return [n.id for n in self.nodes.values() if n.is_leaf and not n.dead]

    def leaf_vectors(self, ids=None) -> np.ndarray:
        ids = self.leaf_ids() if ids is None else ids
        return np.stack([self.nodes[i].vector for i in ids], axis=1)


def decoherence_matrix(vectors: np.ndarray) -> np.ndarray:
    """D[a, b] = <v_b|v_a> for branch vectors as columns of `vectors`."""
    return vectors.T @ vectors.conj()


def _pair_value(kind: str, d_ab: complex, pa: float, pb: float) -> float:
    if kind == "absolute":
        return abs(d_ab)
    num = abs(d_ab.real) if kind == "weak-dhc" else abs(d_ab)
    return num / np.sqrt(pa * pb)


def dhp(vectors: np.ndarray, kind: str = "medium-dhc", floor: float = DEAD_FLOOR) -> float:
    """Largest pairwise consistency violation over a set of branch vectors.

    Pairs involving a vector of probability <= floor are excluded for the
    normalized kinds; with fewer than two usable vectors the projection
    statistic is undefined.
    """
    if kind not in CONSISTENCY_KINDS:
        raise ValueError(f"kind must be one of {CONSISTENCY_KINDS}")
    probs = np.linalg.norm(vectors, axis=0) ** 2
    keep = probs > floor
    if keep.sum() < 2:
        raise UndefinedDhpError("need at least two leaves above the dead floor")
    v = vectors[:, keep]
    p = probs[keep]
    d = decoherence_matrix(v)
    best = 0.0
    for a in range(len(p)):
        for b in range(a):
            best = max(best, _pair_value(kind, d[a, b], p[a], p[b]))
    return best


@dataclass(frozen=True)
class ExtensionVerdict:
    leaf: int
    side: frozenset[int]
    partition_index: int
    consistent: bool
    trivial: bool
    dhp: float
    child_probabilities: tuple[float, float]


def evaluate_extension(
    tree: HistoryTree,
    leaf_id: int,
    partition: SchmidtPartition,
    consistency: ConsistencyCriterion,
    triviality: TrivialityCriterion,
) -> ExtensionVerdict:
    """Judge splitting one live leaf by one partition against the other leaves.

    The two candidate children are exactly orthogonal, so their own cross term
    is zero and the DHP of the hypothetical extension is the maximum pair value
    between either child and every other live leaf.
    """
    leaf = tree.nodes[leaf_id]
    if not leaf.is_leaf:
        raise ValueError(f"node {leaf_id} is not a leaf")
    if leaf.dead:
        raise ValueError(f"leaf {leaf_id} is dead and cannot be extended")
    child_a, child_b = _split(tree, leaf, partition)
    pa = float(np.vdot(child_a, child_a).real)
    pb = float(np.vdot(child_b, child_b).real)
    # a split that only shaves off numerically dead weight is no refinement,
    # so the dead floor bounds the triviality threshold from below
    trivial = min(pa, pb) <= max(triviality.threshold(leaf.probability), DEAD_FLOOR)
    value = 0.0
    for other_id in tree.live_leaf_ids():
        if other_id == leaf_id:
            continue
        other = tree.nodes[other_id]
        for child, pc in ((child_a, pa), (child_b, pb)):
            if consistency.kind != "absolute" and pc <= DEAD_FLOOR:
                continue
            d_ab = complex(np.vdot(other.vector, child))
            value = max(value, _pair_value(consistency.kind, d_ab, pc, other.probability))
    return ExtensionVerdict(
        leaf_id,
        partition.side,
        partition.index,
        consistent=value <= consistency.epsilon,
        trivial=trivial,
        dhp=value,
        child_probabilities=(pa, pb),
    )


def _split(tree: HistoryTree, leaf: HistoryNode, partition: SchmidtPartition):
    m = leaf.vector.reshape(tree.d1, tree.d2)
    child_a = (partition.q @ m).ravel()
    return child_a, leaf.vector - child_a


def apply_extension(
    tree: HistoryTree, leaf_id: int, partition: SchmidtPartition, time: float
) -> tuple[int, int]:
    """Replace a live leaf by its two projected children; returns their ids."""
    leaf = tree.nodes[leaf_id]
    if not leaf.is_leaf:
        raise ValueError(f"node {leaf_id} is not a leaf")
    if leaf.dead:
        raise ValueError(f"leaf {leaf_id} is dead and cannot be extended")
    child_a, child_b = _split(tree, leaf, partition)
    complement = frozenset(range(tree.d1)) - partition.side
    ids = []
    for side, vec in ((partition.side, child_a), (complement, child_b)):
        prob = float(np.vdot(vec, vec).real)
        node = HistoryNode(
            tree._next_id, leaf_id, time, side, vec, prob, dead=prob <= DEAD_FLOOR
        )
        tree.nodes[node.id] = node
        leaf.children.append(node.id)
        tree._next_id += 1
        ids.append(node.id)
    return ids[0], ids[1]


def evolve(tree: HistoryTree, step_propagator: np.ndarray, dt: float) -> None:
    """Advance every leaf branch vector by one step; interior nodes frozen."""
    for leaf_id in tree.leaf_ids():
        node = tree.nodes[leaf_id]
        node.vector = step_propagator @ node.vector
    tree.time += dt


def scan_candidates(
    leaf_vectors: np.ndarray,
    leaf_probs: np.ndarray,
    q_stack: np.ndarray,
    consistency: ConsistencyCriterion,
    triviality: TrivialityCriterion,
    d1: int,
    d2: int,
):
    """Vectorized evaluate_extension over all (partition, live leaf) pairs.

    leaf_vectors: (d, k) live leaf branch vectors, leaf_probs their norms^2,
    q_stack: (n_p, d1, d1) partition factor projectors. Returns (dhp, trivial,
    child_probs) with shapes (n_p, k), (n_p, k), (n_p, k, 2); entries follow
    the same rules as evaluate_extension.
    """
    d, k = leaf_vectors.shape
    n_p = q_stack.shape[0]
    t = np.ascontiguousarray(leaf_vectors.T).reshape(k, d1, d2)
    a = np.einsum("pab,kbc->pkac", q_stack, t).reshape(n_p, k, d)
    b = t.reshape(1, k, d) - a
    pa = np.einsum("pkd,pkd->pk", a.conj(), a).real
    pb = np.einsum("pkd,pkd->pk", b.conj(), b).real
    child_probs = np.stack([pa, pb], axis=-1)
    thresholds = (
        triviality.delta * leaf_probs[None, :]
        if triviality.mode == "relative"
        else triviality.delta
    )
    trivial = np.minimum(pa, pb) <= np.maximum(thresholds, DEAD_FLOOR)
    # cross[p, i, j] = <leaf_j | child_{p,i}>
    cross_a = np.einsum("dj,pid->pij", leaf_vectors.conj(), a)
    cross_b = np.einsum("dj,pid->pij", leaf_vectors.conj(), b)
    if consistency.kind == "absolute":
        num_a, num_b = np.abs(cross_a), np.abs(cross_b)
    else:
        if consistency.kind == "weak-dhc":
            num_a, num_b = np.abs(cross_a.real), np.abs(cross_b.real)
        else:
            num_a, num_b = np.abs(cross_a), np.abs(cross_b)
        with np.errstate(divide="ignore", invalid="ignore"):
            num_a = num_a / np.sqrt(pa[:, :, None] * leaf_probs[None, None, :])
            num_b = num_b / np.sqrt(pb[:, :, None] * leaf_probs[None, None, :])
        num_a[pa <= DEAD_FLOOR] = 0.0
        num_b[pb <= DEAD_FLOOR] = 0.0
    own = np.eye(k, dtype=bool)[None, :, :]
    num_a = np.where(own, 0.0, num_a)
    num_b = np.where(own, 0.0, num_b)
    values = np.maximum(num_a.max(axis=2), num_b.max(axis=2))
    return values, trivial, child_probs
