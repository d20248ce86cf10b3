"""Schmidt decompositions of bipartite pure states and the projectors they induce.

A state on H1 (x) H2 with dims (d1, d2), d1 <= d2, is stored as a flat vector
indexed by i*d2 + j. The decomposition |psi> = sum_i sqrt(p_i) |w_i>_1 |w_i>_2
comes from the SVD of the reshaped (d1, d2) coefficient matrix; weights are the
squared singular values and equal the eigenvalues of the reduced density matrix.

Phase convention: each left vector is rescaled so its largest-magnitude
component is real and positive, with the right vector absorbing the opposite
phase; ties in magnitude resolve to the lowest index. This makes a fresh
decomposition deterministic. `continuity_align` instead matches pairs against
a previous decomposition so that labels and phases track smoothly in time,
at the cost of the descending-weight ordering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import unit_vector

DEGENERACY_TOL = 1e-10


class DegeneracyError(RuntimeError):
    """Schmidt weights too close for the requested operation to be well defined."""


@dataclass(frozen=True)
class BipartiteState:
    """Unit vector on a d1 x d2 tensor-product space, d1 <= d2."""

    vector: np.ndarray
    d1: int
    d2: int

    def __post_init__(self):
        if self.d1 < 2:
            raise ValueError("d1 must be >= 2")
        if self.d1 > self.d2:
            raise ValueError("require d1 <= d2")
        v = unit_vector(self.vector)
        if v.size != self.d1 * self.d2:
            raise ValueError("vector length does not match d1*d2")
        object.__setattr__(self, "vector", v)

    @property
    def dim(self) -> int:
        return self.d1 * self.d2

    def coefficient_matrix(self) -> np.ndarray:
        return self.vector.reshape(self.d1, self.d2)


@dataclass(frozen=True)
class SchmidtDecomposition:
    """Weights with paired left/right orthonormal families (columns).

    weights[k] belongs to left[:, k] (x) right[:, k]. A fresh decomposition has
    weights in descending order; an aligned one keeps the tracked label order.
    `degenerate` flags a minimum pairwise weight gap below DEGENERACY_TOL.
    """

    weights: np.ndarray
    left: np.ndarray
    right: np.ndarray
    degenerate: bool

    @property
    def size(self) -> int:
        return self.weights.size

    def state_vector(self) -> np.ndarray:
        m = (self.left * np.sqrt(self.weights)) @ self.right.T
        return m.ravel()

    def min_gap(self) -> float:
        w = np.sort(self.weights)
        return float(np.diff(w).min()) if w.size > 1 else np.inf


def reduced_density_matrix(state: BipartiteState) -> np.ndarray:
    """Partial trace over the second factor; (d1, d1) Hermitian PSD, trace 1."""
    m = state.coefficient_matrix()
    return m @ m.conj().T


def _apply_phase_convention(left: np.ndarray, right: np.ndarray) -> None:
    for k in range(left.shape[1]):
        idx = int(np.argmax(np.abs(left[:, k])))
        a = left[idx, k]
        if abs(a) > 0:
            phase = a / abs(a)
            left[:, k] /= phase
            right[:, k] *= phase


def schmidt_decompose(state: BipartiteState) -> SchmidtDecomposition:
    """Deterministic Schmidt decomposition with descending weights."""
    u, s, vh = np.linalg.svd(state.coefficient_matrix(), full_matrices=False)
    left = u.copy()
    right = vh.T.copy()  # right family columns: psi = sum_k s_k left_k (x) right_k
    _apply_phase_convention(left, right)
    weights = s**2
    gaps = np.diff(np.sort(weights))
    degenerate = bool(weights.size > 1 and gaps.min() < DEGENERACY_TOL)
    return SchmidtDecomposition(weights, left, right, degenerate)


def continuity_align(
    current: SchmidtDecomposition, previous: SchmidtDecomposition
) -> SchmidtDecomposition:
    """Relabel and re-phase `current` to follow `previous` through time.

    Greedy assignment on left-factor overlap magnitudes |<w_i(t)|w_j(t-dt)>_1|,
    then a phase rotation making each surviving overlap real positive. Weight
    order afterwards follows the tracked labels, not magnitude.
    """
    n = current.size
    if previous.size != n:
        raise ValueError("decompositions have different sizes")
    overlap = np.abs(previous.left.conj().T @ current.left)  # [prev j, cur i]
    perm = np.full(n, -1)
    used_prev, used_cur = set(), set()
    order = np.dstack(np.unravel_index(np.argsort(-overlap, axis=None), overlap.shape))[0]
    for j, i in order:
        if j in used_prev or i in used_cur:
            continue
        perm[j] = i
        used_prev.add(j)
        used_cur.add(i)
        if len(used_prev) == n:
            break
    left = current.left[:, perm].copy()
    right = current.right[:, perm].copy()
    weights = current.weights[perm].copy()
    for j in range(n):
        o = np.vdot(previous.left[:, j], left[:, j])
        if abs(o) > 1e-12:
            phase = o / abs(o)
            left[:, j] *= phase.conjugate()
            right[:, j] *= phase
    return SchmidtDecomposition(weights, left, right, current.degenerate)


def partitions(d1: int) -> list[frozenset[int]]:
    """Canonical enumeration of the 2^(d1-1) - 1 unordered binary partitions.

    Each partition is represented by the side containing index 0; the list
    index is the partition's stable identifier.
    """
    sides = []
    for mask in range(2 ** (d1 - 1) - 1):
        side = {0}
        for bit in range(d1 - 1):
            if mask >> bit & 1:
                side.add(bit + 1)
        sides.append(frozenset(side))
    return sides


def schmidt_projector(
    decomposition: SchmidtDecomposition, side: frozenset[int], d2: int
) -> np.ndarray:
    """P_S = sum_{i in S} |w_i><w_i|_1 (x) I_2 as a dense matrix."""
    cols = decomposition.left[:, sorted(side)]
    q = cols @ cols.conj().T
    return np.kron(q, np.eye(d2))


@dataclass(frozen=True)
class SchmidtPartition:
    """One binary split of the Schmidt labels at a fixed instant.

    `side` is the half containing label 0, `index` its position in the
    canonical enumeration, and `q` the (d1, d1) projector onto the spanned
    left vectors; P_side = q (x) I_2 acts on the full space by reshaping.
    """

    side: frozenset[int]
    index: int
    q: np.ndarray


def partition_projectors(decomposition: SchmidtDecomposition) -> list[SchmidtPartition]:
    """All unordered binary partitions of a decomposition, in canonical order."""
    out = []
    for idx, side in enumerate(partitions(decomposition.size)):
        cols = decomposition.left[:, sorted(side)]
        out.append(SchmidtPartition(side, idx, cols @ cols.conj().T))
    return out


def random_initial_state(
    d1: int, d2: int, rank: int, rng: np.random.Generator
) -> BipartiteState:
    """Random pure state of given Schmidt rank.

    Weights are the squared components of a uniform unit vector on the real
    (rank-1)-sphere; both Schmidt bases are drawn Haar-uniformly.
    """
    if not 1 <= rank <= min(d1, d2):
        raise ValueError("rank must be in 1..min(d1,d2)")
    x = rng.normal(size=rank)
    weights = x**2 / np.sum(x**2)
    left = _haar_columns(rng, d1, rank)
    right = _haar_columns(rng, d2, rank)
    m = (left * np.sqrt(weights)) @ right.T
    return BipartiteState(m.ravel(), d1, d2)


def _haar_columns(rng: np.random.Generator, dim: int, count: int) -> np.ndarray:
    a = rng.normal(size=(dim, count)) + 1j * rng.normal(size=(dim, count))
    q, r = np.linalg.qr(a)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def projector_derivative(
    hamiltonian: np.ndarray, state: BipartiteState, side: frozenset[int]
) -> np.ndarray:
    """Time derivative of the co-moving Schmidt projector for partition `side`.

    Returns dP/dt = i[H - B (x) I, P] where B is built from first-order
    perturbation of the reduced-density-matrix eigenvectors. Only terms
    coupling the two sides of the partition enter B: same-side terms cancel
    identically in the commutator, and dropping them avoids dividing by small
    gaps that cannot affect the result.

    Raises DegeneracyError when a cross-partition weight gap is below
    DEGENERACY_TOL.
    """
    d1, d2 = state.d1, state.d2
    dec = schmidt_decompose(state)
    w = dec.weights
    inside = sorted(side)
    outside = [i for i in range(d1) if i not in side]
    for k in inside:
        for l in outside:
            if abs(w[k] - w[l]) < DEGENERACY_TOL:
                raise DegeneracyError(
                    f"weight gap |p_{k} - p_{l}| = {abs(w[k] - w[l]):.2e} below tolerance"
                )
    # d(rho_r)/dt from the Schroedinger equation
    m_psi = state.coefficient_matrix()
    m_hpsi = (hamiltonian @ state.vector).reshape(d1, d2)
    rho_dot = -1j * (m_hpsi @ m_psi.conj().T - m_psi @ m_hpsi.conj().T)
    b = np.zeros((d1, d1), dtype=complex)
    for k in inside:
        for l in outside:
            uk, ul = dec.left[:, k], dec.left[:, l]
            elem = np.vdot(uk, rho_dot @ ul)
            b += np.outer(uk, ul.conj()) * (elem / (w[l] - w[k]))
            b += np.outer(ul, uk.conj()) * (np.conj(elem) / (w[k] - w[l]))
    b = 1j * b  # Hermitian by construction
    p = schmidt_projector(dec, side, d2)
    g = hamiltonian - np.kron(b, np.eye(d2))
    return 1j * (g @ p - p @ g)
