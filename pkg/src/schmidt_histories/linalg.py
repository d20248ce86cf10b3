"""Dense complex linear algebra for small Hilbert spaces.

State vectors are plain complex numpy arrays; the classes below are thin
wrappers that enforce hermiticity / projector identities at construction
time so that downstream code can assume them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

HERMITICITY_WARN = 1e-12
PROJECTOR_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-9
UNIT_NORM_TOL = 1e-12


class NumericalError(RuntimeError):
    """Raised when a numerical post-condition fails; carries the residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


def unit_vector(entries) -> np.ndarray:
    """Validate a finite, unit-norm complex vector and return it as complex128."""
    v = np.asarray(entries, dtype=complex)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("state vector must be a non-empty 1-d array")
    if not np.all(np.isfinite(v.view(float))):
        raise ValueError("state vector has non-finite entries")
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"state vector norm {norm!r} is not 1 within {UNIT_NORM_TOL}")
    return v


@dataclass(frozen=True)
class HermitianOperator:
    """Hermitian matrix, symmetrized on construction.

    The stored matrix is (H + H^dag)/2; a warning is emitted when the
    correction exceeds HERMITICITY_WARN in Frobenius norm.
    """

    matrix: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.matrix, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("operator must be a square matrix")
        sym = (h + h.conj().T) / 2.0
        correction = np.linalg.norm(h - sym)
        if correction > HERMITICITY_WARN:
            warnings.warn(
                f"input symmetrized; anti-Hermitian part {correction:.3e}",
                stacklevel=2,
            )
        object.__setattr__(self, "matrix", sym)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class Projector:
    """Orthogonal projector: Hermitian, idempotent, integer trace."""

    matrix: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.matrix, dtype=complex)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("projector must be a square matrix")
        if np.linalg.norm(p - p.conj().T) > PROJECTOR_TOL:
            raise ValueError("projector is not Hermitian")
        if np.linalg.norm(p @ p - p) > PROJECTOR_TOL:
            raise ValueError("projector is not idempotent")
        trace = p.trace().real
        if abs(trace - round(trace)) > PROJECTOR_TOL * p.shape[0]:
            raise ValueError(f"projector trace {trace!r} is not an integer rank")
        object.__setattr__(self, "matrix", p)

    @property
    def rank(self) -> int:
        return round(self.matrix.trace().real)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues in ascending order with matching unitary eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def eigendecompose(operator: HermitianOperator) -> SpectralDecomposition:
    """Spectral decomposition of a Hermitian operator.

    Raises NumericalError when the reconstruction residual exceeds
    RECONSTRUCTION_TOL relative to the operator scale.
    """
    h = operator.matrix
    eigenvalues, eigenvectors = np.linalg.eigh(h)
    dec = SpectralDecomposition(eigenvalues, eigenvectors)
    residual = np.linalg.norm(dec.reconstruct() - h)
    if residual > RECONSTRUCTION_TOL * max(1.0, np.linalg.norm(h)):
        raise NumericalError("eigendecomposition failed to reconstruct", residual)
    return dec


def propagator(hamiltonian, t: float) -> np.ndarray:
    """Unitary exp(-i H t) via the spectral method.

    Accepts a HermitianOperator or a precomputed SpectralDecomposition; callers
    that evolve repeatedly should pass the decomposition.
    """
    if isinstance(hamiltonian, SpectralDecomposition):
        dec = hamiltonian
    else:
        dec = eigendecompose(hamiltonian)
    v = dec.eigenvectors
    phases = np.exp(-1j * dec.eigenvalues * t)
    return (v * phases) @ v.conj().T
