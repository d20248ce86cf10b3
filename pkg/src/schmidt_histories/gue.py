"""Gaussian unitary ensemble sampling and moment identities.

Normalization: diagonal entries are real N(0, 2*sigma^2); off-diagonal real
and imaginary parts are each N(0, sigma^2), independently. At the default
sigma = 1/sqrt(2) the diagonal variance is 1 and the off-diagonal complex
variance E|H_jk|^2 is 1, so E[Tr H^2] = dim^2.

All randomness flows through numpy PCG64 generators; `stream` and `substream`
are the only seeding entry points, so a (seed, index) pair fully determines
every draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_SIGMA = 1.0 / math.sqrt(2.0)

MOMENT_KINDS = ("nAm", "nAm_abs2", "nAm_re2", "nAPAm", "nAPAm_abs2")


def stream(seed: int) -> np.random.Generator:
    """PCG64 generator for a master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed))


def substream(seed: int, index: int) -> np.random.Generator:
    """Independent generator derived deterministically from (seed, index)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


@dataclass(frozen=True)
class GueSpec:
    """Ensemble parameters: matrix dimension and entry scale sigma."""

    dim: int
    sigma: float = DEFAULT_SIGMA

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


def sample_gue(spec: GueSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw one Hermitian matrix from the ensemble."""
    return sample_gue_batch(spec, 1, rng)[0]


def sample_gue_batch(spec: GueSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw `count` matrices as a (count, dim, dim) array.

    (A + A^dag)/sqrt(2) with A an iid complex Gaussian matrix of per-part
    variance sigma^2 reproduces the entry law stated in the module docstring.
    """
    d = spec.dim
    a = rng.normal(0.0, spec.sigma, size=(count, d, d)) + 1j * rng.normal(
        0.0, spec.sigma, size=(count, d, d)
    )
    return (a + a.conj().swapaxes(-1, -2)) / math.sqrt(2.0)


@dataclass(frozen=True)
class MomentCheck:
    """Monte Carlo estimate of one moment identity next to its analytic value."""

    kind: str
    estimate: complex
    analytic: complex
    std_error: float
    samples: int

    @property
    def zero_mean(self) -> bool:
        return self.analytic == 0

    def passes(self, rel_tol: float = 0.05, zero_sigmas: float = 4.0) -> bool:
        err = abs(self.estimate - self.analytic)
        if self.zero_mean:
            return err <= zero_sigmas * self.std_error
        return err <= rel_tol * abs(self.analytic)


def moment_analytic(kind: str, n: np.ndarray, m: np.ndarray, projector: np.ndarray | None, sigma: float) -> complex:
    """Closed-form ensemble expectation for one identity kind."""
    nn = float(np.vdot(n, n).real)
    mm = float(np.vdot(m, m).real)
    if kind == "nAm":
        return 0.0 + 0.0j
    if kind == "nAm_abs2":
        return 2.0 * sigma**2 * nn * mm
    if kind == "nAm_re2":
        # E[(n^dag A m)^2] = 2 sigma^2 (n^dag m)^2, so the real part carries
        # half of E|.|^2 only when n and m are orthogonal.
        return sigma**2 * (nn * mm + float(np.real(np.vdot(n, m) ** 2)))
    if projector is None:
        raise ValueError(f"kind {kind!r} needs a projector")
    r = float(projector.trace().real)
    nm = np.vdot(n, m)
    if kind == "nAPAm":
        return 2.0 * r * sigma**2 * nm
    if kind == "nAPAm_abs2":
        npm = np.vdot(n, projector @ m)
        return 4.0 * sigma**4 * (r**2 * abs(nm) ** 2 + abs(npm) ** 2 + r * nn * mm)
    raise ValueError(f"unknown moment kind {kind!r}")


def moment_oracle(
    kind: str,
    n: np.ndarray,
    m: np.ndarray,
    projector: np.ndarray | None,
    sigma: float,
    samples: int,
    rng: np.random.Generator,
    chunk: int = 4096,
) -> MomentCheck:
    """Estimate E[f(A)] by Monte Carlo and pair it with the analytic value.

    Kinds: nAm        -> E[n^dag A m]                 (zero)
           nAm_abs2   -> E[|n^dag A m|^2]
           nAm_re2    -> E[(Re n^dag A m)^2]
           nAPAm      -> E[n^dag A P A m]
           nAPAm_abs2 -> E[|n^dag A P A m|^2]
    """
    if kind not in MOMENT_KINDS:
        raise ValueError(f"unknown moment kind {kind!r}")
    if samples < 2:
        raise ValueError("samples must be >= 2")
    n = np.asarray(n, dtype=complex)
    m = np.asarray(m, dtype=complex)
    spec = GueSpec(dim=n.shape[0], sigma=sigma)
    values = np.empty(samples, dtype=complex)
    done = 0
    while done < samples:
        b = min(chunk, samples - done)
        h = sample_gue_batch(spec, b, rng)
        am = h @ m
        if kind in ("nAPAm", "nAPAm_abs2"):
            inner = np.einsum("ij,bj->bi", projector, am)
            am = np.einsum("bij,bj->bi", h, inner)
        z = am @ n.conj()
        if kind == "nAm_abs2" or kind == "nAPAm_abs2":
            z = np.abs(z) ** 2
        elif kind == "nAm_re2":
            z = z.real**2
        values[done : done + b] = z
        done += b
    estimate = values.mean()
    # component-wise variance of the sample mean, combined across re/im
    se = math.sqrt((values.real.var(ddof=1) + values.imag.var(ddof=1)) / samples)
    analytic = moment_analytic(kind, n, m, projector, sigma)
    return MomentCheck(kind, complex(estimate), complex(analytic), se, samples)


def identity_report(dim: int, samples: int, seed: int, sigma: float = DEFAULT_SIGMA) -> list[MomentCheck]:
    """Run every moment identity on one random vector pair and a half-rank projector.

    n and m are independent unit vectors in general position (neither
    orthogonal nor parallel), so the real-part and cross-term identities are
    exercised in their full forms.  Each identity draws its matrices from its
    own seed-derived substream.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    rng = substream(seed, 0)
    n = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    m = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    n /= np.linalg.norm(n)
    m /= np.linalg.norm(m)
    rank = max(1, dim // 2)
    frame = np.linalg.qr(rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank)))[0]
    projector = frame @ frame.conj().T
    return [
        moment_oracle(kind, n, m, projector, sigma, samples, substream(seed, 1 + idx))
        for idx, kind in enumerate(MOMENT_KINDS)
    ]
