"""Threshold laws and Monte Carlo percentile tables for extension statistics.

Analytic pieces: the beta law governing an immediate reprojection of a fresh
branch, the probability floor that keeps initial reprojections triviality-
blocked, the alternating-sum law for the largest squared overlap between a
random direction and k orthonormal histories, and the asymptotic epsilon at
which a random extension of a k-history set becomes acceptable.

Monte Carlo piece: `estimate_percentiles` samples hypothetical extensions of
exactly consistent history sets. Per sample, k+1 Haar orthonormal vectors in
dimension d1*d2 stand in for the histories, an independent Haar basis of the
first factor defines the candidate partitions, and the recorded value is the
minimum over partitions of the extension DHP of history zero (both projected
children judged against the k others). The empirical p-quantiles of that value
give epsilon(p, k). The single-partition variant normalized by both child
norms is kept alongside as a cross-check; pathwise it bounds the first
statistic from above and exceeds it by at most sqrt(2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import gue
from .schmidt import partitions


def reprojection_beta_cdf(lam: float, r: int) -> float:
    """CDF of the squared immediate-reprojection statistic: 1 - (1-lam)^(r-1).

    r is the rank of the projection being reapplied; lam is the squared ratio
    of the first component to the total broken-off norm.
    """
    if r < 2:
        raise ValueError("r must be >= 2")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    return 1.0 - (1.0 - lam) ** (r - 1)


def epsilon_for_reprojection_prob(q: float, r: int) -> float:
    """Epsilon at which an immediate reprojection is accepted with probability q."""
    if r < 2:
        raise ValueError("r must be >= 2")
    if not 0.0 <= q < 1.0:
        raise ValueError("q must lie in [0, 1)")
    return math.sqrt(1.0 - (1.0 - q) ** (1.0 / (r - 1)))


def initial_reprojection_floor(epsilon: float, r: int, support_norm_sq: float = 1.0) -> float:
    """Relative-delta floor epsilon^2 (r+1) * |P_support psi|^2.

    Choosing delta above this value blocks, at the expectation level, trivial
    reprojections of a rank-deficient initial state; r is the rank of the
    projection onto the unpopulated directions.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if not 0.0 < support_norm_sq <= 1.0 + 1e-12:
        raise ValueError("support_norm_sq must lie in (0, 1]")
    return epsilon**2 * (r + 1) * support_norm_sq


ABSOLUTE_REGIMES = ("order-one-norms", "delta-norms")


def absolute_threshold_ratio(q: float, d: int, regime: str = "order-one-norms") -> float:
    """Threshold ratio at which an absolute-criterion reprojection has probability q.

    The value d^{-1/2} sqrt(-log(1-q)) is the same in both regimes; the regime
    only says what it bounds: epsilon/sqrt(delta) when the competing branch
    norms are order one, epsilon/delta when they are themselves at the delta
    scale.
    """
    if regime not in ABSOLUTE_REGIMES:
        raise ValueError(f"regime must be one of {ABSOLUTE_REGIMES}")
    if d < 2:
        raise ValueError("d must be >= 2")
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    return math.sqrt(-math.log(1.0 - q) / d)


def consistent_set_cdf(lam: float, d: int, k: int) -> float:
    """P(max_i |<beta_i|v>|^2 < lam) for k orthonormal vectors in dimension d.

    Alternating sum over the uniform-simplex tail; terms with m*lam >= 1 drop
    out. k = 1 reduces to 1 - (1-lam)^(d-1).
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    if k < 1:
        raise ValueError("k must be >= 1")
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if lam >= 1.0:
        return 1.0
    total = 0.0
    for m in range(k + 1):
        if m * lam >= 1.0:
            break
        total += (-1) ** m * math.comb(k, m) * (1.0 - m * lam) ** (d - 1)
    return min(max(total, 0.0), 1.0)


@dataclass(frozen=True)
class AsymptoticEpsilon:
    exact: float
    approximate: float


def asymptotic_epsilon(d: int, k: int, p: float, n_p: int) -> AsymptoticEpsilon:
    """Epsilon scale at which a k-history set acquires a consistent extension.

    exact inverts the product law across n_p partitions and k histories at
    confidence p; approximate is the large-k shorthand sqrt(log(k)/d).
    """
    if d < 1 or k < 1 or n_p < 1:
        raise ValueError("need d >= 1, k >= 1, n_p >= 1")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    inner = (1.0 - (1.0 - p) ** (1.0 / n_p)) ** (1.0 / k)
    exact = math.sqrt(-math.log(1.0 - inner) / d)
    return AsymptoticEpsilon(exact=exact, approximate=math.sqrt(math.log(k) / d))


def _haar_columns_batch(rng: np.random.Generator, count: int, dim: int, cols: int) -> np.ndarray:
    a = rng.normal(size=(count, dim, cols)) + 1j * rng.normal(size=(count, dim, cols))
    q, r = np.linalg.qr(a)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (diag / np.abs(diag))[:, None, :]


def sample_extension_statistics(
    d1: int,
    d2: int,
    k: int,
    samples: int,
    rng: np.random.Generator,
    kind: str = "medium-dhc",
    batch: int = 512,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw the extension statistic for random exactly consistent sets.

    Returns (min_over_partitions, single_partition) arrays of length
    `samples`; see the module docstring for the construction.
    """
    if kind not in ("medium-dhc", "weak-dhc"):
        raise ValueError("kind must be medium-dhc or weak-dhc")
    d = d1 * d2
    if k + 1 > d:
        raise ValueError("cannot draw k+1 orthonormal vectors in dimension d1*d2")
    sides = partitions(d1)
    stat_min = np.empty(samples)
    stat_single = np.empty(samples)
    done = 0
    while done < samples:
        b = min(batch, samples - done)
        hist = _haar_columns_batch(rng, b, d, k + 1)
        alpha = hist[:, :, 0].reshape(b, d1, d2)
        beta = hist[:, :, 1:]
        basis = _haar_columns_batch(rng, b, d1, d1)
        per_partition = np.empty((b, len(sides)))
        for j, side in enumerate(sides):
            cols = basis[:, :, sorted(side)]
            q = cols @ cols.conj().swapaxes(-1, -2)
            a = (q @ alpha).reshape(b, d)
            bb = alpha.reshape(b, d) - a
            na = np.linalg.norm(a, axis=1)
            nb = np.linalg.norm(bb, axis=1)
            cross_a = np.einsum("bdk,bd->bk", beta.conj(), a)
            cross_b = np.einsum("bdk,bd->bk", beta.conj(), bb)
            if kind == "weak-dhc":
                cross_a, cross_b = np.abs(cross_a.real), np.abs(cross_b.real)
            else:
                cross_a, cross_b = np.abs(cross_a), np.abs(cross_b)
            with np.errstate(divide="ignore", invalid="ignore"):
                vals = np.maximum(
                    cross_a.max(axis=1) / na, cross_b.max(axis=1) / nb
                )
            vals[np.minimum(na, nb) ** 2 <= 1e-14] = np.inf
            per_partition[:, j] = vals
            if j == 0:
                with np.errstate(divide="ignore", invalid="ignore"):
                    single = cross_a.max(axis=1) / (na * nb)
                single[np.minimum(na, nb) ** 2 <= 1e-14] = np.inf
                stat_single[done : done + b] = single
        stat_min[done : done + b] = per_partition.min(axis=1)
        done += b
    return stat_min, stat_single


@dataclass(frozen=True)
class PercentileTable:
    """epsilon(p, k) grid estimated from `samples` draws per k."""

    d1: int
    d2: int
    k_values: tuple[int, ...]
    p_values: tuple[float, ...]
    epsilon: np.ndarray  # shape (len(k_values), len(p_values))
    samples: int
    seed: int
    kind: str = "medium-dhc"
    # same grid from the single-partition variant; None when loaded from disk
    epsilon_single: np.ndarray | None = None

    def lookup(self, p: float, k: float) -> float:
        """epsilon at column p, linearly interpolated in k and clamped at the edges."""
        try:
            col = self.p_values.index(p)
        except ValueError:
            raise ValueError(f"p={p} not among table columns {self.p_values}") from None
        ks = np.asarray(self.k_values, dtype=float)
        return float(np.interp(k, ks, self.epsilon[:, col]))


def estimate_percentiles(
    d1: int,
    d2: int,
    k_values,
    p_values,
    samples: int,
    seed: int,
    kind: str = "medium-dhc",
) -> PercentileTable:
    """Monte Carlo percentile table; each k uses its own derived substream."""
    k_values = tuple(int(k) for k in k_values)
    p_values = tuple(float(p) for p in p_values)
    if not k_values or not p_values:
        raise ValueError("k_values and p_values must be non-empty")
    if any(k < 1 for k in k_values):
        raise ValueError("k values must be >= 1")
    if any(b <= a for a, b in zip(k_values, k_values[1:])):
        # lookup interpolates in k, so the grid must be ascending
        raise ValueError("k values must be strictly increasing")
    if samples < 100:
        raise ValueError("need at least 100 samples per cell")
    for p in p_values:
        if not 0.0 < p < 1.0:
            raise ValueError("percentiles must lie strictly inside (0, 1)")
        if samples < 10.0 / p or samples < 10.0 / (1.0 - p):
            raise ValueError(
                f"{samples} samples cannot resolve percentile p={p}; "
                f"need at least {math.ceil(max(10.0 / p, 10.0 / (1.0 - p)))}"
            )
    grid = np.empty((len(k_values), len(p_values)))
    grid_single = np.empty_like(grid)
    for row, k in enumerate(k_values):
        rng = gue.substream(seed, k)
        stat_min, stat_single = sample_extension_statistics(d1, d2, k, samples, rng, kind)
        grid[row] = np.quantile(stat_min, p_values)
        grid_single[row] = np.quantile(stat_single, p_values)
    return PercentileTable(
        d1=d1,
        d2=d2,
        k_values=k_values,
        p_values=p_values,
        epsilon=grid,
        samples=samples,
        seed=seed,
        kind=kind,
        epsilon_single=grid_single,
    )


@dataclass(frozen=True)
class ThresholdReport:
    """Bundle of threshold-law evaluations for one set of inputs."""

    inputs: dict
    outputs: dict

    def __post_init__(self):
        for name, value in self.outputs.items():
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"output {name}={value!r} must be finite and >= 0")


def threshold_report(
    *,
    lam: float | None = None,
    q: float | None = None,
    r: int | None = None,
    d: int | None = None,
    k: int | None = None,
    p: float | None = None,
    n_p: int | None = None,
    epsilon: float | None = None,
    support_norm_sq: float = 1.0,
    regime: str = "order-one-norms",
) -> ThresholdReport:
    """Evaluate every threshold law whose inputs are present."""
    inputs = {
        name: value
        for name, value in (
            ("lam", lam), ("q", q), ("r", r), ("d", d), ("k", k), ("p", p),
            ("n_p", n_p), ("epsilon", epsilon),
            ("support_norm_sq", support_norm_sq), ("regime", regime),
        )
        if value is not None
    }
    outputs: dict[str, float] = {}
    if lam is not None and r is not None:
        outputs["reprojection_beta_cdf"] = reprojection_beta_cdf(lam, r)
    if q is not None and r is not None:
        outputs["epsilon_for_reprojection_prob"] = epsilon_for_reprojection_prob(q, r)
    if epsilon is not None and r is not None:
        outputs["initial_reprojection_floor"] = initial_reprojection_floor(
            epsilon, r, support_norm_sq
        )
    if q is not None and d is not None:
        key = (
            "epsilon_over_sqrt_delta"
            if regime == "order-one-norms"
            else "epsilon_over_delta"
        )
        outputs[key] = absolute_threshold_ratio(q, d, regime)
    if lam is not None and d is not None and k is not None:
        outputs["consistent_set_cdf"] = consistent_set_cdf(lam, d, k)
    if d is not None and k is not None and p is not None and n_p is not None:
        res = asymptotic_epsilon(d, k, p, n_p)
        outputs["asymptotic_epsilon_exact"] = res.exact
        outputs["asymptotic_epsilon_approximate"] = res.approximate
    if not outputs:
        raise ValueError("inputs do not select any threshold formula")
    return ThresholdReport(inputs=inputs, outputs=outputs)
