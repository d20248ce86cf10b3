"""Time-stepped selection of consistent history extensions.

A run draws one GUE Hamiltonian and one random initial state, then walks a
fixed time grid. At each grid instant every live branch is tentatively split
by every co-moving Schmidt partition of the evolved total state; a split
qualifies when it is non-trivial and its worst decoherence pair does not
exceed the current epsilon. When a grid landing qualifies, bisection locates
the earliest qualifying instant inside the step, the most consistent
qualifying split is applied there, and the instant is re-scanned until
nothing further qualifies before the walk resumes.

Instants whose Schmidt spectrum is degenerate below the resolution of the
continuity tracking are skipped; a long consecutive streak of skipped
landings aborts the run. Runs also stop at the time horizon or once the live
branch count reaches the configured ceiling.

Branch vectors are advanced with the exact spectral propagator; the total
state used for the Schmidt frame is always propagated directly from t = 0, so
no integration error accumulates. With epsilon = 0 only extensions whose
decoherence is exactly zero in floating point are ever applied. The first
split of a lone root is compared against nothing and carries the value 0.0 by
convention, so a run may open with at most one such forced event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import gue
from .histories import (
    CONSISTENCY_KINDS,
    TRIVIALITY_MODES,
    ConsistencyCriterion,
    HistoryTree,
    TrivialityCriterion,
    apply_extension,
    evolve,
    scan_candidates,
)
from .linalg import HermitianOperator, eigendecompose, propagator
from .schmidt import (
    BipartiteState,
    continuity_align,
    partition_projectors,
    random_initial_state,
    schmidt_decompose,
)
from .stats import PercentileTable

EPSILON_MODES = ("const", "percentile")

# consecutive skipped grid landings tolerated before aborting
MAX_CONSECUTIVE_DEGENERATE = 10


def epsilon_schedule(
    kind: str,
    k: int,
    table: PercentileTable | None = None,
    epsilon: float | None = None,
    p: float | None = None,
) -> float:
    """Consistency threshold for extending one history judged against k others.

    Constant kind returns `epsilon` unchanged; percentile kind looks up
    table epsilon(p, k), interpolating linearly in k and clamping at the
    table edges.
    """
    if kind == "const":
        if epsilon is None:
            raise ValueError("constant schedule needs epsilon")
        return epsilon
    if kind == "percentile":
        if table is None or not table.k_values:
            raise ValueError("percentile schedule needs a non-empty table")
        if p is None:
            raise ValueError("percentile schedule needs p")
        return table.lookup(p, k)
    raise ValueError(f"kind must be one of {EPSILON_MODES}")


@dataclass(frozen=True)
class RunConfig:
    d1: int
    d2: int
    schmidt_rank: int | None = None  # None selects full rank d1
    seed: int = 0
    criterion_kind: str = "medium-dhc"
    epsilon: float = 0.05
    epsilon_mode: str = "const"
    percentile_p: float | None = None
    delta: float = 1e-8
    delta_mode: str = "relative"
    dt: float = 0.01
    t_max: float = 10.0
    bisect_tol: float = 1e-6
    max_histories: int = 64
    max_steps: int | None = None
    sigma: float = gue.DEFAULT_SIGMA

    def __post_init__(self):
        if self.d1 < 2 or self.d2 < self.d1:
            raise ValueError("need 2 <= d1 <= d2")
        rank = self.schmidt_rank
        if rank is not None and not 1 <= rank <= self.d1:
            raise ValueError("schmidt_rank must lie in 1..d1")
        if self.criterion_kind not in CONSISTENCY_KINDS:
            raise ValueError(f"criterion_kind must be one of {CONSISTENCY_KINDS}")
        if self.epsilon_mode not in EPSILON_MODES:
            raise ValueError(f"epsilon_mode must be one of {EPSILON_MODES}")
        if self.epsilon_mode == "percentile" and self.percentile_p is None:
            raise ValueError("percentile epsilon mode needs percentile_p")
        if self.delta_mode not in TRIVIALITY_MODES:
            raise ValueError(f"delta_mode must be one of {TRIVIALITY_MODES}")
        if self.epsilon < 0 or self.delta < 0:
            raise ValueError("epsilon and delta must be >= 0")
        if self.dt <= 0 or self.t_max <= 0:
            raise ValueError("dt and t_max must be positive")
        if not 0 < self.bisect_tol < self.dt:
            raise ValueError("bisect_tol must lie in (0, dt)")
        if self.max_histories < 2:
            raise ValueError("max_histories must be >= 2")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def rank(self) -> int:
        return self.d1 if self.schmidt_rank is None else self.schmidt_rank


@dataclass(frozen=True)
class StepRecord:
    t: float
    min_dhp: float | None  # best non-trivial candidate value; None when none exists
    epsilon: float
    leaf_count: int
    projected: bool


@dataclass(frozen=True)
class EventRecord:
    t: float
    leaf_id: int
    side: tuple[int, ...]
    partition_index: int
    dhp: float
    child_probabilities: tuple[float, float]
    children: tuple[int, int]
    epsilon: float


@dataclass
class RunRecord:
    config: RunConfig
    steps: list[StepRecord]
    events: list[EventRecord]
    tree: HistoryTree
    stop_reason: str  # "t-max", "max-steps", "max-histories" or "degeneracy"

    @property
    def final_time(self) -> float:
        return self.tree.time


@dataclass(frozen=True)
class _Scan:
    degenerate: bool
    epsilon: float
    live_ids: tuple[int, ...] = ()
    parts: tuple = ()
    aligned: object = None
    values: np.ndarray | None = None
    child_probs: np.ndarray | None = None
    min_dhp: float | None = None
    best: tuple[int, int] | None = None  # (leaf position, partition index)


def _grid(dt: float, t_max: float) -> list[float]:
    ratio = t_max / dt
    n = int(round(ratio))
    if n >= 1 and abs(n - ratio) < 1e-6:
        return [k * dt for k in range(1, n)] + [t_max]
    n = int(math.floor(ratio))
    return [k * dt for k in range(1, n + 1)] + [t_max]


def run(config: RunConfig, percentile_table: PercentileTable | None = None) -> RunRecord:
    """Execute one seeded selection run; deterministic for fixed inputs."""
    if config.epsilon_mode == "percentile":
        if percentile_table is None:
            raise ValueError("percentile epsilon mode needs a percentile table")
        t = percentile_table
        if (t.d1, t.d2) != (config.d1, config.d2) or t.kind != config.criterion_kind:
            raise ValueError(
                "percentile table was estimated for "
                f"d1={t.d1} d2={t.d2} kind={t.kind}, run wants "
                f"d1={config.d1} d2={config.d2} kind={config.criterion_kind}"
            )
        t.lookup(config.percentile_p, 1)  # fail fast on a missing column

    d1, d2 = config.d1, config.d2
    d = d1 * d2
    hamiltonian = gue.sample_gue(gue.GueSpec(d, config.sigma), gue.substream(config.seed, 0))
    spectral = eigendecompose(HermitianOperator(hamiltonian))
    state0 = random_initial_state(d1, d2, config.rank, gue.substream(config.seed, 1))
    psi0 = state0.vector

    tree = HistoryTree(state0)
    triviality = TrivialityCriterion(config.delta_mode, config.delta)
    criterion = ConsistencyCriterion(config.criterion_kind, config.epsilon)
    align_ref = [None]

    def epsilon_at(live_count: int) -> float:
        # the extension of one among live_count branches is judged against
        # the other live_count - 1
        return epsilon_schedule(
            config.epsilon_mode,
            live_count - 1,
            table=percentile_table,
            epsilon=config.epsilon,
            p=config.percentile_p,
        )

    def scan(t_abs: float) -> _Scan:
        live_ids = tuple(tree.live_leaf_ids())
        eps = epsilon_at(len(live_ids))
        psi_t = propagator(spectral, t_abs) @ psi0
        dec = schmidt_decompose(BipartiteState(psi_t, d1, d2))
        if dec.degenerate:
            return _Scan(degenerate=True, epsilon=eps)
        if align_ref[0] is not None:
            dec = continuity_align(dec, align_ref[0])
        parts = tuple(partition_projectors(dec))
        q_stack = np.stack([p.q for p in parts])
        step_u = propagator(spectral, t_abs - tree.time)
        vectors = step_u @ tree.leaf_vectors(live_ids)
        probs = np.array([tree.nodes[i].probability for i in live_ids])
        values, trivial, child_probs = scan_candidates(
            vectors, probs, q_stack, criterion, triviality, d1, d2
        )
        min_dhp = float(values[~trivial].min()) if np.any(~trivial) else None
        qualifying = (values <= eps) & ~trivial
        best = None
        if np.any(qualifying):
            # leaf-major flattening breaks exact ties by leaf id, then
            # partition index
            masked = np.where(qualifying, values, np.inf).T
            flat = int(np.argmin(masked))
            best = divmod(flat, len(parts))
        return _Scan(
            degenerate=False,
            epsilon=eps,
            live_ids=live_ids,
            parts=parts,
            aligned=dec,
            values=values,
            child_probs=child_probs,
            min_dhp=min_dhp,
            best=best,
        )

    def advance(t_target: float) -> None:
        delta = t_target - tree.time
        if delta < 0:
            raise RuntimeError("cannot advance backwards")
        if delta == 0.0:
            return
        evolve(tree, propagator(spectral, delta), delta)
        tree.time = t_target

    def bisect(lo: float, hi: float, at_hi: _Scan) -> tuple[float, _Scan]:
        while hi - lo > config.bisect_tol:
            mid = 0.5 * (lo + hi)
            at_mid = scan(mid)
            if not at_mid.degenerate and at_mid.best is not None:
                hi, at_hi = mid, at_mid
            else:
                lo = mid
        return hi, at_hi

    steps: list[StepRecord] = []
    events: list[EventRecord] = []
    stop = None

    def apply_events_at(t_star: float, outcome: _Scan) -> None:
        nonlocal stop
        advance(t_star)
        align_ref[0] = outcome.aligned
        while outcome.best is not None:
            leaf_pos, part_idx = outcome.best
            leaf_id = outcome.live_ids[leaf_pos]
            part = outcome.parts[part_idx]
            pa, pb = outcome.child_probs[part_idx, leaf_pos]
            ids = apply_extension(tree, leaf_id, part, t_star)
            events.append(
                EventRecord(
                    t=t_star,
                    leaf_id=leaf_id,
                    side=tuple(sorted(part.side)),
                    partition_index=part.index,
                    dhp=float(outcome.values[part_idx, leaf_pos]),
                    child_probabilities=(float(pa), float(pb)),
                    children=ids,
                    epsilon=outcome.epsilon,
                )
            )
            if len(tree.live_leaf_ids()) >= config.max_histories:
                stop = "max-histories"
                return
            outcome = scan(t_star)
            if outcome.degenerate:
                return

    def folded_min(landing_min: float | None, first_event: int) -> float | None:
        # flagged rows report the most consistent candidate seen within the
        # step, which includes every accepted extension
        vals = [e.dhp for e in events[first_event:]]
        if landing_min is not None:
            vals.append(landing_min)
        return min(vals) if vals else None

    # instant zero: a qualifying split is applied before any evolution
    first = scan(0.0)
    consecutive_degenerate = 0
    if first.degenerate:
        consecutive_degenerate = 1
        steps.append(StepRecord(0.0, None, first.epsilon, len(tree.live_leaf_ids()), False))
    else:
        align_ref[0] = first.aligned
        had_events = first.best is not None
        if had_events:
            apply_events_at(0.0, first)
        landing = scan(0.0) if had_events and stop is None else first
        min_dhp = folded_min(None if landing.degenerate else landing.min_dhp, 0)
        steps.append(
            StepRecord(0.0, min_dhp, landing.epsilon, len(tree.live_leaf_ids()), had_events)
        )

    steps_done = 0
    if stop is None:
        for t_k in _grid(config.dt, config.t_max):
            projected = False
            first_event = len(events)
            while True:
                outcome = scan(t_k)
                if outcome.degenerate:
                    consecutive_degenerate += 1
                    advance(t_k)
                    steps.append(
                        StepRecord(
                            t_k,
                            folded_min(None, first_event),
                            outcome.epsilon,
                            len(tree.live_leaf_ids()),
                            projected,
                        )
                    )
                    if consecutive_degenerate > MAX_CONSECUTIVE_DEGENERATE:
                        stop = "degeneracy"
                    break
                if outcome.best is None:
                    consecutive_degenerate = 0
                    advance(t_k)
                    align_ref[0] = outcome.aligned
                    steps.append(
                        StepRecord(
                            t_k,
                            folded_min(outcome.min_dhp, first_event),
                            outcome.epsilon,
                            len(tree.live_leaf_ids()),
                            projected,
                        )
                    )
                    break
                t_star, at_star = bisect(tree.time, t_k, outcome)
                apply_events_at(t_star, at_star)
                projected = True
                if stop is not None:
                    break
            steps_done += 1
            if stop is None and config.max_steps is not None and steps_done >= config.max_steps:
                stop = "max-steps"
            if stop is not None:
                break

    return RunRecord(
        config=config,
        steps=steps,
        events=events,
        tree=tree,
        stop_reason=stop or "t-max",
    )
