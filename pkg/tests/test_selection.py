import numpy as np
import pytest

from schmidt_histories import gue, selection, stats
from schmidt_histories.histories import (
    DEAD_FLOOR,
    ConsistencyCriterion,
    HistoryTree,
    TrivialityCriterion,
    apply_extension,
    evaluate_extension,
    evolve,
)
from schmidt_histories.linalg import HermitianOperator, eigendecompose, propagator
from schmidt_histories.schmidt import (
    BipartiteState,
    continuity_align,
    partition_projectors,
    random_initial_state,
    schmidt_decompose,
)


def reference_run(cfg):
    """Exhaustive selection on a 10x finer fixed grid, no bisection.

    Mirrors the run() state preparation exactly, then detects qualifying
    extensions by brute force at every fine-grid instant with the scalar
    evaluator. Event times land on the first fine instant past the true
    crossing, so they may lag run() by at most one fine step.
    """
    d = cfg.d1 * cfg.d2
    h = gue.sample_gue(gue.GueSpec(d, cfg.sigma), gue.substream(cfg.seed, 0))
    spectral = eigendecompose(HermitianOperator(h))
    state0 = random_initial_state(cfg.d1, cfg.d2, cfg.rank, gue.substream(cfg.seed, 1))
    psi0 = state0.vector
    tree = HistoryTree(state0)
    criterion = ConsistencyCriterion(cfg.criterion_kind, cfg.epsilon)
    triviality = TrivialityCriterion(cfg.delta_mode, cfg.delta)
    fine = cfg.dt / 10.0
    align = None
    events = []

    def try_instant(t):
        nonlocal align
        psi_t = propagator(spectral, t) @ psi0
        dec = schmidt_decompose(BipartiteState(psi_t, cfg.d1, cfg.d2))
        if dec.degenerate:
            return
        if align is not None:
            dec = continuity_align(dec, align)
        align = dec
        while True:
            best = None
            for leaf_id in tree.live_leaf_ids():
                for part in partition_projectors(dec):
                    v = evaluate_extension(tree, leaf_id, part, criterion, triviality)
                    if v.consistent and not v.trivial:
                        key = (v.dhp, leaf_id, part.index)
                        if best is None or key < best[0]:
                            best = (key, part, v)
            if best is None:
                return
            _, part, v = best
            apply_extension(tree, v.leaf, part, t)
            events.append(
                (t, v.leaf, tuple(sorted(part.side)), part.index, v.dhp,
                 v.child_probabilities)
            )

    try_instant(0.0)
    n = round(cfg.t_max / fine)
    for k in range(1, n + 1):
        t = k * fine
        evolve(tree, propagator(spectral, fine), fine)
        tree.time = t
        try_instant(t)
    return events, tree


@pytest.mark.parametrize("rank", [None, 1])
def test_matches_fine_grid_reference(rank):
    cfg = selection.RunConfig(
        d1=2, d2=3, schmidt_rank=rank, seed=3,
        epsilon=0.12 if rank is None else 0.1,
        delta=1e-6, dt=0.05, t_max=3.0,
    )
    rec = selection.run(cfg)
    ref_events, ref_tree = reference_run(cfg)
    assert len(rec.events) == len(ref_events) >= 2
    fine = cfg.dt / 10.0
    for got, ref in zip(rec.events, ref_events):
        t_ref, leaf_ref, side_ref, pidx_ref, dhp_ref, probs_ref = ref
        assert got.leaf_id == leaf_ref
        assert got.side == side_ref
        assert got.partition_index == pidx_ref
        # run() bisects to the crossing, the reference lags by < one fine step
        assert -cfg.bisect_tol <= t_ref - got.t <= fine + cfg.bisect_tol
        assert got.dhp == pytest.approx(dhp_ref, abs=0.02)
        assert got.child_probabilities == pytest.approx(probs_ref, abs=0.02)
    assert len(rec.tree.live_leaf_ids()) == len(ref_tree.live_leaf_ids())


def test_deterministic_rerun():
    cfg = selection.RunConfig(d1=3, d2=5, seed=11, epsilon=0.08, delta=1e-7, t_max=2.0)
    a = selection.run(cfg)
    b = selection.run(cfg)
    assert a.events == b.events
    assert a.steps == b.steps
    assert a.stop_reason == b.stop_reason
    assert sorted(a.tree.nodes) == sorted(b.tree.nodes)
    for i in a.tree.nodes:
        na, nb = a.tree.nodes[i], b.tree.nodes[i]
        assert na.probability == nb.probability
        assert np.array_equal(na.vector, nb.vector)


def test_accepted_events_respect_epsilon_and_delta():
    cfg = selection.RunConfig(d1=3, d2=5, seed=11, epsilon=0.08, delta=1e-7, t_max=2.0)
    rec = selection.run(cfg)
    assert rec.events, "expected at least the forced root event"
    assert rec.events[0].t == 0.0
    assert rec.events[0].dhp == 0.0
    times = [e.t for e in rec.events]
    assert times == sorted(times)
    for e in rec.events:
        assert e.dhp <= e.epsilon + 1e-12
        parent_prob = rec.tree.nodes[e.leaf_id].probability
        floor = max(cfg.delta * parent_prob, DEAD_FLOOR)
        assert min(e.child_probabilities) > floor - 1e-12
        assert tuple(rec.tree.nodes[e.leaf_id].children) == e.children
        assert sum(e.child_probabilities) == pytest.approx(parent_prob, abs=1e-9)


def test_tree_partition_invariants():
    cfg = selection.RunConfig(d1=3, d2=5, seed=11, epsilon=0.08, delta=1e-7, t_max=2.0)
    rec = selection.run(cfg)
    tree = rec.tree
    probs = [tree.nodes[i].probability for i in tree.leaf_ids()]
    assert sum(probs) == pytest.approx(1.0, abs=1e-9)
    d = cfg.d1 * cfg.d2
    h = gue.sample_gue(gue.GueSpec(d, cfg.sigma), gue.substream(cfg.seed, 0))
    spectral = eigendecompose(HermitianOperator(h))
    state0 = random_initial_state(cfg.d1, cfg.d2, cfg.rank, gue.substream(cfg.seed, 1))
    psi_final = propagator(spectral, rec.final_time) @ state0.vector
    total = tree.leaf_vectors().sum(axis=1)
    assert np.linalg.norm(total - psi_final) < 1e-9


def test_epsilon_zero_quiescence():
    for rank in (None, 1):
        cfg = selection.RunConfig(
            d1=3, d2=5, schmidt_rank=rank, seed=2, epsilon=0.0, delta=1e-8, t_max=3.0
        )
        rec = selection.run(cfg)
        assert len(rec.events) <= 1
        for e in rec.events:
            assert e.dhp == 0.0


def test_max_histories_stops_run():
    cfg = selection.RunConfig(
        d1=3, d2=5, seed=11, epsilon=0.5, delta=1e-9, t_max=5.0, max_histories=4
    )
    rec = selection.run(cfg)
    assert rec.stop_reason == "max-histories"
    assert len(rec.tree.live_leaf_ids()) == 4
    assert rec.final_time < cfg.t_max


def test_step_log_shape_and_flags():
    cfg = selection.RunConfig(d1=2, d2=3, seed=3, epsilon=0.12, delta=1e-6, dt=0.05, t_max=3.0)
    rec = selection.run(cfg)
    assert rec.steps[0].t == 0.0
    assert rec.steps[-1].t == pytest.approx(3.0)
    assert len(rec.steps) == 61
    assert rec.steps[0].projected  # forced root split happens at the first instant
    event_times = [e.t for e in rec.events if e.t > 0]
    flagged = [s.t for s in rec.steps if s.projected and s.t > 0]
    assert len(flagged) == len(event_times)
    for t_star, t_land in zip(event_times, flagged):
        assert t_land - cfg.dt - 1e-9 <= t_star <= t_land + 1e-9
    for s in rec.steps:
        assert s.leaf_count >= 1
        assert s.epsilon == cfg.epsilon
        if s.min_dhp is not None:
            assert s.min_dhp >= 0.0


def test_percentile_epsilon_schedule():
    table = stats.estimate_percentiles(2, 3, [1, 3, 5], [0.5], 200, seed=5)
    cfg = selection.RunConfig(
        d1=2, d2=3, seed=3, epsilon_mode="percentile", percentile_p=0.5,
        delta=1e-6, t_max=1.0,
    )
    rec = selection.run(cfg, percentile_table=table)
    assert rec.events
    for s in rec.steps:
        assert s.epsilon == table.lookup(0.5, s.leaf_count - 1)
    for e in rec.events:
        assert e.dhp <= e.epsilon + 1e-12


def test_percentile_table_pairing_validated():
    table = stats.estimate_percentiles(2, 3, [1, 3], [0.5], 200, seed=5)
    cfg = selection.RunConfig(
        d1=2, d2=3, seed=3, epsilon_mode="percentile", percentile_p=0.5, t_max=1.0
    )
    with pytest.raises(ValueError):
        selection.run(cfg)
    mismatched = selection.RunConfig(
        d1=3, d2=5, seed=3, epsilon_mode="percentile", percentile_p=0.5, t_max=1.0
    )
    with pytest.raises(ValueError):
        selection.run(mismatched, percentile_table=table)
    wrong_p = selection.RunConfig(
        d1=2, d2=3, seed=3, epsilon_mode="percentile", percentile_p=0.25, t_max=1.0
    )
    with pytest.raises(ValueError):
        selection.run(wrong_p, percentile_table=table)


def test_config_validation():
    with pytest.raises(ValueError):
        selection.RunConfig(d1=3, d2=2)
    with pytest.raises(ValueError):
        selection.RunConfig(d1=2, d2=3, schmidt_rank=3)
    with pytest.raises(ValueError):
        selection.RunConfig(d1=2, d2=3, criterion_kind="strong")
    with pytest.raises(ValueError):
        selection.RunConfig(d1=2, d2=3, epsilon_mode="percentile")
    with pytest.raises(ValueError):
        selection.RunConfig(d1=2, d2=3, bisect_tol=0.5, dt=0.01)
    with pytest.raises(ValueError):
        selection.RunConfig(d1=2, d2=3, max_histories=1)
    with pytest.raises(ValueError):
        selection.RunConfig(d1=2, d2=3, epsilon=-0.1)


def test_grid_targets():
    grid = selection._grid(0.01, 10.0)
    assert len(grid) == 1000
    assert grid[-1] == 10.0
    assert grid[0] == pytest.approx(0.01)
    assert selection._grid(0.3, 1.0) == pytest.approx([0.3, 0.6, 0.9, 1.0])
    assert selection._grid(0.5, 0.2) == [0.2]
