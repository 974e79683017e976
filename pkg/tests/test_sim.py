import json

import numpy as np
import pytest

from coalwalk import rng
from coalwalk.exact import exact_coalescence_time, exact_meeting_time, exact_voter_time, survival_probability
from coalwalk.graph import complete_graph, cycle_graph, path_graph, star_graph
from coalwalk.sim import (
    ProcessConfig,
    SampleStats,
    _coalesce_batch,
    simulate,
    simulate_avoidance,
    simulate_coalescing,
    simulate_meeting,
    simulate_tokens,
    simulate_voter,
)
from coalwalk.spectral import PeriodicChainError


def test_bounded_is_in_range_and_roughly_uniform():
    words = rng.draws(rng.trial_keys(3, np.arange(20000)), np.arange(1, dtype=np.uint64))[:, 0]
    x = rng.bounded(words, np.full(words.size, 7))
    assert x.min() == 0 and x.max() == 6
    counts = np.bincount(x, minlength=7)
    assert np.all(np.abs(counts - 20000 / 7) < 5 * np.sqrt(20000 / 7))
    assert abs(rng.coin(words).mean() - 0.5) < 0.02


def test_trial_streams_differ():
    k = rng.trial_keys(0, np.arange(1000))
    assert np.unique(k).size == 1000
    assert not np.array_equal(rng.trial_keys(1, np.arange(5)), rng.trial_keys(0, np.arange(5)))


def test_meeting_k4_lazy_mc():
    st = simulate_meeting(complete_graph(4), (0, 1), lazy=True, trials=20000, seed=11)
    assert abs(st.mean - 4.5) <= 3 * st.stderr


def test_coalescence_p2_lazy_mc():
    st = simulate_coalescing(ProcessConfig("coalescing", path_graph(2), lazy=True, trials=20000, seed=2))
    assert abs(st.mean - 2.0) <= 3 * st.stderr


def test_voter_p3_lazy_mc():
    g = path_graph(3)
    st = simulate_voter(ProcessConfig("voter", g, lazy=True, trials=20000, seed=5))
    assert abs(st.mean - exact_voter_time(g, lazy=True)) <= 3 * st.stderr


def test_coalescing_c5_simple_mc():
    g = cycle_graph(5)
    st = simulate(ProcessConfig("coalescing", g, trials=20000, seed=8))
    assert abs(st.mean - exact_coalescence_time(g)) <= 3 * st.stderr


def test_trivial_starts():
    g = cycle_graph(6)
    st = simulate_coalescing(ProcessConfig("coalescing", g, lazy=True, starts=(2, 2, 2), trials=10))
    assert st.mean == 0 and st.meeting.mean == 0
    st = simulate_tokens(ProcessConfig("tokens", g, lazy=True, starts=(4,), trials=10))
    assert st.mean == 0 and st.meeting is None


def test_tokens_equal_coalescing():
    g = star_graph(6)
    a = simulate(ProcessConfig("tokens", g, lazy=True, starts=(1, 2, 3), trials=300, seed=4))
    b = simulate(ProcessConfig("coalescing", g, lazy=True, starts=(1, 2, 3), trials=300, seed=4))
    assert a.as_dict() == b.as_dict()


def test_voter_single_opinion():
    g = cycle_graph(5)
    st = simulate_voter(ProcessConfig("voter", g, lazy=True, opinions=(3,) * 5, trials=10))
    assert st.mean == 0


def test_cap_is_a_prefix_of_the_same_run():
    """Raising the step cap never changes a trial that already finished."""
    g = cycle_graph(9)
    starts = tuple(range(g.n))
    full, full_meet = _coalesce_batch(g, True, starts, 1, 0, 64, 10**6)
    assert np.all(full >= 0) and np.all(full_meet <= full)
    for cap in (1, 5, 20, 60):
        coal, _ = _coalesce_batch(g, True, starts, 1, 0, 64, cap)
        done = coal >= 0
        np.testing.assert_array_equal(coal[done], full[done])
        np.testing.assert_array_equal(done, full <= cap)


def test_bipartite_refusal():
    with pytest.raises(PeriodicChainError):
        simulate(ProcessConfig("coalescing", cycle_graph(6), trials=10))
    with pytest.raises(PeriodicChainError):
        simulate(ProcessConfig("voter", path_graph(3), trials=10))


def test_capped_trials_reported():
    cfg = ProcessConfig("coalescing", path_graph(2), trials=50, step_cap=30, allow_periodic=True)
    st = simulate(cfg)
    assert st.capped == 50 and st.completed == 0
    assert st.mean is None and st.censored_mean == 30


def test_config_validation():
    g = path_graph(3)
    with pytest.raises(ValueError):
        ProcessConfig("walk", g)
    with pytest.raises(ValueError):
        ProcessConfig("coalescing", g, trials=0)
    with pytest.raises(ValueError):
        ProcessConfig("coalescing", g, starts=(0, 9))
    with pytest.raises(ValueError):
        ProcessConfig("voter", g, opinions=(0, 1))


def test_sample_stats_summary():
    st = SampleStats.from_times(np.array([1, 2, 3, -1]), cap=10)
    assert st.completed == 3 and st.capped == 1
    assert st.mean == 2 and st.variance == 1
    assert st.censored_mean == pytest.approx(4.0)
    assert sum(st.histogram["counts"]) == 3
    json.dumps(st.as_dict())


@pytest.mark.slow
def test_repeated_seeds_coverage():
    """100 seeded runs; at least 99% land within 4 SE of the exact meeting time."""
    g = complete_graph(4)
    exact = exact_meeting_time(g, (0, 1), lazy=True)
    hits = 0
    for seed in range(100):
        st = simulate_meeting(g, (0, 1), lazy=True, trials=2000, seed=seed)
        hits += abs(st.mean - exact) <= 4 * st.stderr
    assert hits >= 99


def test_avoidance_mc_matches_exact():
    g = star_graph(6)
    for u, v, t in [(1, 0, 3), (1, 2, 10), (0, 3, 15)]:
        p, se = simulate_avoidance(g, True, v, u, t, trials=40000, seed=t)
        exact = survival_probability(g, True, v, u, t)
        assert abs(p - exact) <= 4 * max(se, 1e-4)


def test_worker_independence():
    g = cycle_graph(7)
    cfg = ProcessConfig("coalescing", g, lazy=True, trials=2500, seed=99)
    base = json.dumps(simulate(cfg, workers=1).as_dict())
    assert json.dumps(simulate(cfg, workers=3).as_dict()) == base
