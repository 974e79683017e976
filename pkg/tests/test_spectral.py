import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings

from coalwalk.graph import complete_graph, cycle_graph, path_graph, star_graph
from coalwalk.spectral import (
    Chain,
    NonReversibleError,
    PeriodicChainError,
    fundamental_matrix,
    h_max,
    hitting_matrix,
    hitting_profile,
    hitting_times_to,
    mixing_time,
    spectrum,
    walk_chain,
)

from .conftest import connected_graphs
from .oracles import hitting_fractions, mixing_time_stepwise, walk_matrix_fractions


def test_p3_stationary():
    np.testing.assert_allclose(walk_chain(path_graph(3)).pi, [0.25, 0.5, 0.25])


def test_k4_lazy_matrix():
    P = walk_chain(complete_graph(4), lazy=True).P
    np.testing.assert_allclose(np.diag(P), 0.5)
    np.testing.assert_allclose(P[~np.eye(4, dtype=bool)], 1 / 6)


def test_k2_simple_periodic():
    ch = walk_chain(path_graph(2))
    np.testing.assert_array_equal(ch.P, [[0, 1], [1, 0]])
    assert spectrum(ch).lambda_min == pytest.approx(-1)
    assert ch.period() == 2


@pytest.mark.parametrize("n", [3, 4, 7])
def test_complete_graph_spectrum(n):
    # K_n simple walk: 1 and -1/(n-1) with multiplicity n-1; lazy maps x -> (1+x)/2
    s = spectrum(walk_chain(complete_graph(n)))
    assert s.lambda2 == pytest.approx(-1 / (n - 1), abs=1e-12)
    assert s.gap == pytest.approx(n / (n - 1), abs=1e-12)
    lz = spectrum(walk_chain(complete_graph(n), lazy=True))
    assert lz.lambda2 == pytest.approx((1 - 1 / (n - 1)) / 2, abs=1e-12)


def test_k4_values():
    assert spectrum(walk_chain(complete_graph(4))).gap == pytest.approx(4 / 3)
    assert spectrum(walk_chain(complete_graph(4), True)).gap == pytest.approx(2 / 3)


@pytest.mark.parametrize("n", [4, 5, 8])
def test_cycle_lazy_cosine_spectrum(n):
    expected = sorted(((1 + math.cos(2 * math.pi * j / n)) / 2 for j in range(n)), reverse=True)
    got = spectrum(walk_chain(cycle_graph(n), lazy=True)).eigenvalues
    np.testing.assert_allclose(got, expected, atol=1e-12)
    if n == 4:
        np.testing.assert_allclose(got, [1, 0.5, 0.5, 0], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(connected_graphs(max_n=9))
def test_chain_and_spectrum_invariants(g):
    for lazy in (False, True):
        ch = walk_chain(g, lazy)
        np.testing.assert_allclose(ch.P.sum(axis=1), 1, atol=1e-12)
        np.testing.assert_allclose(ch.pi @ ch.P, ch.pi, atol=1e-10)
        ch.check_reversible(1e-12)
        s = spectrum(ch)
        # independent route: non-symmetric eigensolve of P itself
        direct = np.sort(np.linalg.eigvals(ch.P).real)[::-1]
        np.testing.assert_allclose(s.eigenvalues, direct, atol=1e-8)
        assert s.eigenvalues[0] == pytest.approx(1, abs=1e-10)
        assert all(abs(x) <= 1 + 1e-10 for x in s.eigenvalues)
        if lazy:
            assert min(s.eigenvalues) >= -1e-10
            assert s.lam == pytest.approx(s.lambda2)


def test_non_reversible_rejected():
    P = np.array([[0.1, 0.9, 0.0], [0.0, 0.1, 0.9], [0.9, 0.0, 0.1]])
    ch = Chain(P=P, pi=np.full(3, 1 / 3), labels=(0, 1, 2))
    with pytest.raises(NonReversibleError):
        spectrum(ch)


def test_mixing_k4_lazy():
    # deviation (3/4)(1/3)^t first drops below 0.01 at t = 4
    assert mixing_time(walk_chain(complete_graph(4), True), 0.01) == 4


def test_mixing_k_n_coarse():
    t = mixing_time(walk_chain(complete_graph(6), True), 0.49)
    assert 1 <= t < 100


def test_mixing_bipartite_simple_refused():
    with pytest.raises(PeriodicChainError):
        mixing_time(walk_chain(cycle_graph(4)))


@settings(max_examples=30, deadline=None)
@given(connected_graphs(min_n=3, max_n=8))
def test_mixing_matches_stepwise(g):
    ch = walk_chain(g, True)
    for eps in (0.1, g.n**-3.0):
        assert mixing_time(ch, eps) == mixing_time_stepwise(ch.P, ch.pi, eps)


def test_k4_hitting_exact():
    for lazy, e_pi, z in ((False, 9 / 4, 9 / 16), (True, 9 / 2, 9 / 8)):
        prof = hitting_profile(walk_chain(complete_graph(4), lazy), 0)
        assert prof.pi_hitting == pytest.approx(e_pi, rel=1e-12)
        assert prof.zvv_identity == pytest.approx(z, rel=1e-12)
        assert prof.zvv_series == pytest.approx(z, abs=1e-8)
        assert not prof.flagged
        assert prof.times[0] == 0


def test_p3_leaf_hitting():
    g = path_graph(3)
    frac = hitting_fractions(walk_matrix_fractions(g, False), 0)
    assert frac[2] == 4
    prof = hitting_profile(walk_chain(g), 0)
    assert prof.times[2] == pytest.approx(4)
    assert h_max(walk_chain(g)) == pytest.approx(4)


@settings(max_examples=30, deadline=None)
@given(connected_graphs(max_n=7))
def test_hitting_solve_matches_rational_first_step(g):
    for lazy in (False, True):
        ch = walk_chain(g, lazy)
        P = walk_matrix_fractions(g, lazy)
        H = hitting_matrix(ch)
        for v in range(g.n):
            exact = [float(x) for x in hitting_fractions(P, v)]
            np.testing.assert_allclose(hitting_times_to(ch, v), exact, rtol=1e-9)
            np.testing.assert_allclose(H[:, v], exact, rtol=1e-9, atol=1e-9)


def test_fundamental_matrix_rows_sum_zero():
    Z = fundamental_matrix(walk_chain(star_graph(6), True))
    np.testing.assert_allclose(Z.sum(axis=1), 0, atol=1e-12)


def test_series_absent_for_periodic_chain():
    prof = hitting_profile(walk_chain(cycle_graph(4)), 0)
    assert prof.zvv_series is None
    assert prof.disagreement is None


def test_corpus_single_walk_invariants(corpus):
    """Hitting identity, Z_vv gap bound, gap floor, H_max sandwich on lazy chains."""
    for label, g in corpus:
        ch = walk_chain(g, True)
        s = spectrum(ch)
        assert s.gap >= 1 / (2 * g.n**2), label
        assert s.lam == pytest.approx(s.lambda2, abs=1e-12)
        hm = h_max(ch)
        dmin = min(g.degrees)
        assert g.m / (2 * dmin) <= hm <= 4 * g.m / (s.gap * dmin), label
        for v in range(g.n):
            p = hitting_profile(ch, v, s.lam)
            assert p.disagreement <= 1e-6, label
            assert p.zvv_identity <= 1 / s.gap, label
            assert p.pi_hitting == pytest.approx(float(ch.pi @ p.times), rel=1e-9)
