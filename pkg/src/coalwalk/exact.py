"""Exact absorbing-chain oracles for meeting, coalescence and voting times.

The full-process oracles enumerate every joint move of all particles (or
all voters), so they are limited to ``n <= FULL_PROCESS_CAP``.
"""
from __future__ import annotations

import math
from collections import defaultdict
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .graph import Graph
from .product import STATE_CAP, StateCapError, build_product, encode
from .spectral import hitting_times_to, walk_chain

FULL_PROCESS_CAP = 6


def _move_distribution(graph: Graph, lazy: bool) -> list[list[tuple[int, float]]]:
    """Per-vertex list of (destination, probability) for one step."""
    out = []
    for v, nbrs in enumerate(graph.adjacency):
        d = len(nbrs)
        if lazy:
            out.append([(v, 0.5)] + [(w, 0.5 / d) for w in nbrs])
        else:
            out.append([(w, 1.0 / d) for w in nbrs])
    return out


def _absorption_times(states: list, trans: dict, absorbing: set) -> dict:
    """Expected steps to absorption; ``inf`` where absorption is unreachable."""
    # backwards reachability from absorbing states
    preds = defaultdict(set)
    for s, row in trans.items():
        for t in row:
            preds[t].add(s)
    reach = set(absorbing)
    stack = list(absorbing)
    while stack:
        t = stack.pop()
        for s in preds[t]:
            if s not in reach:
                reach.add(s)
                stack.append(s)
    live = [s for s in states if s in reach and s not in absorbing]
    times = {s: 0.0 for s in absorbing}
    times.update({s: math.inf for s in states if s not in reach})
    if live:
        pos = {s: i for i, s in enumerate(live)}
        A = np.eye(len(live))
        for s in live:
            i = pos[s]
            for t, p in trans[s].items():
                j = pos.get(t)
                if j is not None:
                    A[i, j] -= p
        x = sla.solve(A, np.ones(len(live)))
        times.update(zip(live, x.tolist()))
    return times


# ---------------------------------------------------------------------------
# coalescing particles: occupied-set chain


def occupied_set_transitions(graph: Graph, lazy: bool) -> dict[int, dict[int, float]]:
    """Transition law of the occupied vertex set (bitmask) of coalescing walkers."""
    moves = _move_distribution(graph, lazy)
    n = graph.n
    trans = {}
    for A in range(1, 1 << n):
        dist = {0: 1.0}
        for v in range(n):
            if not A >> v & 1:
                continue
            nxt = defaultdict(float)
            for img, p in dist.items():
                for w, q in moves[v]:
                    nxt[img | (1 << w)] += p * q
            dist = nxt
        trans[A] = dict(dist)
    return trans


def coalescence_times(graph: Graph, lazy: bool = False) -> dict[int, float]:
    """Expected coalescence time from every occupied set (bitmask keys)."""
    if graph.n > FULL_PROCESS_CAP:
        raise StateCapError(f"exact full process limited to n <= {FULL_PROCESS_CAP}")
    trans = occupied_set_transitions(graph, lazy)
    states = list(trans)
    absorbing = {1 << v for v in range(graph.n)}
    return _absorption_times(states, trans, absorbing)


def exact_coalescence_time(graph: Graph, lazy: bool = False) -> float:
    """E(C_n): one particle per vertex until a single particle remains."""
    return coalescence_times(graph, lazy)[(1 << graph.n) - 1]


# ---------------------------------------------------------------------------
# voter model: partition chain


def _canonical(labels: Sequence[int]) -> tuple[int, ...]:
    seen: dict[int, int] = {}
    return tuple(seen.setdefault(x, len(seen)) for x in labels)


def _all_partitions(n: int):
    """Restricted-growth strings of length n."""
    def rec(prefix, top):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for b in range(top + 2):
            yield from rec(prefix + [b], max(top, b))
    yield from rec([0], 0)


def partition_transitions(graph: Graph, lazy: bool) -> dict[tuple, dict[tuple, float]]:
    """Synchronous voter update on opinion partitions.

    Every vertex copies the old opinion of its source (a uniform neighbour, or
    itself with probability 1/2 when lazy).  Only the block of the source
    matters, so each vertex contributes a distribution over old blocks.
    """
    moves = _move_distribution(graph, lazy)
    trans = {}
    for part in _all_partitions(graph.n):
        per_vertex = []
        for v in range(graph.n):
            q = defaultdict(float)
            for s, p in moves[v]:
                q[part[s]] += p
            per_vertex.append(list(q.items()))
        dist = {(): 1.0}
        for q in per_vertex:
            nxt = defaultdict(float)
            for prefix, p in dist.items():
                for b, pb in q:
                    nxt[prefix + (b,)] += p * pb
            dist = nxt
        row = defaultdict(float)
        for labels, p in dist.items():
            row[_canonical(labels)] += p
        trans[part] = dict(row)
    return trans


def voter_times(graph: Graph, lazy: bool = False) -> dict[tuple, float]:
    if graph.n > FULL_PROCESS_CAP:
        raise StateCapError(f"exact full process limited to n <= {FULL_PROCESS_CAP}")
    trans = partition_transitions(graph, lazy)
    absorbing = {(0,) * graph.n}
    return _absorption_times(list(trans), trans, absorbing)


def exact_voter_time(
    graph: Graph, lazy: bool = False, initial: Sequence[int] | None = None
) -> float:
    """E(C_v): all-distinct opinions (or ``initial``) until one opinion remains."""
    start = tuple(range(graph.n)) if initial is None else _canonical(initial)
    return voter_times(graph, lazy)[start]


# ---------------------------------------------------------------------------
# meeting time and avoidance


def exact_meeting_time(
    graph: Graph, starts: Sequence[int], lazy: bool = False, cap: int = STATE_CAP
) -> float:
    """Expected first collision time of walkers started at ``starts``.

    Solved directly on the product chain with the diagonal as the absorbing
    set.  Coinciding starts give 0; ``inf`` if the walkers can never collide.
    """
    starts = [int(s) for s in starts]
    if any(not 0 <= s < graph.n for s in starts):
        raise ValueError("start vertex out of range")
    if len(set(starts)) < len(starts):
        return 0.0
    if len(starts) < 2:
        raise ValueError("need at least two walkers")
    prod = build_product(graph, len(starts), lazy, cap=cap)
    h = hitting_times_to(prod.chain, prod.diagonal)
    return float(h[encode(starts, graph.n)])


def meeting_times(graph: Graph, k: int, lazy: bool = False, cap: int = STATE_CAP) -> np.ndarray:
    """Expected meeting time from every k-tuple (indexed by product-state code)."""
    prod = build_product(graph, k, lazy, cap=cap)
    return hitting_times_to(prod.chain, prod.diagonal)


def survival_curve(graph: Graph, lazy: bool, v: int, t_max: int) -> np.ndarray:
    """``out[t, u] = Pr(walk from u avoids v during steps 0..t)`` for ``t <= t_max``."""
    P = walk_chain(graph, lazy).P
    keep = np.array([u for u in range(graph.n) if u != v])
    sub = P[np.ix_(keep, keep)]
    out = np.zeros((t_max + 1, graph.n))
    s = np.ones(keep.size)
    out[0, keep] = s
    for t in range(1, t_max + 1):
        s = sub @ s
        out[t, keep] = s
    return out


def survival_probability(graph: Graph, lazy: bool, v: int, u: int, t: int) -> float:
    """Exact ``Pr(A_v(t; u))`` by powering the walk matrix with ``v`` removed."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if u == v:
        return 0.0
    P = walk_chain(graph, lazy).P
    keep = [x for x in range(graph.n) if x != v]
    sub = P[np.ix_(keep, keep)]
    row = np.zeros(len(keep))
    row[keep.index(u)] = 1.0
    for _ in range(t):
        row = row @ sub
    return float(row.sum())
