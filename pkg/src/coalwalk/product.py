"""k-fold product chains, their diagonal (collision) set and its collapse.

A state of the product chain is a k-tuple of vertices, encoded as the base-n
integer ``v_1 n^(k-1) + ... + v_k``.  The diagonal set holds the tuples with
at least one repeated vertex; visiting it is a meeting of two walkers.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .graph import Graph
from .spectral import Chain, ChainError, hitting_times_to, tensor_chain, walk_chain

STATE_CAP = 10**5


class StateCapError(ChainError):
    pass


def tuple_states(n: int, k: int) -> np.ndarray:
    """``(n**k, k)`` array of coordinates, row ``i`` being the tuple coded by ``i``."""
    idx = np.arange(n**k, dtype=np.int64)
    cols = [(idx // n ** (k - 1 - j)) % n for j in range(k)]
    return np.stack(cols, axis=1) if cols else idx[:, None]


def diagonal_mask(n: int, k: int) -> np.ndarray:
    coords = tuple_states(n, k)
    s = np.sort(coords, axis=1)
    return np.any(s[:, 1:] == s[:, :-1], axis=1) if k > 1 else np.zeros(n, dtype=bool)


def encode(tup, n: int) -> int:
    code = 0
    for v in tup:
        code = code * n + int(v)
    return code


@dataclass(frozen=True, eq=False)
class ProductChain:
    graph: Graph
    k: int
    chain: Chain
    diagonal: np.ndarray  # sorted state indices in S_k

    @property
    def size(self) -> int:
        return self.chain.size


def build_product(graph: Graph, k: int, lazy: bool = False, cap: int = STATE_CAP) -> ProductChain:
    if k < 1:
        raise ValueError("k must be >= 1")
    N = graph.n**k
    if N > cap:
        raise StateCapError(f"n^k = {N} states exceeds cap {cap}")
    base = walk_chain(graph, lazy)
    if k == 1:
        chain = base
    else:
        chain = tensor_chain([base] * k)
    mask = diagonal_mask(graph.n, k)
    return ProductChain(graph=graph, k=k, chain=chain, diagonal=np.flatnonzero(mask))


# ---------------------------------------------------------------------------
# exact diagonal degree


def elementary_symmetric(values, k: int) -> int:
    """``e_k(values)`` in exact integer arithmetic (O(len(values) * k))."""
    e = [1] + [0] * k
    for x in values:
        for j in range(k, 0, -1):
            e[j] += e[j - 1] * x
    return e[k]


def diagonal_degree(graph: Graph, k: int) -> int:
    """Total product-graph degree of the diagonal set, ``d(S_k)``.

    The product degree of a tuple is the product of its coordinate degrees, so
    the collision-free tuples carry ``k! e_k(d_1..d_n)`` and the diagonal
    gets the rest of ``(2m)^k``.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    return (2 * graph.m) ** k - math.factorial(k) * elementary_symmetric(graph.degrees, k)


def diagonal_degree_bruteforce(graph: Graph, k: int) -> int:
    deg = graph.degrees
    total = 0
    for tup in itertools.product(range(graph.n), repeat=k):
        if len(set(tup)) < k:
            total += math.prod(deg[v] for v in tup)
    return total


def diagonal_mass(graph: Graph, k: int) -> Fraction:
    """Exact stationary mass of the diagonal set, ``d(S_k) / (2m)^k``."""
    return Fraction(diagonal_degree(graph, k), (2 * graph.m) ** k)


# ---------------------------------------------------------------------------
# collapse


@dataclass(frozen=True, eq=False)
class CollapsedChain:
    chain: Chain
    gamma: int  # index of the collapsed state (always last)
    kept: np.ndarray  # product-state index of each non-gamma state
    source: ProductChain

    @property
    def pi_gamma(self) -> float:
        return float(self.chain.pi[self.gamma])


def collapse_diagonal(prod: ProductChain) -> CollapsedChain:
    """Collapse the diagonal set to one state ``gamma``.

    Rows out of ``gamma`` are the pi-weighted average of the diagonal rows;
    the chain stays reversible with ``pi_gamma = pi(S)``.
    """
    S = prod.diagonal
    if S.size == 0:
        raise ChainError("diagonal set is empty (k < 2)")
    N = prod.size
    pi = prod.chain.pi
    in_s = np.zeros(N, dtype=bool)
    in_s[S] = True
    kept = np.flatnonzero(~in_s)
    M = kept.size + 1
    gamma = M - 1
    col = np.full(N, gamma, dtype=np.int64)
    col[kept] = np.arange(kept.size)
    agg = sp.csr_matrix((np.ones(N), (np.arange(N), col)), shape=(N, M))
    pi_s = pi[S].sum()
    w_rows = np.concatenate([np.arange(kept.size), np.full(S.size, gamma)])
    w_cols = np.concatenate([kept, S])
    w_vals = np.concatenate([np.ones(kept.size), pi[S] / pi_s])
    W = sp.csr_matrix((w_vals, (w_rows, w_cols)), shape=(M, N))
    P = sp.csr_matrix(W @ prod.chain.sparse() @ agg)
    pi_hat = np.concatenate([pi[kept], [pi_s]])
    chain = Chain(P=P, pi=pi_hat, labels=(), lazy=prod.chain.lazy)
    return CollapsedChain(chain=chain, gamma=gamma, kept=kept, source=prod)


@dataclass(frozen=True, eq=False)
class GammaHitting:
    mean: float  # E_pihat(H_gamma)
    times: np.ndarray  # over product states; 0 on the diagonal
    n: int

    def from_tuple(self, tup) -> float:
        return float(self.times[encode(tup, self.n)])


def hit_gamma(col: CollapsedChain) -> GammaHitting:
    """Exact expected hitting time of ``gamma`` from the collapsed stationary law."""
    h = hitting_times_to(col.chain, col.gamma)
    mean = float(col.chain.pi @ h)
    full = np.zeros(col.source.size)
    full[col.kept] = h[: col.kept.size]
    return GammaHitting(mean=mean, times=full, n=col.source.graph.n)
