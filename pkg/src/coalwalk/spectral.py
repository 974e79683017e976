"""Random-walk Markov chains on graphs: spectra, mixing and hitting times.

Transition matrices are dense ``ndarray`` for single-walk chains and may be
``scipy.sparse`` for the larger product chains built in :mod:`coalwalk.product`.
Every routine that needs an eigendecomposition or matrix powers densifies,
and refuses above :data:`DENSE_CAP` states.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .graph import Graph

DENSE_CAP = 5000
SERIES_TOL = 1e-9


class ChainError(ValueError):
    pass


class PeriodicChainError(ChainError):
    """Raised where aperiodicity is required; the lazy walk is the remedy."""


class NonReversibleError(ChainError):
    pass


@dataclass(frozen=True, eq=False)
class Chain:
    P: np.ndarray | sp.csr_matrix
    pi: np.ndarray
    labels: tuple
    lazy: bool = False

    @property
    def size(self) -> int:
        return self.P.shape[0]

    def dense(self) -> np.ndarray:
        if sp.issparse(self.P):
            if self.size > DENSE_CAP:
                raise ChainError(f"{self.size} states exceeds dense cap {DENSE_CAP}")
            return self.P.toarray()
        return self.P

    def sparse(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.P)

    def period(self) -> int:
        """Period of the (irreducible) chain from BFS levels of its support."""
        M = self.sparse()
        level = np.full(self.size, -1, dtype=np.int64)
        level[0] = 0
        frontier = [0]
        g = 0
        indptr, indices = M.indptr, M.indices
        data = M.data
        while frontier:
            nxt = []
            for u in frontier:
                for k in range(indptr[u], indptr[u + 1]):
                    if data[k] <= 0:
                        continue
                    w = indices[k]
                    if level[w] < 0:
                        level[w] = level[u] + 1
                        nxt.append(w)
                    else:
                        g = math.gcd(g, int(level[u] + 1 - level[w]))
            frontier = nxt
        return g if g else 1

    def check_reversible(self, atol: float = 1e-12) -> None:
        M = self.sparse()
        flow = sp.diags(self.pi) @ M
        diff = abs(flow - flow.T)
        if diff.nnz and diff.max() > atol:
            raise NonReversibleError(f"detailed balance violated by {diff.max():.3g}")


def walk_chain(graph: Graph, lazy: bool = False) -> Chain:
    """Simple (or lazy) random walk: ``P(v, w) = 1/d(v)``; lazy is ``(I + P)/2``."""
    n = graph.n
    P = np.zeros((n, n))
    for v, nbrs in enumerate(graph.adjacency):
        P[v, list(nbrs)] = 1.0 / len(nbrs)
    if lazy:
        P = 0.5 * (np.eye(n) + P)
    deg = np.array(graph.degrees, dtype=float)
    pi = deg / deg.sum()
    return Chain(P=P, pi=pi, labels=tuple(range(n)), lazy=lazy)


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: tuple[float, ...]

    @property
    def lambda2(self) -> float:
        return self.eigenvalues[1]

    @property
    def lambda_min(self) -> float:
        return self.eigenvalues[-1]

    @property
    def lam(self) -> float:
        return max(self.lambda2, abs(self.lambda_min))

    @property
    def gap(self) -> float:
        return 1.0 - self.lambda2

    def as_dict(self) -> dict:
        return {
            "lambda2": self.lambda2,
            "lambda_min": self.lambda_min,
            "lambda": self.lam,
            "gap": self.gap,
            "eigenvalues": list(self.eigenvalues),
        }


def spectrum(chain: Chain) -> Spectrum:
    """Real spectrum through the symmetric conjugate ``D^1/2 P D^-1/2``."""
    chain.check_reversible()
    P = chain.dense()
    s = np.sqrt(chain.pi)
    A = (s[:, None] * P) / s[None, :]
    A = 0.5 * (A + A.T)
    ev = np.linalg.eigvalsh(A)[::-1]
    return Spectrum(tuple(float(x) for x in ev))


def _max_deviation(Pt: np.ndarray, pi: np.ndarray) -> float:
    return float(np.abs(Pt - pi[None, :]).max())


def mixing_time(chain: Chain, eps: float | None = None) -> int:
    """Smallest t with ``max_{u,x} |P^t(u,x) - pi_x| <= eps``.

    The max deviation is non-increasing in t, so the search doubles through
    ``P^(2^j)`` and then binary-lifts back down.  Default ``eps = N**-3``.
    """
    if eps is None:
        eps = float(chain.size) ** -3
    if eps <= 0:
        raise ValueError("eps must be positive")
    if chain.period() != 1:
        raise PeriodicChainError("chain is periodic (bipartite simple walk); use the lazy walk")
    P = chain.dense()
    pi = chain.pi
    current = np.eye(chain.size)
    if _max_deviation(current, pi) <= eps:
        return 0
    powers = [P]
    while _max_deviation(powers[-1], pi) > eps:
        if len(powers) > 60:
            raise ChainError("mixing time search did not converge")
        powers.append(powers[-1] @ powers[-1])
    t = 0
    for j in range(len(powers) - 1, -1, -1):
        cand = current @ powers[j]
        if _max_deviation(cand, pi) > eps:
            current = cand
            t += 1 << j
    return t + 1


# ---------------------------------------------------------------------------
# hitting times


def hitting_times_to(chain: Chain, target: int | Sequence[int]) -> np.ndarray:
    """Expected hitting times of ``target`` from every state (exact linear solve).

    States from which the target set is unreachable get ``inf``.
    """
    targets = np.atleast_1d(np.asarray(target, dtype=np.int64))
    N = chain.size
    M = chain.sparse()
    reach = _can_reach(M, targets)
    h = np.full(N, np.inf)
    h[targets] = 0.0
    free = np.flatnonzero(reach)
    free = free[~np.isin(free, targets)]
    if free.size:
        sub = M[free][:, free]
        A = sp.identity(free.size, format="csc") - sub.tocsc()
        if free.size <= 2000:
            x = sla.solve(A.toarray(), np.ones(free.size))
        else:
            x = spla.spsolve(A, np.ones(free.size))
        if not np.all(np.isfinite(x)):
            raise ChainError("hitting-time system is singular")
        h[free] = x
    return h


def _can_reach(M: sp.csr_matrix, targets: np.ndarray) -> np.ndarray:
    """Boolean mask of states with a positive-probability path into ``targets``."""
    R = sp.csr_matrix(M.T)
    seen = np.zeros(M.shape[0], dtype=bool)
    seen[targets] = True
    frontier = np.asarray(targets)
    while frontier.size:
        nb = np.unique(R[frontier].indices)
        nb = nb[~seen[nb]]
        seen[nb] = True
        frontier = nb
    return seen


def fundamental_matrix(chain: Chain) -> np.ndarray:
    """``Z = (I - P + 1 pi^T)^-1 - 1 pi^T`` for an irreducible chain."""
    P = chain.dense()
    Pi = np.tile(chain.pi, (chain.size, 1))
    return np.linalg.inv(np.eye(chain.size) - P + Pi) - Pi


def hitting_matrix(chain: Chain) -> np.ndarray:
    """All-pairs ``H[u, v] = E(H_{u,v}) = (Z_vv - Z_uv) / pi_v``."""
    Z = fundamental_matrix(chain)
    H = (np.diag(Z)[None, :] - Z) / chain.pi[None, :]
    np.fill_diagonal(H, 0.0)
    return H


def h_max(chain: Chain) -> float:
    return float(hitting_matrix(chain).max())


def zvv_series(chain: Chain, v: int, lam: float | None = None) -> float | None:
    """Truncated ``sum_t (P^t(v,v) - pi_v)``; stops once ``lam^t/(1-lam) < 1e-9``.

    Returns ``None`` when ``lam >= 1`` (periodic chain), where the series
    does not converge.
    """
    if lam is None:
        lam = spectrum(chain).lam
    if lam >= 1 - 1e-12:
        return None
    P = chain.dense()
    pi_v = chain.pi[v]
    row = np.zeros(chain.size)
    row[v] = 1.0
    total = 0.0
    t = 0
    power = 1.0
    while True:
        total += row[v] - pi_v
        t += 1
        power *= lam
        if power / (1 - lam) < SERIES_TOL:
            break
        row = row @ P
    return total


@dataclass(frozen=True)
class HittingProfile:
    target: int
    times: np.ndarray
    pi_hitting: float
    zvv_identity: float
    zvv_series: float | None

    @property
    def disagreement(self) -> float | None:
        if self.zvv_series is None:
            return None
        return abs(self.zvv_identity - self.zvv_series)

    @property
    def flagged(self) -> bool:
        d = self.disagreement
        return d is not None and d > 1e-6


def hitting_profile(chain: Chain, v: int, lam: float | None = None) -> HittingProfile:
    """Hitting times into ``v`` and two independent routes to ``Z_vv``.

    ``zvv_identity`` is ``pi_v * E_pi(H_v)`` from the linear solve;
    ``zvv_series`` sums the return-probability excess directly.
    """
    h = hitting_times_to(chain, v)
    if not np.all(np.isfinite(h)):
        raise ChainError(f"vertex {v} unreachable from some state")
    e_pi = float(chain.pi @ h)
    return HittingProfile(
        target=v,
        times=h,
        pi_hitting=e_pi,
        zvv_identity=float(chain.pi[v] * e_pi),
        zvv_series=zvv_series(chain, v, lam),
    )


def tensor_chain(chains: Sequence[Chain]) -> Chain:
    """Independent product of chains (sparse Kronecker product)."""
    P = reduce(lambda a, b: sp.kron(a, b, format="csr"), [c.sparse() for c in chains])
    pi = reduce(np.kron, [c.pi for c in chains])
    return Chain(P=P, pi=pi, labels=(), lazy=all(c.lazy for c in chains))
