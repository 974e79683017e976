"""Undirected simple connected graphs, example families and degree statistics."""
from __future__ import annotations

import hashlib
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, TextIO

import numpy as np


class GraphError(ValueError):
    """Invalid graph input (parse failure, self-loop, bad index)."""


class DisconnectedGraphError(GraphError):
    pass


class EdgeListParseError(GraphError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class Graph:
    """Immutable undirected simple connected graph on vertices ``0..n-1``.

    Edges are stored as sorted pairs ``(u, v)`` with ``u < v``, listed in
    lexicographic order.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    adjacency: tuple[tuple[int, ...], ...] = field(repr=False, compare=False)

    def __init__(self, n: int, edges: Iterable[tuple[int, int]]):
        if n < 2:
            raise GraphError("a graph needs at least two vertices")
        canon = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise GraphError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u}, {v}) out of range for n={n}")
            canon.add((min(u, v), max(u, v)))
        ordered = tuple(sorted(canon))
        nbrs: list[list[int]] = [[] for _ in range(n)]
        for u, v in ordered:
            nbrs[u].append(v)
            nbrs[v].append(u)
        adjacency = tuple(tuple(sorted(a)) for a in nbrs)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", ordered)
        object.__setattr__(self, "adjacency", adjacency)
        if not _is_connected(adjacency):
            raise DisconnectedGraphError("graph is not connected")

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.adjacency)

    def is_bipartite(self) -> bool:
        colour = [-1] * self.n
        colour[0] = 0
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for w in self.adjacency[u]:
                if colour[w] < 0:
                    colour[w] = 1 - colour[u]
                    queue.append(w)
                elif colour[w] == colour[u]:
                    return False
        return True

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Neighbour arrays ``(offsets, targets)`` in compressed-row form."""
        deg = np.array(self.degrees, dtype=np.int64)
        offsets = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(deg, out=offsets[1:])
        targets = np.fromiter(
            (w for a in self.adjacency for w in a), dtype=np.int64, count=2 * self.m
        )
        return offsets, targets

    def digest(self) -> str:
        return hashlib.sha256(serialize(self).encode()).hexdigest()


def _is_connected(adjacency) -> bool:
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for w in adjacency[u]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(adjacency)


@dataclass(frozen=True)
class DegreeStats:
    n: int
    m: int
    min_degree: int
    max_degree: int
    sum_sq: int

    @property
    def avg_degree(self) -> float:
        return 2 * self.m / self.n

    @property
    def nu_exact(self) -> Fraction:
        # n * sum d^2 / (2m)^2
        return Fraction(self.n * self.sum_sq, (2 * self.m) ** 2)

    @property
    def nu(self) -> float:
        return float(self.nu_exact)

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "min_degree": self.min_degree,
            "max_degree": self.max_degree,
            "avg_degree": self.avg_degree,
            "nu": self.nu,
        }


def degree_stats(graph: Graph) -> DegreeStats:
    deg = graph.degrees
    return DegreeStats(
        n=graph.n,
        m=graph.m,
        min_degree=min(deg),
        max_degree=max(deg),
        sum_sq=sum(d * d for d in deg),
    )


# ---------------------------------------------------------------------------
# edge-list I/O


def load_edge_list(stream: TextIO | str, n: int | None = None) -> Graph:
    """Parse a whitespace-separated edge list.

    Lines starting with ``#`` and blank lines are skipped.  The vertex count
    is ``max index + 1`` unless ``n`` is given.
    """
    if isinstance(stream, str):
        lines = stream.splitlines()
    else:
        lines = stream.read().splitlines()
    edges = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListParseError(lineno, f"expected two vertex indices, got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListParseError(lineno, f"non-integer vertex in {line!r}") from None
        if u < 0 or v < 0:
            raise EdgeListParseError(lineno, "vertex indices must be non-negative")
        if n is not None and (u >= n or v >= n):
            raise EdgeListParseError(lineno, f"vertex index out of range for n={n}")
        if u == v:
            raise EdgeListParseError(lineno, f"self-loop at vertex {u}")
        edges.append((u, v))
    if not edges:
        raise GraphError("edge list is empty")
    size = n if n is not None else 1 + max(max(e) for e in edges)
    return Graph(size, edges)


def read_edge_list(path) -> Graph:
    with open(path, encoding="utf-8") as fh:
        return load_edge_list(fh)


def serialize(graph: Graph, header: Iterable[str] = ()) -> str:
    lines = [f"# {h}" for h in header]
    lines.extend(f"{u} {v}" for u, v in graph.edges)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# generators

FAMILIES = (
    "complete",
    "cycle",
    "path",
    "star",
    "dumbbell",
    "random_regular",
    "power_law",
    "erdos_renyi",
)

MAX_ATTEMPTS = 200


def complete_graph(n: int) -> Graph:
    return Graph(n, ((u, v) for u in range(n) for v in range(u + 1, n)))


def path_graph(n: int) -> Graph:
    return Graph(n, ((i, i + 1) for i in range(n - 1)))


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise GraphError("a cycle needs n >= 3")
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def star_graph(n: int) -> Graph:
    """Centre 0 joined to leaves ``1..n-1``."""
    return Graph(n, ((0, i) for i in range(1, n)))


def dumbbell_graph(n: int) -> Graph:
    """Two cliques of ``n // 4`` vertices joined through a path of the rest.

    The first clique is ``0..c-1`` and the second ``n-c..n-1``; path vertices
    sit in between, so the rounding remainder lands on the path.
    """
    c = n // 4
    if c < 2:
        raise GraphError("dumbbell needs n >= 8")
    edges = [(u, v) for u in range(c) for v in range(u + 1, c)]
    edges += [(u, v) for u in range(n - c, n) for v in range(u + 1, n)]
    # chain c-1 -> c -> ... -> n-c, linking the two cliques through the path
    edges += [(i, i + 1) for i in range(c - 1, n - c)]
    return Graph(n, edges)


def _rng_for_attempt(seed: int, attempt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), attempt]))


def random_regular_graph(n: int, r: int, seed: int = 0) -> Graph:
    import networkx as nx

    if r < 1 or r >= n:
        raise GraphError(f"need 1 <= r < n, got r={r}, n={n}")
    if (r * n) % 2:
        raise GraphError(f"r*n must be even (r={r}, n={n})")
    for attempt in range(MAX_ATTEMPTS):
        rng = _rng_for_attempt(seed, attempt)
        g = nx.random_regular_graph(r, n, seed=int(rng.integers(2**32)))
        try:
            return Graph(n, g.edges())
        except DisconnectedGraphError:
            continue
    raise GraphError(f"no connected {r}-regular graph after {MAX_ATTEMPTS} attempts")


def power_law_degrees(scale: int, alpha: float) -> list[int]:
    """``ceil(scale / d**alpha)`` vertices of degree d for ``3 <= d <= sqrt(scale)``."""
    top = math.isqrt(scale)
    degs: list[int] = []
    for d in range(3, top + 1):
        degs.extend([d] * math.ceil(scale / d**alpha))
    return degs


def power_law_scale(n: int, alpha: float) -> int:
    """Smallest scale parameter whose degree sequence has at least ``n`` vertices."""
    if n < 4:
        raise GraphError("power_law needs n >= 4")
    lo, hi = 9, 9
    while len(power_law_degrees(hi, alpha)) < n:
        lo, hi = hi, hi * 2
    while lo < hi:
        mid = (lo + hi) // 2
        if len(power_law_degrees(mid, alpha)) >= n:
            hi = mid
        else:
            lo = mid + 1
    return lo


def power_law_graph(n: int, alpha: float = 2.5, seed: int = 0) -> Graph:
    """Erased configuration model over a truncated power-law degree sequence.

    ``n`` is a target: the degree-sequence scale is the smallest one giving at
    least ``n`` vertices, so the result may have a few more.  Stub pairs that
    would create a loop or a repeated edge are rejected (dropped).
    """
    if not 2 < alpha < 3:
        raise GraphError(f"power_law needs 2 < alpha < 3, got {alpha}")
    degs = power_law_degrees(power_law_scale(n, alpha), alpha)
    size = len(degs)
    stubs = np.repeat(np.arange(size), degs)
    for attempt in range(MAX_ATTEMPTS):
        rng = _rng_for_attempt(seed, attempt)
        perm = rng.permutation(stubs)
        if len(perm) % 2:
            perm = perm[:-1]
        pairs = perm.reshape(-1, 2)
        edges = {(int(min(a, b)), int(max(a, b))) for a, b in pairs if a != b}
        try:
            return Graph(size, edges)
        except DisconnectedGraphError:
            continue
    raise GraphError(f"no connected power-law graph after {MAX_ATTEMPTS} attempts")


def erdos_renyi_graph(n: int, p: float, seed: int = 0) -> Graph:
    if not 0 < p <= 1:
        raise GraphError(f"need 0 < p <= 1, got {p}")
    iu, ju = np.triu_indices(n, k=1)
    for attempt in range(MAX_ATTEMPTS):
        rng = _rng_for_attempt(seed, attempt)
        keep = rng.random(len(iu)) < p
        try:
            return Graph(n, zip(iu[keep].tolist(), ju[keep].tolist()))
        except DisconnectedGraphError:
            continue
    raise GraphError(f"G(n={n}, p={p}) not connected after {MAX_ATTEMPTS} attempts")


def generate(
    family: str,
    n: int,
    *,
    r: int | None = None,
    alpha: float | None = None,
    p: float | None = None,
    seed: int = 0,
) -> Graph:
    """Build a graph from one of :data:`FAMILIES`.

    Randomised families (``random_regular``, ``power_law``, ``erdos_renyi``)
    are deterministic in ``seed``; they retry with fresh seed-derived streams
    until the sample is connected.
    """
    family = family.replace("-", "_")
    if n < 2:
        raise GraphError("n must be at least 2")
    if family == "complete":
        return complete_graph(n)
    if family == "cycle":
        return cycle_graph(n)
    if family == "path":
        return path_graph(n)
    if family == "star":
        return star_graph(n)
    if family == "dumbbell":
        return dumbbell_graph(n)
    if family == "random_regular":
        if r is None:
            raise GraphError("random_regular needs r")
        return random_regular_graph(n, r, seed)
    if family == "power_law":
        return power_law_graph(n, 2.5 if alpha is None else alpha, seed)
    if family == "erdos_renyi":
        if p is None:
            raise GraphError("erdos_renyi needs p")
        return erdos_renyi_graph(n, p, seed)
    raise GraphError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
