"""The standard small-graph corpus used by the property and acceptance checks."""
from __future__ import annotations

from .graph import Graph, generate

# (family, n, params); randomised families use seed 1000 + position.
STANDARD = [
    *[("complete", n, {}) for n in (3, 4, 5, 8, 12)],
    *[("cycle", n, {}) for n in (3, 4, 5, 8, 13, 20)],
    *[("path", n, {}) for n in (2, 3, 4, 7, 12, 20)],
    *[("star", n, {}) for n in (4, 5, 8, 16, 30)],
    *[("dumbbell", n, {}) for n in (8, 12, 16, 20, 30)],
    *[("random_regular", n, {"r": 3}) for n in (8, 10, 14, 20, 30)],
    *[("random_regular", n, {"r": 4}) for n in (9, 15, 24)],
    *[("power_law", n, {"alpha": a}) for a in (2.2, 2.5, 2.8) for n in (12, 20, 28)],
    *[("erdos_renyi", n, {"p": p}) for p in (0.2, 0.3, 0.5) for n in (10, 15, 25)],
]


def standard_corpus(max_n: int = 30) -> list[tuple[str, Graph]]:
    """Deterministic list of ``(label, graph)`` with every family represented."""
    out = []
    for i, (family, n, params) in enumerate(STANDARD):
        g = generate(family, n, seed=1000 + i, **params)
        if g.n > max_n:
            continue
        extra = ",".join(f"{k}={v}" for k, v in params.items())
        out.append((f"{family}(n={g.n}{',' + extra if extra else ''})", g))
    return out
