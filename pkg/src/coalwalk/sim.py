"""Monte Carlo simulation of coalescing walks, voter dynamics and token walks.

Trials are simulated in fixed-size batches, vectorised across trials.  All
randomness comes from :mod:`coalwalk.rng`, keyed by (seed, trial, step,
slot), so results are identical for any batch layout or worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rng
from .graph import Graph
from .spectral import PeriodicChainError

PROCESSES = ("coalescing", "voter", "tokens")
BATCH = 1024
Z95 = 1.959963984540054


class StepCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class ProcessConfig:
    """What to simulate and how many times.

    ``starts`` are the initial particle/token vertices (``None`` means one per
    vertex).  ``opinions`` is the initial voter opinion per vertex (``None``
    means all distinct).  ``step_cap`` defaults to ``10**7 * n``.
    """

    process: str
    graph: Graph
    lazy: bool = False
    starts: tuple[int, ...] | None = None
    opinions: tuple[int, ...] | None = None
    trials: int = 1000
    seed: int = 0
    step_cap: int | None = None
    allow_periodic: bool = False

    def __post_init__(self):
        if self.process not in PROCESSES:
            raise ValueError(f"process must be one of {PROCESSES}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.step_cap is not None and self.step_cap < 1:
            raise ValueError("step_cap must be >= 1")
        n = self.graph.n
        if self.starts is not None:
            if len(self.starts) == 0:
                raise ValueError("need at least one start vertex")
            if any(not 0 <= int(s) < n for s in self.starts):
                raise ValueError("start vertex out of range")
        if self.opinions is not None and len(self.opinions) != n:
            raise ValueError("need one opinion per vertex")

    @property
    def cap(self) -> int:
        return self.step_cap if self.step_cap is not None else 10**7 * self.graph.n


@dataclass(frozen=True)
class SampleStats:
    trials: int
    completed: int
    capped: int
    mean: float | None
    variance: float | None
    stderr: float | None
    ci95: tuple[float, float] | None
    censored_mean: float
    histogram: dict
    meeting: "SampleStats | None" = field(default=None)

    @classmethod
    def from_times(cls, times: np.ndarray, cap: int, meeting: "SampleStats | None" = None):
        """Summarise per-trial completion steps; ``-1`` marks a capped trial."""
        times = np.asarray(times, dtype=np.int64)
        done = times[times >= 0]
        capped = int((times < 0).sum())
        censored = np.where(times >= 0, times, cap).astype(float)
        if done.size:
            mean = float(done.mean())
            var = float(done.var(ddof=1)) if done.size > 1 else 0.0
            se = math.sqrt(var / done.size)
            ci = (mean - Z95 * se, mean + Z95 * se)
            lo, hi = int(done.min()), int(done.max())
            bins = min(20, hi - lo + 1)
            counts, edges = np.histogram(done, bins=bins, range=(lo, hi + 1))
            hist = {"edges": [float(e) for e in edges], "counts": counts.tolist()}
        else:
            mean = var = se = ci = None
            hist = {"edges": [], "counts": []}
        return cls(
            trials=int(times.size),
            completed=int(done.size),
            capped=capped,
            mean=mean,
            variance=var,
            stderr=se,
            ci95=ci,
            censored_mean=float(censored.mean()),
            histogram=hist,
            meeting=meeting,
        )

    def as_dict(self) -> dict:
        out = {
            "trials": self.trials,
            "completed": self.completed,
            "capped": self.capped,
            "mean": self.mean,
            "variance": self.variance,
            "stderr": self.stderr,
            "ci95": list(self.ci95) if self.ci95 is not None else None,
            "censored_mean": self.censored_mean,
            "histogram": self.histogram,
        }
        if self.meeting is not None:
            out["meeting"] = self.meeting.as_dict()
        return out


# ---------------------------------------------------------------------------
# batch kernels (module-level so they pickle for worker processes)


def _coalesce_batch(graph: Graph, lazy: bool, starts, seed: int, lo: int, hi: int, cap: int):
    n = graph.n
    offsets, targets = graph.csr()
    deg = np.diff(offsets)
    trials = np.arange(lo, hi)
    B, K = trials.size, len(starts)
    keys = rng.trial_keys(seed, trials)

    pos = np.tile(np.sort(np.asarray(starts, dtype=np.int64)), (B, 1))
    dup = np.zeros(pos.shape, dtype=bool)
    dup[:, 1:] = pos[:, 1:] == pos[:, :-1]
    pos[dup] = n
    pos.sort(axis=1)
    alive = (pos < n).sum(axis=1)

    coal = np.full(B, -1, dtype=np.int64)
    meet = np.full(B, -1, dtype=np.int64)
    meet[alive < K] = 0
    coal[alive == 1] = 0
    active = np.flatnonzero(alive > 1)
    t = 0
    slots = np.arange(K, dtype=np.uint64)
    while active.size and t < cap:
        t += 1
        w = int(alive[active].max())
        cur = pos[active, :w]
        valid = cur < n
        v = np.where(valid, cur, 0)
        words = rng.draws(rng.step_keys(keys[active], t, rng.TAG_MOVE), slots[:w])
        nxt = targets[offsets[v] + rng.bounded(words, deg[v])]
        if lazy:
            nxt = np.where(rng.coin(words), v, nxt)
        nxt = np.where(valid, nxt, n)
        nxt.sort(axis=1)
        dup = np.zeros(nxt.shape, dtype=bool)
        dup[:, 1:] = nxt[:, 1:] == nxt[:, :-1]
        nxt[dup] = n
        nxt.sort(axis=1)
        cnt = (nxt < n).sum(axis=1)
        pos[active, :w] = nxt
        first = (cnt < alive[active]) & (meet[active] < 0)
        meet[active[first]] = t
        alive[active] = cnt
        finished = cnt == 1
        coal[active[finished]] = t
        active = active[~finished]
    return coal, meet


def _voter_batch(graph: Graph, lazy: bool, opinions, seed: int, lo: int, hi: int, cap: int):
    n = graph.n
    offsets, targets = graph.csr()
    deg = np.diff(offsets)
    trials = np.arange(lo, hi)
    B = trials.size
    keys = rng.trial_keys(seed, trials)
    op = np.tile(np.asarray(opinions, dtype=np.int64), (B, 1))
    count = np.full(B, len(set(opinions)), dtype=np.int64)
    done = np.full(B, -1, dtype=np.int64)
    done[count == 1] = 0
    active = np.flatnonzero(count > 1)
    verts = np.arange(n)
    slots = np.arange(n, dtype=np.uint64)
    t = 0
    while active.size and t < cap:
        t += 1
        words = rng.draws(rng.step_keys(keys[active], t, rng.TAG_MOVE), slots)
        src = targets[offsets[:-1][None, :] + rng.bounded(words, deg[None, :])]
        if lazy:
            src = np.where(rng.coin(words), verts[None, :], src)
        new = np.take_along_axis(op[active], src, axis=1)
        op[active] = new
        s = np.sort(new, axis=1)
        cnt = 1 + (s[:, 1:] != s[:, :-1]).sum(axis=1)
        count[active] = cnt
        finished = cnt == 1
        done[active[finished]] = t
        active = active[~finished]
    return done


def _run_batches(kernel, args: tuple, trials: int, cap: int, workers: int):
    bounds = [(lo, min(lo + BATCH, trials)) for lo in range(0, trials, BATCH)]
    jobs = [args + (lo, hi, cap) for lo, hi in bounds]
    if workers <= 1 or len(jobs) == 1:
        results = [kernel(*j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(kernel, *zip(*jobs)))
    return results


def _check_periodic(cfg: ProcessConfig) -> None:
    if not cfg.lazy and not cfg.allow_periodic and cfg.graph.is_bipartite():
        raise PeriodicChainError(
            "simple walk on a bipartite graph may never coalesce; use lazy=True"
        )


def simulate_coalescing(cfg: ProcessConfig, workers: int = 1) -> SampleStats:
    """Coalescence time; ``.meeting`` holds the first-meeting time statistics.

    Walkers move synchronously; walkers sharing a vertex after a step merge.
    Crossing along an edge is not a meeting.
    """
    _check_periodic(cfg)
    starts = tuple(range(cfg.graph.n)) if cfg.starts is None else tuple(cfg.starts)
    res = _run_batches(
        _coalesce_batch, (cfg.graph, cfg.lazy, starts, cfg.seed), cfg.trials, cfg.cap, workers
    )
    coal = np.concatenate([r[0] for r in res])
    meet = np.concatenate([r[1] for r in res])
    meeting = SampleStats.from_times(meet, cfg.cap) if len(starts) > 1 else None
    return SampleStats.from_times(coal, cfg.cap, meeting=meeting)


def simulate_tokens(cfg: ProcessConfig, workers: int = 1) -> SampleStats:
    """Israeli-Jalfon token walks: stabilisation time until one token is left.

    Same dynamics and random streams as :func:`simulate_coalescing`.
    """
    return simulate_coalescing(cfg, workers)


def simulate_voter(cfg: ProcessConfig, workers: int = 1) -> SampleStats:
    _check_periodic(cfg)
    n = cfg.graph.n
    opinions = tuple(range(n)) if cfg.opinions is None else tuple(cfg.opinions)
    res = _run_batches(
        _voter_batch, (cfg.graph, cfg.lazy, opinions, cfg.seed), cfg.trials, cfg.cap, workers
    )
    return SampleStats.from_times(np.concatenate(res), cfg.cap)


def simulate(cfg: ProcessConfig, workers: int = 1) -> SampleStats:
    if cfg.process == "voter":
        return simulate_voter(cfg, workers)
    if cfg.process == "tokens":
        return simulate_tokens(cfg, workers)
    return simulate_coalescing(cfg, workers)


def simulate_avoidance(
    graph: Graph, lazy: bool, v: int, u: int, t: int, trials: int, seed: int = 0
) -> tuple[float, float]:
    """Monte Carlo estimate and standard error of ``Pr(A_v(t; u))``."""
    offsets, targets = graph.csr()
    deg = np.diff(offsets)
    keys = rng.trial_keys(seed, np.arange(trials))
    pos = np.full(trials, u, dtype=np.int64)
    alive = pos != v
    zero = np.zeros(1, dtype=np.uint64)
    for step in range(1, t + 1):
        idx = np.flatnonzero(alive)
        if not idx.size:
            break
        cur = pos[idx]
        words = rng.draws(rng.step_keys(keys[idx], step, rng.TAG_AVOID), zero)[:, 0]
        nxt = targets[offsets[cur] + rng.bounded(words, deg[cur])]
        if lazy:
            nxt = np.where(rng.coin(words), cur, nxt)
        pos[idx] = nxt
        alive[idx] = nxt != v
    p = float(alive.mean())
    return p, math.sqrt(p * (1 - p) / trials)


def simulate_meeting(
    graph: Graph, starts: Sequence[int], lazy: bool, trials: int, seed: int = 0, workers: int = 1
) -> SampleStats:
    cfg = ProcessConfig("coalescing", graph, lazy=lazy, starts=tuple(starts), trials=trials, seed=seed)
    return simulate_coalescing(cfg, workers).meeting
