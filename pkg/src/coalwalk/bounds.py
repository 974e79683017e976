"""Closed-form coalescence bounds and the report that checks them.

Rows come in four kinds:

``literal``
    an inequality with explicit constants; pass/fail.
``identity``
    an equality that must hold to numerical tolerance; pass/fail.
``ratio``
    a big-O expression with unknown constant; only the ratio
    measured/bound is reported, never a verdict.
``statistical`` / ``info``
    Monte Carlo agreement checks and plain values.

All logarithms are natural.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
import traceback
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .exact import FULL_PROCESS_CAP, coalescence_times, exact_voter_time, meeting_times
from .graph import DegreeStats, Graph, degree_stats
from .product import (
    STATE_CAP,
    build_product,
    collapse_diagonal,
    diagonal_degree,
    diagonal_mass,
    hit_gamma,
)
from .sim import ProcessConfig, simulate_coalescing
from .spectral import (
    DENSE_CAP,
    PeriodicChainError,
    Spectrum,
    hitting_matrix,
    hitting_profile,
    mixing_time,
    spectrum,
    walk_chain,
)

REL_TOL = 1e-9
LEMMA1_HORIZON = 20


class BoundsError(ValueError):
    """Bound evaluation refused (e.g. lambda2 < |lambda_n| on a simple walk)."""


def k_star(stats: DegreeStats) -> int:
    """Particle-count threshold ``floor(max{2, min{sqrt(n/nu), m/(2 Delta), ln n}})``."""
    inner = min(
        math.sqrt(stats.n / stats.nu),
        stats.m / (2 * stats.max_degree),
        math.log(stats.n),
    )
    return int(math.floor(max(2.0, inner)))


def require_lambda2_dominant(spec: Spectrum) -> None:
    if spec.lambda2 < abs(spec.lambda_min) - 1e-12:
        raise BoundsError(
            f"lambda2={spec.lambda2:.6g} < |lambda_n|={abs(spec.lambda_min):.6g}; "
            "bounds need lambda = lambda2, use the lazy walk"
        )


@dataclass(frozen=True)
class BoundValues:
    k: int
    coalescence: float  # (ln^4 n + n/nu) / gap
    coalescence_maxdeg: float  # ((m/Delta) ln n)^2 / gap
    meeting: float  # (k ln n + n/(nu k^2)) / gap
    gamma_hitting: float  # (8/k^2)(n/nu) / gap, explicit constant
    k_coalescence: float  # (k^2 ln n + n/nu) / gap


def bound_values(graph: Graph, spec: Spectrum, stats: DegreeStats, k: int = 2) -> BoundValues:
    """Evaluate the bracketed bound expressions (big-O constants omitted)."""
    require_lambda2_dominant(spec)
    gap = spec.gap
    n, nu = stats.n, stats.nu
    ln = math.log(n)
    return BoundValues(
        k=k,
        coalescence=(ln**4 + n / nu) / gap,
        coalescence_maxdeg=((stats.m / stats.max_degree) * ln) ** 2 / gap,
        meeting=(k * ln + n / (nu * k * k)) / gap,
        gamma_hitting=(8 / k**2) * (n / nu) / gap,
        k_coalescence=(k * k * ln + n / nu) / gap,
    )


def lemma1_bound(t: float, T: float, pi_hitting: float) -> float:
    """``exp(-floor(t / (T + 3 E_pi(H_v))))`` with a literal integer floor."""
    if t < 0 or T < 0 or pi_hitting < 0:
        raise ValueError("arguments must be non-negative")
    period = T + 3 * pi_hitting
    if period <= 0:
        raise ValueError("T + 3 E_pi(H_v) must be positive")
    return math.exp(-math.floor(t / period))


@dataclass(frozen=True)
class AvoidanceCheck:
    worst_ratio: float  # max survival / bound over checked (v, u, t)
    violations: int
    checked: int
    mixing_time: int


def lemma1_check(graph: Graph, lazy: bool = True, eps: float | None = None,
                 horizon: int = LEMMA1_HORIZON) -> AvoidanceCheck:
    """Compare exact avoidance probabilities with the restart bound.

    Checks every target v, start u and ``t <= horizon * (T + 3 E_pi(H_v))``
    with ``T`` the eps-mixing time (default ``eps = n**-3``).
    """
    n = graph.n
    chain = walk_chain(graph, lazy)
    if eps is None:
        eps = float(n) ** -3
    T = mixing_time(chain, eps)
    lam = spectrum(chain).lam
    periods = np.array([T + 3 * hitting_profile(chain, v, lam).pi_hitting for v in range(n)])
    t_max = int(math.floor(horizon * periods.max()))
    limit = np.floor(horizon * periods)
    # batched substochastic matrices, one per removed vertex
    subs = np.stack([np.delete(np.delete(chain.P, v, 0), v, 1) for v in range(n)])
    s = np.ones((n, n - 1, 1))
    worst = 1.0  # t = 0: survival 1 (u != v), bound 1
    violations = 0
    checked = n * (n - 1)
    for t in range(1, t_max + 1):
        s = subs @ s
        live = limit >= t
        if not live.any():
            break
        bound = np.exp(-np.floor(t / periods))
        ratio = s[:, :, 0] / bound[:, None]
        ratio = ratio[live]
        worst = max(worst, float(ratio.max()))
        violations += int((ratio > 1 + REL_TOL).sum())
        checked += ratio.size
    return AvoidanceCheck(worst_ratio=worst, violations=violations, checked=checked, mixing_time=T)


@dataclass(frozen=True)
class TStar:
    value: float
    k: int
    mixing: float
    mixing_source: str
    gamma_hitting: float
    gamma_hitting_source: str


def t_star(graph: Graph, lazy: bool = True, mode: str = "auto", cap: int = STATE_CAP,
           eps: float | None = None) -> TStar:
    """``k* ln n (T_Gamma + 3 E_pihat(H_gamma))`` with Gamma = Gamma_{k*}.

    ``mode="exact"`` insists on the exact collapsed chain, ``"bound"`` uses
    the explicit hitting-time bound and the ``k* T_G`` mixing surrogate,
    ``"auto"`` uses exact factors when the chain fits under the caps.
    """
    stats = degree_stats(graph)
    chain = walk_chain(graph, lazy)
    spec = spectrum(chain)
    require_lambda2_dominant(spec)
    k = k_star(stats)
    n = graph.n
    if eps is None:
        eps = float(n) ** -3
    fits = n**k <= min(cap, DENSE_CAP)
    if mode == "exact" and not fits:
        raise BoundsError(f"Gamma_{k} has up to {n**k} states, above the exact cap")
    if mode != "bound" and fits:
        col = collapse_diagonal(build_product(graph, k, lazy, cap=cap))
        mix = float(mixing_time(col.chain, eps))
        mix_src = "measured"
        hit = hit_gamma(col).mean
        hit_src = "exact"
    else:
        mix = float(k * mixing_time(chain, eps))
        mix_src = "surrogate k*T_G"
        hit = bound_values(graph, spec, stats, k).gamma_hitting
        hit_src = "bound"
    value = k * math.log(n) * (mix + 3 * hit)
    return TStar(value, k, mix, mix_src, hit, hit_src)


# ---------------------------------------------------------------------------
# report


@dataclass
class Row:
    name: str
    kind: str
    expression: str
    measured: float | None = None
    bound: float | None = None
    ratio: float | None = None
    status: str = "missing"
    source: str = ""
    measured_se: float | None = None
    note: str = ""


@dataclass
class ReportOptions:
    lazy: bool = True
    mc_trials: int = 2000
    seed: int = 0
    workers: int = 1
    state_cap: int = STATE_CAP
    spectral_cap: int = 2000
    lemma1_max_n: int = 15
    exact_max_n: int = FULL_PROCESS_CAP
    eq14_max_n: int = 5
    eps: float | None = None


@dataclass
class BoundsReport:
    rows: list[Row]
    metadata: dict = field(default_factory=dict)

    def row(self, name: str) -> Row:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def literal_failures(self) -> list[Row]:
        return [r for r in self.rows if r.kind in ("literal", "identity") and r.status == "fail"]

    def as_dict(self) -> dict:
        return {"metadata": self.metadata, "rows": [_clean(asdict(r)) for r in self.rows]}

    def to_csv(self) -> str:
        cols = ["name", "kind", "status", "measured", "measured_se", "source",
                "bound", "ratio", "expression", "note"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in self.rows:
            d = asdict(r)
            w.writerow(["" if d[c] is None else (repr(d[c]) if isinstance(d[c], float) else d[c])
                        for c in cols])
        return buf.getvalue()


def _clean(d: dict) -> dict:
    out = {}
    for key, val in d.items():
        if isinstance(val, float) and not math.isfinite(val):
            val = None
        out[key] = val
    return out


def _literal(name, expression, measured, bound, holds, source="exact", note=""):
    if not (math.isfinite(measured) and math.isfinite(bound)):
        raise ArithmeticError("non-finite value: walkers never meet on this periodic chain")
    ratio = measured / bound if bound not in (0, None) else None
    return Row(name, "literal", expression, float(measured), float(bound), ratio,
               "pass" if holds else "fail", source, note=note)


def _ratio(name, expression, measured, bound, source, se=None, note=""):
    ratio = measured / bound
    return Row(name, "ratio", expression, float(measured), float(bound), float(ratio),
               "ratio-only", source, se, note)


def _le(a: float, b: float) -> bool:
    return a <= b * (1 + REL_TOL) + 1e-15


class _Builder:
    def __init__(self):
        self.rows: list[Row] = []

    def add(self, name: str, kind: str, expression: str, fn):
        """Evaluate ``fn`` into a row; failures become annotated missing rows."""
        try:
            row = fn()
        except (PeriodicChainError, BoundsError, ValueError, ArithmeticError) as exc:
            row = Row(name, kind, expression, note=f"{type(exc).__name__}: {exc}")
        except Exception as exc:  # keep the report alive; record what broke
            tb = traceback.format_exception_only(type(exc), exc)[-1].strip()
            row = Row(name, kind, expression, note=f"error: {tb}")
        if row is None:
            return
        row.name, row.kind, row.expression = name, row.kind or kind, expression
        self.rows.append(row)


def make_report(graph: Graph, options: ReportOptions | None = None) -> BoundsReport:
    """Evaluate every bound that applies to ``graph`` and assemble the rows."""
    opt = options or ReportOptions()
    lazy = opt.lazy
    n, m = graph.n, graph.m
    ln = math.log(n)
    stats = degree_stats(graph)
    chain = walk_chain(graph, lazy)
    spec = spectrum(chain)
    gap = spec.gap
    ks = k_star(stats)
    eps = opt.eps if opt.eps is not None else float(n) ** -3
    b = _Builder()
    cache: dict = {}

    def info(value, source="exact", note=""):
        return lambda: Row("", "info", "", float(value), status="info", source=source, note=note)

    b.add("nu", "info", "n sum d(v)^2 / (2m)^2", info(stats.nu))
    b.add("k_star", "info", "floor(max{2, min{sqrt(n/nu), m/(2 Delta), ln n}})", info(ks))
    b.add("lambda2", "info", "second eigenvalue of the walk", info(spec.lambda2))
    b.add("lambda_min", "info", "smallest eigenvalue of the walk", info(spec.lambda_min))

    # --- single-walk facts -------------------------------------------------
    floor = 1 / (2 * n * n)
    b.add("gap_floor", "literal", "1 - lambda2 >= 1/(2 n^2)",
          lambda: _literal("", "", gap, floor, gap >= floor))

    def hmax():
        if "H" not in cache:
            cache["H"] = float(hitting_matrix(chain).max())
        return cache["H"]

    delta = stats.min_degree
    b.add("hmax_lower", "literal", "m/(2 delta) <= H_max",
          lambda: _literal("", "", hmax(), m / (2 * delta), _le(m / (2 * delta), hmax())))
    b.add("hmax_upper", "literal", "H_max <= 4m / ((1 - lambda2) delta)",
          lambda: _literal("", "", hmax(), 4 * m / (gap * delta), _le(hmax(), 4 * m / (gap * delta))))

    def profiles():
        if "prof" not in cache:
            cache["prof"] = [hitting_profile(chain, v, spec.lam) for v in range(n)]
        return cache["prof"]

    def zvv_bound():
        z = max(p.zvv_identity for p in profiles())
        return _literal("", "", z, 1 / gap, _le(z, 1 / gap))

    b.add("zvv_gap_bound", "literal", "max_v Z_vv <= 1/(1 - lambda2)", zvv_bound)

    def zvv_identity():
        prof = profiles()
        if any(p.zvv_series is None for p in prof):
            raise PeriodicChainError("return-probability series diverges on a periodic chain")
        diff = max(p.disagreement for p in prof)
        row = Row("", "identity", "", diff, 1e-6, None, "pass" if diff <= 1e-6 else "fail", "exact")
        row.note = "max_v |pi_v E_pi(H_v) - sum_t (P^t(v,v) - pi_v)|"
        return row

    b.add("zvv_identity", "identity", "pi_v E_pi(H_v) = Z_vv (series)", zvv_identity)

    def mixing():
        if "T" not in cache:
            cache["T"] = mixing_time(chain, eps)
        return cache["T"]

    b.add("mixing_time", "info", f"eps-mixing time, eps = {eps:.3g}",
          lambda: Row("", "info", "", float(mixing()), status="info", source="exact",
                      note=f"T (1 - lambda2) / ln n = {mixing() * gap / ln:.4g}"))

    if n <= opt.lemma1_max_n:
        def lemma1():
            chk = lemma1_check(graph, lazy, eps)
            return Row("", "literal", "", chk.worst_ratio, 1.0, chk.worst_ratio,
                       "pass" if chk.violations == 0 else "fail", "exact",
                       note=f"max survival/bound over {chk.checked} (v,u,t); T={chk.mixing_time}")
        b.add("avoidance_restart_bound", "literal",
              "Pr(A_v(t;u)) <= exp(-floor(t/(T + 3 E_pi(H_v))))", lemma1)

    # --- product / collapsed chains ---------------------------------------
    nu_exact = stats.nu_exact
    two_m = 2 * m

    def k2_identity():
        dS = diagonal_degree(graph, 2)
        target = Fraction(two_m**2) * nu_exact / n
        return Row("", "identity", "", float(dS), float(target), float(dS / target),
                   "pass" if dS == target else "fail", "exact-integer")

    b.add("diagonal_degree_k2", "identity", "d(S_2) = (2m)^2 nu / n", k2_identity)

    for k in range(2, ks + 1):
        def mass(k=k):
            pg = diagonal_mass(graph, k)
            lo = Fraction(k * k) * nu_exact / (8 * n)
            return _literal("", "", float(pg), float(lo), pg >= lo, "exact-integer")

        b.add(f"gamma_mass_k{k}", "literal", f"pi_gamma >= k^2 nu/(8n), k={k}", mass)
        if k >= 3:
            def dfloor(k=k):
                dS = diagonal_degree(graph, k)
                lo = math.comb(k, 2) * Fraction(two_m**k) * nu_exact / (2 * n)
                return _literal("", "", float(dS), float(lo), dS >= lo, "exact-integer")

            b.add(f"diagonal_degree_floor_k{k}", "literal",
                  f"d(S_k) >= C(k,2) (2m)^k nu/(2n), k={k}", dfloor)

    def product(k):
        key = ("prod", k)
        if key not in cache:
            if n**k > min(opt.state_cap, opt.spectral_cap):
                raise BoundsError(f"n^k = {n**k} above product-chain cap")
            prod = build_product(graph, k, lazy, cap=opt.state_cap)
            col = collapse_diagonal(prod)
            cache[key] = (prod, col, hit_gamma(col))
        return cache[key]

    for k in sorted({2, ks}):
        if n**k > min(opt.state_cap, opt.spectral_cap):
            continue

        def tensor(k=k):
            if not lazy:
                raise BoundsError("tensor spectrum identity checked on lazy chains only")
            lq = spectrum(product(k)[0].chain).lambda2
            d = abs(lq - spec.lambda2)
            return Row("", "identity", "", lq, spec.lambda2, None,
                       "pass" if d <= 1e-9 else "fail", "exact", note=f"|diff| = {d:.3g}")

        b.add(f"tensor_lambda2_k{k}", "identity", f"lambda2(Q_k) = lambda2(G), k={k}", tensor)

        def collapse(k=k):
            prod, col, _ = product(k)
            lq = spectrum(prod.chain).lambda2
            lg = spectrum(col.chain).lambda2
            return _literal("", "", lg, lq, lg <= lq + 1e-9)

        b.add(f"collapse_lambda2_k{k}", "literal", f"lambda2(Gamma_k) <= lambda2(Q_k), k={k}", collapse)

        def eq11(k=k):
            _, col, hg = product(k)
            bound = 1 / (col.pi_gamma * gap)
            return _literal("", "", hg.mean, bound, _le(hg.mean, bound))

        b.add(f"gamma_hitting_k{k}", "literal",
              f"E_pihat(H_gamma) <= 1/(pi_gamma (1 - lambda2)), k={k}", eq11)

        def eq12(k=k):
            bv = bound_values(graph, spec, stats, k)
            return _ratio("", "", product(k)[2].mean, bv.gamma_hitting, "exact")

        b.add(f"gamma_hitting_explicit_k{k}", "ratio",
              f"E_pihat(H_gamma) vs (8/k^2)(n/nu)/(1 - lambda2), k={k}", eq12)

        def eq8(k=k):
            require_lambda2_dominant(spec)
            _, col, hg = product(k)
            worst = float(max_meeting(graph, k, lazy, opt.state_cap))
            T_g = mixing_time(col.chain, eps)
            return _ratio("", "", worst, T_g + hg.mean, "exact",
                          note="(1+o(1)) factor taken as 1; measured = max over starts")

        b.add(f"meeting_vs_mixing_hitting_k{k}", "ratio",
              f"max_u E(M_k(u)) vs T_Gamma + E_pihat(H_gamma), k={k}", eq8)

    # --- meeting / coalescence measurements --------------------------------
    def meeting_measure(k):
        key = ("meet", k)
        if key not in cache:
            if n**k <= opt.state_cap:
                cache[key] = (max_meeting(graph, k, lazy, opt.state_cap), None, "exact")
            else:
                cfg = ProcessConfig("coalescing", graph, lazy=lazy, starts=tuple(range(k)),
                                    trials=opt.mc_trials, seed=opt.seed)
                st = simulate_coalescing(cfg, opt.workers).meeting
                cache[key] = (st.mean, st.stderr, f"mc starts=0..{k - 1}")
        return cache[key]

    def eq4():
        bv = bound_values(graph, spec, stats, 2)
        val, se, src = meeting_measure(2)
        return _ratio("", "", val, bv.meeting, src, se)

    b.add("meeting_k2", "ratio", "E(M_2) vs (2 ln n + n/(4 nu))/(1 - lambda2)", eq4)

    def full_coalescence():
        if "C" not in cache:
            if n <= opt.exact_max_n:
                cache["C"] = (coalescence_times(graph, lazy)[(1 << n) - 1], None, "exact")
            else:
                cfg = ProcessConfig("coalescing", graph, lazy=lazy, trials=opt.mc_trials,
                                    seed=opt.seed)
                st = simulate_coalescing(cfg, opt.workers)
                cache["C"] = (st.mean, st.stderr, "mc")
        return cache["C"]

    def eq2():
        bv = bound_values(graph, spec, stats)
        val, se, src = full_coalescence()
        return _ratio("", "", val, bv.coalescence, src, se)

    b.add("coalescence_general", "ratio", "C(n) vs (ln^4 n + n/nu)/(1 - lambda2)", eq2)

    def eq3():
        bv = bound_values(graph, spec, stats)
        val, se, src = full_coalescence()
        return _ratio("", "", val, bv.coalescence_maxdeg, src, se)

    b.add("coalescence_maxdeg", "ratio", "C(n) vs ((m/Delta) ln n)^2/(1 - lambda2)", eq3)

    def eq15():
        bv = bound_values(graph, spec, stats, ks)
        if n <= opt.exact_max_n:
            times = coalescence_times(graph, lazy)
            val = max(times[sum(1 << v for v in A)] for A in itertools.combinations(range(n), ks))
            se, src = None, "exact max over starts"
        else:
            cfg = ProcessConfig("coalescing", graph, lazy=lazy, starts=tuple(range(ks)),
                                trials=opt.mc_trials, seed=opt.seed)
            st = simulate_coalescing(cfg, opt.workers)
            val, se, src = st.mean, st.stderr, f"mc starts=0..{ks - 1}"
        return _ratio("", "", val, bv.k_coalescence, src, se)

    b.add("k_coalescence", "ratio", "E(C_k*) vs (k^2 ln n + n/nu)/(1 - lambda2)", eq15)

    def tstar():
        ts = t_star(graph, lazy, cap=opt.state_cap, eps=eps)
        note = (f"k*={ts.k}; T_Gamma={ts.mixing:.6g} ({ts.mixing_source}); "
                f"E_pihat(H_gamma)={ts.gamma_hitting:.6g} ({ts.gamma_hitting_source})")
        return Row("", "info", "", ts.value, status="info", source="composed", note=note)

    b.add("t_star", "info", "k* ln n (T_Gamma + 3 E_pihat(H_gamma))", tstar)

    # --- exact full-process oracles ---------------------------------------
    if n <= opt.exact_max_n:
        def duality():
            c = full_coalescence()[0]
            v = exact_voter_time(graph, lazy)
            if math.isinf(c) and math.isinf(v):
                return Row("", "identity", "", c, v, None, "pass", "exact",
                           note="both infinite: walkers never coalesce")
            d = abs(c - v)
            return Row("", "identity", "", v, c, v / c, "pass" if d <= 1e-8 else "fail", "exact",
                       note="measured = voting time, bound = coalescence time")

        b.add("voter_coalescence_duality", "identity", "E(C_voter) = C(n)", duality)

        def mc_agreement():
            exact = full_coalescence()[0]
            cfg = ProcessConfig("coalescing", graph, lazy=lazy, trials=opt.mc_trials, seed=opt.seed)
            st = simulate_coalescing(cfg, opt.workers)
            z = (st.mean - exact) / st.stderr if st.stderr else 0.0
            return Row("", "statistical", "", st.mean, exact, st.mean / exact,
                       "pass" if abs(z) <= 4 else "fail", "mc", st.stderr, note=f"z = {z:.3f}")

        b.add("mc_vs_exact_coalescence", "statistical", "MC C(n) within 4 SE of exact", mc_agreement)

    if n <= opt.eq14_max_n:
        times_cache = {}

        for k in range(2, n + 1):
            def eq14(k=k):
                if "coal" not in times_cache:
                    times_cache["coal"] = coalescence_times(graph, lazy)
                times = times_cache["coal"]
                worst = max(times[sum(1 << v for v in A)]
                            for A in itertools.combinations(range(n), k))
                total = sum(max_meeting(graph, s, lazy, opt.state_cap) for s in range(2, k + 1))
                return _literal("", "", worst, total, _le(worst, total))

            b.add(f"coalescence_sum_of_meetings_k{k}", "literal",
                  f"max E(C_k) <= sum_(s=2..k) max E(M_s), k={k}", eq14)

    meta = {
        "n": n,
        "m": m,
        "graph_sha256": graph.digest(),
        "lazy": lazy,
        "log": "natural",
        "mixing_eps": eps,
        "one_plus_o1": "taken as 1 in ratio rows",
        "options": asdict(opt),
    }
    return BoundsReport(rows=b.rows, metadata=meta)


def max_meeting(graph: Graph, k: int, lazy: bool, cap: int = STATE_CAP) -> float:
    """Worst-case expected meeting time over tuples of k distinct start vertices."""
    h = meeting_times(graph, k, lazy, cap)
    return float(h.max())
