"""Command-line front end.

Every JSON output carries a ``manifest`` block (command, resolved
parameters, seed, version, timestamp, input-graph digest); ``coalwalk
replay FILE`` re-runs the command it describes.  Parameter precedence is
command-line flag, then ``--config`` file, then built-in default.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib.resources import files
from pathlib import Path
from typing import Any, Callable

from . import __version__
from .bounds import ReportOptions, bound_values, k_star, make_report
from .exact import exact_coalescence_time, exact_meeting_time, exact_voter_time
from .graph import FAMILIES, Graph, GraphError, degree_stats, generate, read_edge_list, serialize
from .product import StateCapError
from .sim import ProcessConfig, simulate
from .spectral import PeriodicChainError, h_max, hitting_profile, mixing_time, spectrum, walk_chain


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# parameter handling


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _positive_int(text) -> int:
    v = int(text)
    if v < 1:
        raise ValueError(f"must be >= 1, got {v}")
    return v


def _int_list(text) -> list[int] | None:
    if text is None or text == "":
        return None
    if isinstance(text, list):
        return [int(x) for x in text]
    return [int(x) for x in str(text).replace(",", " ").split()]


@dataclass(frozen=True)
class Opt:
    name: str
    convert: Callable
    default: Any
    help: str


COMMON = [Opt("seed", int, 0, "master seed")]

OPTIONS: dict[str, list[Opt]] = {
    "generate": [
        Opt("family", str, None, f"one of {', '.join(FAMILIES)}"),
        Opt("n", _positive_int, None, "vertex count (target for power_law)"),
        Opt("r", int, None, "degree for random_regular"),
        Opt("alpha", float, 2.5, "exponent for power_law (2 < alpha < 3)"),
        Opt("p", float, None, "edge probability for erdos_renyi"),
    ],
    "analyze": [
        Opt("graph", str, None, "edge-list file"),
        Opt("lazy", _bool, False, "use the lazy walk"),
        Opt("eps", float, None, "mixing-time threshold (default n^-3)"),
    ],
    "simulate": [
        Opt("process", str, "coalescing", "coalescing | voter | tokens"),
        Opt("graph", str, None, "edge-list file"),
        Opt("lazy", _bool, False, "use the lazy walk"),
        Opt("trials", _positive_int, 1000, "number of trials"),
        Opt("starts", _int_list, None, "initial particle/token vertices, comma separated"),
        Opt("opinions", _int_list, None, "initial voter opinion per vertex"),
        Opt("step_cap", _positive_int, None, "per-trial step cap (default 1e7 n)"),
        Opt("workers", _positive_int, 1, "worker processes (does not change results)"),
    ],
    "exact": [
        Opt("graph", str, None, "edge-list file"),
        Opt("process", str, "coalescing", "coalescing | voter | meeting"),
        Opt("lazy", _bool, False, "use the lazy walk"),
        Opt("starts", _int_list, None, "walker start vertices for meeting"),
    ],
    "bounds": [
        Opt("graph", str, None, "edge-list file"),
        Opt("lazy", _bool, True, "use the lazy walk"),
        Opt("trials", _positive_int, 2000, "Monte Carlo trials for measured rows"),
        Opt("workers", _positive_int, 1, "worker processes"),
        Opt("format", str, "json", "json | csv"),
    ],
    "scaling": [
        Opt("family", str, None, f"one of {', '.join(FAMILIES)}"),
        Opt("sizes", _int_list, None, "vertex counts, comma separated"),
        Opt("r", int, None, "degree for random_regular"),
        Opt("alpha", float, 2.5, "exponent for power_law"),
        Opt("p", float, None, "edge probability for erdos_renyi"),
        Opt("process", str, "coalescing", "coalescing | voter"),
        Opt("lazy", _bool, True, "use the lazy walk"),
        Opt("trials", _positive_int, 1000, "trials per size"),
        Opt("workers", _positive_int, 1, "worker processes"),
    ],
}

REQUIRED = {
    "generate": ("family", "n"),
    "analyze": ("graph",),
    "simulate": ("graph",),
    "exact": ("graph",),
    "bounds": ("graph",),
    "scaling": ("family", "sizes"),
}


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment; dashes in keys allowed."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, val = (x.strip() for x in line.split("=", 1))
        out[key.replace("-", "_")] = val
    return out


def resolve(command: str, cli: dict, config: dict) -> dict:
    params = {}
    for opt in COMMON + OPTIONS[command]:
        if cli.get(opt.name) is not None:
            raw = cli[opt.name]
        elif opt.name in config:
            raw = config[opt.name]
        else:
            params[opt.name] = opt.default
            continue
        try:
            params[opt.name] = opt.convert(raw) if raw is not None else None
        except ValueError as exc:
            raise UsageError(f"--{opt.name.replace('_', '-')}: {exc}") from None
    for name in REQUIRED[command]:
        if params.get(name) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required")
    return params


def manifest(command: str, params: dict, graph: Graph | None) -> dict:
    return {
        "command": command,
        "params": params,
        "seed": params.get("seed", 0),
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
        "graph_sha256": graph.digest() if graph is not None else None,
    }


def _finite(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


# ---------------------------------------------------------------------------
# commands: each returns (payload, graph used, exit code)


def run_generate(p: dict):
    g = generate(p["family"], p["n"], r=p["r"], alpha=p["alpha"], p=p["p"], seed=p["seed"])
    return g, g, 0


def run_analyze(p: dict):
    g = read_edge_list(p["graph"])
    lazy = p["lazy"]
    chain = walk_chain(g, lazy)
    spec = spectrum(chain)
    stats = degree_stats(g)
    out: dict = {
        "graph": {"n": g.n, "m": g.m},
        "lazy": lazy,
        "degree_stats": stats.as_dict(),
        "spectrum": spec.as_dict(),
        "k_star": k_star(stats),
    }
    eps = p["eps"] if p["eps"] is not None else float(g.n) ** -3
    try:
        T = mixing_time(chain, eps)
        out["mixing"] = {"epsilon": eps, "time": T,
                         "gap_log_ratio": T * spec.gap / math.log(g.n)}
    except PeriodicChainError as exc:
        out["mixing"] = {"epsilon": eps, "note": str(exc)}
    profiles = [hitting_profile(chain, v, spec.lam) for v in range(g.n)]
    out["hitting"] = {
        "h_max": h_max(chain),
        "pi_hitting": [p_.pi_hitting for p_ in profiles],
        "zvv": [p_.zvv_identity for p_ in profiles],
        "zvv_series": [p_.zvv_series for p_ in profiles],
    }
    if any(p_.zvv_series is None for p_ in profiles):
        out["hitting"]["note"] = "return-probability series diverges on a periodic chain"
    return out, g, 0


def run_simulate(p: dict):
    g = read_edge_list(p["graph"])
    cfg = ProcessConfig(
        process=p["process"],
        graph=g,
        lazy=p["lazy"],
        starts=tuple(p["starts"]) if p["starts"] else None,
        opinions=tuple(p["opinions"]) if p["opinions"] else None,
        trials=p["trials"],
        seed=p["seed"],
        step_cap=p["step_cap"],
    )
    stats = simulate(cfg, p["workers"])
    return {"process": cfg.process, "lazy": cfg.lazy, "stats": stats.as_dict()}, g, 0


def run_exact(p: dict):
    g = read_edge_list(p["graph"])
    proc, lazy = p["process"], p["lazy"]
    if proc == "meeting":
        starts = p["starts"] or [0, 1]
        value = exact_meeting_time(g, starts, lazy)
        out = {"process": proc, "lazy": lazy, "starts": starts}
    elif proc in ("coalescing", "tokens"):
        value = exact_coalescence_time(g, lazy)
        out = {"process": proc, "lazy": lazy}
    elif proc == "voter":
        value = exact_voter_time(g, lazy)
        out = {"process": proc, "lazy": lazy}
    else:
        raise UsageError(f"unknown process {proc!r}")
    out["value"] = _finite(value)
    out["infinite"] = math.isinf(value)
    return out, g, 0


def run_bounds(p: dict):
    g = read_edge_list(p["graph"])
    opts = ReportOptions(lazy=p["lazy"], mc_trials=p["trials"], seed=p["seed"], workers=p["workers"])
    rep = make_report(g, opts)
    code = 1 if rep.literal_failures() else 0
    if p["format"] == "csv":
        return rep.to_csv(), g, code
    if p["format"] != "json":
        raise UsageError("--format must be json or csv")
    return rep.as_dict(), g, code


def run_scaling(p: dict):
    lines = ["n,m,nu,lambda2,gap,mean,stderr,capped,mean_over_ln_n,"
             "bound_general,bound_maxdeg,ratio_general,ratio_maxdeg"]
    for size in p["sizes"]:
        g = generate(p["family"], size, r=p["r"], alpha=p["alpha"], p=p["p"], seed=p["seed"])
        spec = spectrum(walk_chain(g, p["lazy"]))
        stats = degree_stats(g)
        cfg = ProcessConfig(p["process"], g, lazy=p["lazy"], trials=p["trials"], seed=p["seed"])
        st = simulate(cfg, p["workers"])
        bv = bound_values(g, spec, stats)
        mean = st.mean if st.mean is not None else float("nan")
        lines.append(",".join("" if x is None else repr(x) for x in (
            g.n, g.m, stats.nu, spec.lambda2, spec.gap, mean, st.stderr, st.capped,
            mean / math.log(g.n), bv.coalescence, bv.coalescence_maxdeg,
            mean / bv.coalescence, mean / bv.coalescence_maxdeg)))
    return "\n".join(lines) + "\n", None, 0


RUNNERS = {
    "generate": run_generate,
    "analyze": run_analyze,
    "simulate": run_simulate,
    "exact": run_exact,
    "bounds": run_bounds,
    "scaling": run_scaling,
}


# ---------------------------------------------------------------------------
# output


def _write(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def emit(command: str, params: dict, payload, graph, output: str | None) -> None:
    man = manifest(command, params, graph)
    if command == "generate":
        header = ["coalwalk edge list", "manifest: " + json.dumps(man, sort_keys=True)]
        _write(serialize(payload, header), output)
    elif isinstance(payload, str):
        _write(payload, output)
        if output:
            Path(output + ".manifest.json").write_text(
                json.dumps(man, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    else:
        doc = dict(payload)
        doc["manifest"] = man
        _write(json.dumps(doc, indent=2, sort_keys=True) + "\n", output)


def load_manifest(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    for line in text.splitlines():
        if line.startswith("# manifest: "):
            return json.loads(line[len("# manifest: "):])
    doc = json.loads(text)
    return doc["manifest"] if "manifest" in doc else doc


def run_command(command: str, params: dict, output: str | None) -> int:
    payload, graph, code = RUNNERS[command](params)
    emit(command, params, payload, graph, output)
    return code


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coalwalk", description="Coalescing random walks, voting and token processes on graphs.")
    parser.add_argument("--version", action="version", version=f"coalwalk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat key = value config file")
        sp.add_argument("-o", "--output", help="output file (default stdout)")
        for opt in COMMON + OPTIONS[name]:
            flag = "--" + opt.name.replace("_", "-")
            if opt.convert is _bool:
                sp.add_argument(flag, dest=opt.name, action=argparse.BooleanOptionalAction,
                                default=None, help=opt.help)
            else:
                sp.add_argument(flag, dest=opt.name, default=None, help=opt.help)
    rp = sub.add_parser("replay", help="re-run the command recorded in an output's manifest")
    rp.add_argument("source", help="JSON output, manifest sidecar, or generated edge list")
    rp.add_argument("-o", "--output")
    return parser


def output_schema(kind: str) -> dict:
    """JSON schema for one output kind (``simulate``, ``analyze``, ``exact``, ``bounds``...)."""
    doc = json.loads(files("coalwalk").joinpath("schemas/outputs.v1.schema.json").read_text())
    return {"$schema": doc["$schema"], "$defs": doc["$defs"], "$ref": f"#/$defs/{kind}"}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            man = load_manifest(args.source)
            return run_command(man["command"], man["params"], args.output)
        cli = {k: v for k, v in vars(args).items() if k not in ("command", "config", "output")}
        config = read_config(args.config) if args.config else {}
        params = resolve(args.command, cli, config)
        return run_command(args.command, params, args.output)
    except UsageError as exc:
        parser.error(str(exc))
    except (GraphError, StateCapError, PeriodicChainError, OSError, ValueError) as exc:
        print(f"coalwalk: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
