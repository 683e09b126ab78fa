"""Command line interface.

Subcommands cover the full pipeline: generate a synthetic corpus,
emulate target-VMAF encoding for ladder traces, simulate one sharing
method at one capacity, sweep capacities across methods, export demand
shares, and render a full report with figures.

Exit codes: 0 on success, 1 on data or runtime errors, 2 on usage
errors (bad flags, missing inputs).
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Sequence

import numpy as np

from .emulation import (
    average_scc,
    default_target_grid,
    emulate_target_vmaf,
    sanitize_demand,
    write_avg_scc_csv,
    write_target_trace_csv,
)
from .simulation import (
    METHODS,
    ScenarioConfig,
    SessionSet,
    build_session_set,
    compute_kpis,
    run_scenario,
    sweep_capacity,
    write_aggregate_demand_csv,
    write_per_second_csv,
    write_shares_csv,
    write_summary_csv,
)
from .synth import default_gen_params, generate_corpus
from .traces import LadderFormatError, load_ladder_trace, save_ladder_trace

__all__ = ["main", "parse_rate", "parse_rate_range", "parse_targets"]


class UsageError(argparse.ArgumentTypeError):
    """Bad invocation: wrong flag values or missing inputs.

    Subclassing ArgumentTypeError lets argparse turn failures inside
    type= converters into normal usage errors (exit code 2).
    """


_RATE_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)\s*([kKmMgG]?)\s*$")
_RATE_SUFFIX = {"": 1.0, "k": 1e3, "m": 1e6, "g": 1e9}


def parse_rate(value: str | float | int) -> float:
    """Rate in bits/s from '50M', '5e7', '800k' or a plain number."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    m = _RATE_RE.match(str(value))
    if not m:
        raise UsageError(f"invalid rate {value!r}")
    return float(m.group(1)) * _RATE_SUFFIX[m.group(2).lower()]


def parse_rate_range(value: str | Sequence[float]) -> List[float]:
    """'start:stop:step' inclusive, a single rate, or a list of numbers."""
    if isinstance(value, (list, tuple)):
        return [parse_rate(v) for v in value]
    parts = str(value).split(":")
    if len(parts) == 1:
        return [parse_rate(parts[0])]
    if len(parts) != 3:
        raise UsageError(f"invalid rate range {value!r} (want start:stop:step)")
    start, stop, step = (parse_rate(p) for p in parts)
    if step <= 0 or stop < start:
        raise UsageError(f"invalid rate range {value!r}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(n)]


def parse_targets(value: str | Sequence[int]) -> np.ndarray:
    """'lo:hi' inclusive integer target grid."""
    if isinstance(value, (list, tuple)):
        grid = np.asarray([int(v) for v in value])
        if np.any(np.diff(grid) <= 0):
            raise UsageError("targets must be strictly increasing")
        grid.setflags(write=False)
        return grid
    parts = str(value).split(":")
    if len(parts) != 2:
        raise UsageError(f"invalid target range {value!r} (want lo:hi)")
    try:
        lo, hi = int(parts[0]), int(parts[1])
    except ValueError:
        raise UsageError(f"invalid target range {value!r}") from None
    if lo > hi:
        raise UsageError(f"invalid target range {value!r}")
    return default_target_grid(lo, hi)


def parse_methods(value: str | Sequence[str]) -> List[str]:
    """Comma list of method names; hyphens map to the library names."""
    tokens = value.split(",") if isinstance(value, str) else list(value)
    if tokens == ["all"]:
        return list(METHODS)
    methods = []
    for tok in tokens:
        name = tok.strip().replace("-", "_")
        if name not in METHODS:
            known = ", ".join(m.replace("_", "-") for m in METHODS)
            raise UsageError(f"unknown method {tok!r} (known: {known}, all)")
        methods.append(name)
    if not methods:
        raise UsageError("no methods given")
    return methods


def parse_method(value: str) -> str:
    methods = parse_methods(value)
    if len(methods) != 1:
        raise UsageError(f"expected one method, got {value!r}")
    return methods[0]


def _extract_config(argv: Sequence[str]) -> Dict:
    """Pull the --config JSON (if any) to seed argument defaults."""
    path = None
    for i, arg in enumerate(argv):
        if arg == "--config":
            if i + 1 >= len(argv):
                raise UsageError("--config needs a file")
            path = argv[i + 1]
        elif arg.startswith("--config="):
            path = arg.split("=", 1)[1]
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        config = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise UsageError(f"invalid config JSON: {e}") from None
    if not isinstance(config, dict):
        raise UsageError("config JSON must be an object")
    return config


def build_parser(config: Dict | None = None) -> argparse.ArgumentParser:
    config = config or {}

    def dflt(dest: str, fallback, conv: Callable | None = None):
        if dest in config:
            value = config[dest]
            return conv(value) if conv else value
        return fallback

    parser = argparse.ArgumentParser(
        prog="qoeshare",
        description="QoE-aware sharing of a bottleneck link, simulated from encoding ladder traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON file with defaults for this command's flags")

    p_gen = sub.add_parser("gen", help="generate a synthetic ladder-trace corpus")
    p_gen.add_argument("--out", required=True, help="output directory for per-clip CSV files")
    p_gen.add_argument("--seed", type=int, default=dflt("seed", 7, int))
    p_gen.add_argument(
        "--windows", type=int, default=dflt("windows", 1320, int), help="windows per clip"
    )
    p_gen.add_argument(
        "--clips",
        type=int,
        default=dflt("clips", 5, int),
        help="clip count; past 5 the reference profiles repeat with fresh seeds",
    )
    add_common(p_gen)
    p_gen.set_defaults(func=cmd_gen)

    p_emu = sub.add_parser("emulate", help="emulate target-VMAF encoding for ladder traces")
    p_emu.add_argument(
        "--trace",
        "--ladder",
        dest="trace",
        required=True,
        help="ladder trace CSV, or a directory of them",
    )
    p_emu.add_argument(
        "--out",
        required=True,
        help="output CSV of per-window selections (a directory when --trace is one)",
    )
    p_emu.add_argument("--scc", help="also write the clips' average demand curve CSV here")
    p_emu.add_argument(
        "--targets", type=parse_targets, default=dflt("targets", default_target_grid(), parse_targets)
    )
    add_common(p_emu)
    p_emu.set_defaults(func=cmd_emulate)

    def add_corpus_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--corpus", required=True, help="directory of ladder trace CSV files")
        p.add_argument(
            "--targets",
            type=parse_targets,
            default=dflt("targets", default_target_grid(), parse_targets),
        )
        p.add_argument(
            "--session-length",
            "--len",
            dest="session_length",
            type=int,
            default=dflt("session_length", 220, int),
            help="windows per session",
        )
        p.add_argument(
            "--sessions-per-clip",
            type=int,
            default=dflt("sessions_per_clip", 6, int),
        )
        p.add_argument(
            "--sessions",
            type=int,
            default=dflt("sessions", None, int),
            help="total session count; overrides --sessions-per-clip",
        )

    p_sim = sub.add_parser("simulate", help="run one sharing method at one capacity")
    add_corpus_args(p_sim)
    p_sim.add_argument(
        "--method",
        type=parse_method,
        default=dflt("method", "max_utility", parse_method),
    )
    p_sim.add_argument(
        "--capacity",
        "--cap",
        dest="capacity",
        type=parse_rate,
        default=dflt("capacity", 50e6, parse_rate),
        help="link capacity in bits/s (suffixes k/M/G)",
    )
    p_sim.add_argument("--out", help="per-second CSV output (default: stdout)")
    p_sim.add_argument("--summary", help="also write a one-row KPI summary CSV here")
    add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="KPI summary over a capacity range and methods")
    add_corpus_args(p_sweep)
    p_sweep.add_argument(
        "--capacities",
        "--cap",
        dest="capacities",
        type=parse_rate_range,
        default=dflt("capacities", parse_rate_range("10M:100M:1M"), parse_rate_range),
        help="start:stop:step, inclusive (default 10M:100M:1M)",
    )
    p_sweep.add_argument(
        "--methods",
        type=parse_methods,
        default=dflt("methods", list(METHODS), parse_methods),
        help="comma list (hyphenated names) or 'all'",
    )
    p_sweep.add_argument("--jobs", type=int, default=dflt("jobs", 1, int))
    p_sweep.add_argument("--out", help="summary CSV output (default: stdout)")
    add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_sh = sub.add_parser("export-shares", help="cumulative per-session demand at one target")
    add_corpus_args(p_sh)
    p_sh.add_argument("--target", type=int, default=dflt("target", 70, int))
    p_sh.add_argument("--out", required=True, help="shares CSV output")
    p_sh.add_argument("--aggregate", help="also write total demand per window and target here")
    add_common(p_sh)
    p_sh.set_defaults(func=cmd_export_shares)

    p_rep = sub.add_parser("report", help="full pipeline: CSV exports plus rendered figures")
    add_corpus_args(p_rep)
    p_rep.add_argument(
        "--capacities",
        type=parse_rate_range,
        default=dflt("capacities", parse_rate_range("10M:100M:1M"), parse_rate_range),
    )
    p_rep.add_argument(
        "--capacity",
        type=parse_rate,
        default=dflt("capacity", 50e6, parse_rate),
        help="reference capacity for the per-second figures",
    )
    p_rep.add_argument("--target", type=int, default=dflt("target", 70, int))
    p_rep.add_argument("--jobs", type=int, default=dflt("jobs", 1, int))
    p_rep.add_argument("--out", required=True, help="output directory")
    add_common(p_rep)
    p_rep.set_defaults(func=cmd_report)

    return parser


# --- commands --------------------------------------------------------------


def cmd_gen(args: argparse.Namespace) -> int:
    if args.clips < 1:
        raise UsageError("--clips must be at least 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = default_gen_params(seed=args.seed, windows_per_clip=args.windows)
    if args.clips != len(params.profiles):
        base = params.profiles
        profiles = tuple(
            replace(base[i % len(base)], name=f"clip{i + 1}") for i in range(args.clips)
        )
        params = replace(params, profiles=profiles)
    for trace in generate_corpus(params):
        save_ladder_trace(trace, out / f"{trace.clip_id}.csv")
    return 0


def cmd_emulate(args: argparse.Namespace) -> int:
    path = Path(args.trace)
    if path.is_dir():
        paths = sorted(path.glob("*.csv"))
        if not paths:
            raise UsageError(f"no ladder trace CSV files in {path}")
    elif path.is_file():
        paths = [path]
    else:
        raise UsageError(f"trace file not found: {path}")
    ladders = [load_ladder_trace(p) for p in paths]
    traces = [sanitize_demand(emulate_target_vmaf(lad, args.targets)) for lad in ladders]
    if path.is_dir():
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for lad, trace in zip(ladders, traces):
            write_target_trace_csv([trace], out / f"{lad.clip_id}.csv")
    else:
        write_target_trace_csv(traces, args.out)
    if args.scc:
        curves = [average_scc([t], label=lad.clip_id) for lad, t in zip(ladders, traces)]
        write_avg_scc_csv(curves, args.scc)
    return 0


def _load_session_set(args: argparse.Namespace) -> SessionSet:
    corpus = Path(args.corpus)
    if not corpus.is_dir():
        raise UsageError(f"corpus directory not found: {corpus}")
    paths = sorted(corpus.glob("*.csv"))
    if not paths:
        raise UsageError(f"no ladder trace CSV files in {corpus}")
    ladders = [load_ladder_trace(p) for p in paths]
    per_clip = args.sessions_per_clip
    if args.sessions is not None:
        if args.sessions < 1 or args.sessions % len(ladders):
            raise UsageError(
                f"--sessions must be a positive multiple of the clip count ({len(ladders)})"
            )
        per_clip = args.sessions // len(ladders)
    return build_session_set(
        ladders,
        session_length=args.session_length,
        sessions_per_clip=per_clip,
        target_grid=args.targets,
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    ss = _load_session_set(args)
    config = ScenarioConfig(capacity_bps=args.capacity, method=args.method, session_set=ss)
    records = run_scenario(config)
    write_per_second_csv(records, args.out if args.out else sys.stdout)
    if args.summary:
        write_summary_csv([compute_kpis(records).summary], args.summary)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    ss = _load_session_set(args)
    summaries = sweep_capacity(ss, args.capacities, args.methods, jobs=args.jobs)
    write_summary_csv(summaries, args.out if args.out else sys.stdout)
    return 0


def cmd_export_shares(args: argparse.Namespace) -> int:
    ss = _load_session_set(args)
    if args.target not in ss.grid:
        raise UsageError(f"target {args.target} is not on the grid")
    write_shares_csv(ss, args.target, args.out)
    if args.aggregate:
        write_aggregate_demand_csv(ss, args.aggregate)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    from . import report
    from .simulation import cumulative_shares

    ss = _load_session_set(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    summaries = sweep_capacity(ss, args.capacities, METHODS, jobs=args.jobs)
    write_summary_csv(summaries, out / "summary.csv")
    report.plot_kpi_curves(summaries, out)

    all_records = []
    reports = {}
    for method in METHODS:
        config = ScenarioConfig(capacity_bps=args.capacity, method=method, session_set=ss)
        records = run_scenario(config)
        reports[method] = compute_kpis(records)
        all_records.extend(records)
    write_per_second_csv(all_records, out / "per_second.csv")
    report.plot_scenario_series(reports, out)

    curves = [ss.clip_sccs[c] for c in sorted(ss.clip_sccs)]
    write_avg_scc_csv(curves, out / "scc.csv")
    report.plot_scc_curves(curves, out / "scc_curves.png")

    if args.target not in ss.grid:
        raise UsageError(f"target {args.target} is not on the grid")
    write_shares_csv(ss, args.target, out / "shares.csv")
    seconds, ids, cums = cumulative_shares(ss, args.target)
    report.plot_shares(seconds, ids, cums, out / "shares.png", capacity_bps=args.capacity)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        config = _extract_config(argv)
        parser = build_parser(config)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (LadderFormatError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
