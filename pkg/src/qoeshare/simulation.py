"""Trace-driven simulation of sharing methods over a bottleneck link.

Sessions are fixed-length cuts of the corpus clips.  Every second the
chosen method reallocates the link (static methods keep their
precomputed rates); each session then experiences the VMAF of the best
encode its granted rate buys in that second.  KPIs aggregate utility
and quality over all session-seconds, counting non-admitted sessions
as zero.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Sequence, TextIO, Tuple

import numpy as np

from .allocation import (
    AllocationInput,
    compute_static_rates,
    max_utility_capacity_profile,
)
from .emulation import (
    AvgScc,
    TargetVmafTrace,
    average_scc,
    emulate_target_vmaf,
    sanitize_demand,
)
from .traces import LadderTrace, cut_sessions
from .utility import DEFAULT_CURVE, UtilityCurve

__all__ = [
    "METHODS",
    "SessionSet",
    "ScenarioConfig",
    "PerSecondRecord",
    "KpiSummary",
    "KpiReport",
    "build_session_set",
    "run_scenario",
    "compute_kpis",
    "sweep_capacity",
    "cumulative_shares",
    "aggregate_demand",
    "write_per_second_csv",
    "write_summary_csv",
    "write_shares_csv",
    "write_aggregate_demand_csv",
]

METHODS = ("max_utility", "equal_vmaf", "rate_fair", "mu_per_clip", "mu_per_session")

PER_SECOND_HEADER = [
    "t",
    "session_id",
    "method",
    "capacity_bps",
    "target_vmaf",
    "experienced_vmaf",
    "rate_bps",
    "utility",
]
SUMMARY_HEADER = ["capacity_bps", "method", "avg_utility", "avg_vmaf", "frac_below_50", "frac_zero"]
SHARES_HEADER = ["t", "session_id", "cum_rate_bps"]
AGGREGATE_HEADER = ["t", "target_vmaf", "total_rate_bps"]


@dataclass(frozen=True)
class SessionSet:
    """Emulated session traces plus the average demand curves the static
    methods allocate from."""

    sessions: Tuple[TargetVmafTrace, ...]
    session_clips: Tuple[str, ...]
    clip_sccs: Dict[str, AvgScc]
    session_sccs: Tuple[AvgScc, ...]
    grid: np.ndarray

    @property
    def n_sessions(self) -> int:
        return len(self.sessions)

    @property
    def n_windows(self) -> int:
        return self.sessions[0].n_windows

    @property
    def session_ids(self) -> Tuple[str, ...]:
        return tuple(s.session_id for s in self.sessions)

    def demand_tensor(self) -> np.ndarray:
        """[n_sessions, n_windows, n_targets] sanitized demand."""
        return np.stack([s.sanitized_demand for s in self.sessions])

    def experienced_tensor(self) -> np.ndarray:
        return np.stack([s.experienced_vmaf for s in self.sessions])


@dataclass(frozen=True)
class ScenarioConfig:
    capacity_bps: float
    method: str
    session_set: SessionSet
    curve: UtilityCurve = DEFAULT_CURVE
    reallocation_period: int = 1

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.capacity_bps <= 0:
            raise ValueError("capacity must be positive")
        if self.reallocation_period != 1:
            raise ValueError("only per-window reallocation is supported")


@dataclass(frozen=True)
class PerSecondRecord:
    t: int
    session_id: str
    method: str
    capacity_bps: float
    target_vmaf: int
    experienced_vmaf: float
    rate_bps: float
    utility: float


@dataclass(frozen=True)
class KpiSummary:
    capacity_bps: float
    method: str
    avg_utility: float
    avg_vmaf: float
    frac_below_50: float
    frac_zero: float


@dataclass(frozen=True)
class KpiReport:
    summary: KpiSummary
    per_second_avg_utility: np.ndarray
    per_second_avg_vmaf: np.ndarray
    per_second_min_vmaf: np.ndarray


def build_session_set(
    ladders: Sequence[LadderTrace],
    session_length: int = 220,
    sessions_per_clip: int = 6,
    target_grid: np.ndarray | None = None,
) -> SessionSet:
    """Emulate each clip once, cut sessions and precompute average curves."""
    sessions: List[TargetVmafTrace] = []
    session_clips: List[str] = []
    clip_sccs: Dict[str, AvgScc] = {}
    session_sccs: List[AvgScc] = []
    for ladder in ladders:
        clip_trace = sanitize_demand(emulate_target_vmaf(ladder, target_grid))
        clip_sccs[ladder.clip_id] = average_scc([clip_trace], label=ladder.clip_id)
        for cut in cut_sessions(ladder, session_length, sessions_per_clip):
            tr = clip_trace.slice(cut.start_window, cut.length, cut.session_id)
            sessions.append(tr)
            session_clips.append(ladder.clip_id)
            session_sccs.append(average_scc([tr], label=cut.session_id))
    if not sessions:
        raise ValueError("no sessions")
    return SessionSet(
        sessions=tuple(sessions),
        session_clips=tuple(session_clips),
        clip_sccs=clip_sccs,
        session_sccs=tuple(session_sccs),
        grid=sessions[0].target_grid,
    )


# --- per-method engines --------------------------------------------------


def _targets_to_idx(targets: np.ndarray, grid: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(grid, np.maximum(targets, grid[0]))
    return np.where(targets > 0, idx, -1).astype(np.int32)


def _static_indices(demand: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Highest affordable target index per window and session for fixed rates.

    demand is [n_sessions, n_windows, n_targets]; rates is [n_sessions].
    """
    n_sessions = demand.shape[0]
    out = np.empty(demand.shape[:2], dtype=np.int32)
    for s in range(n_sessions):
        out[s] = np.sum(demand[s] <= rates[s], axis=1) - 1
    return out.T  # [n_windows, n_sessions]


def _scenario_indices(
    config: ScenarioConfig, capacities: Sequence[float] | None = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Target indices and rates for one method.

    Returns (v_idx, rates) shaped [n_caps, n_windows, n_sessions]; v_idx
    is -1 where a session is not admitted.  When capacities is None the
    config capacity alone is used.
    """
    ss = config.session_set
    caps = [config.capacity_bps] if capacities is None else [float(c) for c in capacities]
    n_caps, n_w, n_s = len(caps), ss.n_windows, ss.n_sessions
    grid = ss.grid
    demand = ss.demand_tensor()
    v_idx = np.full((n_caps, n_w, n_s), -1, dtype=np.int32)
    rates = np.zeros((n_caps, n_w, n_s))

    if config.method == "max_utility":
        for t in range(n_w):
            inp = AllocationInput(
                capacity_bps=max(caps),
                sessions=ss.sessions,
                curve=config.curve,
                t=t,
            )
            for c, alloc in enumerate(max_utility_capacity_profile(inp, caps)):
                v_idx[c, t] = _targets_to_idx(alloc.targets, grid)
                rates[c, t] = alloc.rates
    elif config.method == "equal_vmaf":
        caps_arr = np.asarray(caps)
        for t in range(n_w):
            totals = demand[:, t, :].sum(axis=0)
            level = np.searchsorted(totals, caps_arr, side="right") - 1
            ok = level >= 0
            v_idx[:, t, :] = np.where(ok, level, -1)[:, None]
            picked = demand[:, t, np.maximum(level, 0)].T  # [n_caps, n_sessions]
            rates[:, t, :] = np.where(ok[:, None], picked, 0.0)
    elif config.method == "rate_fair":
        for c, cap in enumerate(caps):
            share = cap / n_s
            while math.fsum([share] * n_s) > cap:
                share = math.nextafter(share, 0.0)
            idx = np.stack([np.sum(demand[s] <= share, axis=1) - 1 for s in range(n_s)]).T
            v_idx[c] = idx
            rates[c] = share
    elif config.method in ("mu_per_clip", "mu_per_session"):
        mode = "per_clip" if config.method == "mu_per_clip" else "per_session"
        for c, cap in enumerate(caps):
            if mode == "per_clip":
                sccs = [ss.clip_sccs[clip] for clip in ss.session_clips]
            else:
                sccs = list(ss.session_sccs)
            static = compute_static_rates(sccs, cap, config.curve, mode=mode)
            v_idx[c] = _static_indices(demand, static)
            rates[c] = static[None, :]
    else:  # pragma: no cover
        raise ValueError(f"unknown method {config.method!r}")
    return v_idx, rates


def _experienced(ss: SessionSet, v_idx: np.ndarray) -> np.ndarray:
    """Experienced VMAF per [window, session] given target indices (-1 = off)."""
    exp = ss.experienced_tensor()  # [N, W, T]
    n_w, n_s = v_idx.shape
    vals = exp[
        np.arange(n_s)[None, :],
        np.arange(n_w)[:, None],
        np.maximum(v_idx, 0),
    ]
    return np.where(v_idx >= 0, vals, 0.0)


def run_scenario(config: ScenarioConfig) -> List[PerSecondRecord]:
    """Simulate one method at one capacity; one record per session-second."""
    ss = config.session_set
    v_idx, rates = _scenario_indices(config)
    v_idx, rates = v_idx[0], rates[0]
    exp = _experienced(ss, v_idx)
    util = config.curve.utility_array(exp)
    grid = ss.grid
    ids = ss.session_ids
    records: List[PerSecondRecord] = []
    for t in range(ss.n_windows):
        for s in range(ss.n_sessions):
            admitted = v_idx[t, s] >= 0
            records.append(
                PerSecondRecord(
                    t=t,
                    session_id=ids[s],
                    method=config.method,
                    capacity_bps=config.capacity_bps,
                    target_vmaf=int(grid[v_idx[t, s]]) if admitted else 0,
                    experienced_vmaf=float(exp[t, s]),
                    rate_bps=float(rates[t, s]),
                    utility=float(util[t, s]),
                )
            )
    return records


def compute_kpis(records: Sequence[PerSecondRecord]) -> KpiReport:
    """KPIs of one scenario's records.

    Scenario averages are means of the per-second averages; fractions
    count session-seconds.  Zeros from non-admitted sessions stay in.
    """
    if not records:
        raise ValueError("no records")
    method = records[0].method
    capacity = records[0].capacity_bps
    seconds = sorted({r.t for r in records})
    index = {t: k for k, t in enumerate(seconds)}
    n_w = len(seconds)
    counts = np.zeros(n_w, dtype=int)
    for r in records:
        if r.method != method or r.capacity_bps != capacity:
            raise ValueError("records mix methods or capacities")
        counts[index[r.t]] += 1
    n_s = counts[0]
    if np.any(counts != n_s):
        raise ValueError("unequal session counts per second")
    exp = np.empty((n_w, n_s))
    util = np.empty((n_w, n_s))
    fill = np.zeros(n_w, dtype=int)
    for r in records:
        k = index[r.t]
        exp[k, fill[k]] = r.experienced_vmaf
        util[k, fill[k]] = r.utility
        fill[k] += 1
    avg_util = util.mean(axis=1)
    avg_vmaf = exp.mean(axis=1)
    min_vmaf = exp.min(axis=1)
    summary = KpiSummary(
        capacity_bps=capacity,
        method=method,
        avg_utility=float(avg_util.mean()),
        avg_vmaf=float(avg_vmaf.mean()),
        frac_below_50=float((exp < 50.0).mean()),
        frac_zero=float((exp == 0.0).mean()),
    )
    return KpiReport(summary, avg_util, avg_vmaf, min_vmaf)


# --- capacity sweep ------------------------------------------------------


def _kpis_from_arrays(
    ss: SessionSet, curve: UtilityCurve, method: str, capacity: float, v_idx: np.ndarray
) -> KpiSummary:
    exp = _experienced(ss, v_idx)
    util = curve.utility_array(exp)
    return KpiSummary(
        capacity_bps=capacity,
        method=method,
        avg_utility=float(util.mean(axis=1).mean()),
        avg_vmaf=float(exp.mean(axis=1).mean()),
        frac_below_50=float((exp < 50.0).mean()),
        frac_zero=float((exp == 0.0).mean()),
    )


def _sweep_chunk(
    ss: SessionSet,
    capacities: Sequence[float],
    methods: Sequence[str],
    curve: UtilityCurve,
) -> List[KpiSummary]:
    rows: Dict[Tuple[int, int], KpiSummary] = {}
    for m, method in enumerate(methods):
        config = ScenarioConfig(
            capacity_bps=float(max(capacities)),
            method=method,
            session_set=ss,
            curve=curve,
        )
        v_idx, _rates = _scenario_indices(config, capacities)
        for c, cap in enumerate(capacities):
            rows[(c, m)] = _kpis_from_arrays(ss, curve, method, float(cap), v_idx[c])
    return [rows[(c, m)] for c in range(len(capacities)) for m in range(len(methods))]


def sweep_capacity(
    session_set: SessionSet,
    capacities: Sequence[float],
    methods: Sequence[str] = METHODS,
    curve: UtilityCurve = DEFAULT_CURVE,
    jobs: int | None = None,
) -> List[KpiSummary]:
    """KPI rows for every capacity and method, ordered by (capacity, method).

    jobs > 1 splits the capacity list over worker processes; results are
    merged in order and do not depend on the job count.
    """
    caps = [float(c) for c in capacities]
    if not caps:
        raise ValueError("no capacities")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    if jobs is None:
        jobs = 1
    jobs = max(1, min(int(jobs), len(caps)))
    if jobs == 1:
        return _sweep_chunk(session_set, caps, methods, curve)
    bounds = np.linspace(0, len(caps), jobs + 1).astype(int)
    chunks = [caps[bounds[i] : bounds[i + 1]] for i in range(jobs) if bounds[i] < bounds[i + 1]]
    with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(_sweep_chunk, [session_set] * len(chunks), chunks,
                              [methods] * len(chunks), [curve] * len(chunks)))
    out: List[KpiSummary] = []
    for part in parts:
        out.extend(part)
    return out


# --- demand share exports -------------------------------------------------


def cumulative_shares(
    session_set: SessionSet, target: int
) -> Tuple[np.ndarray, Tuple[str, ...], np.ndarray]:
    """Running per-session demand sums at one target, session order fixed.

    Returns (seconds, session_ids, cums) with cums[t, s] the sum of the
    first s+1 sessions' demand in window t.
    """
    ss = session_set
    k = ss.sessions[0].target_index(target)
    demand = ss.demand_tensor()[:, :, k]  # [N, W]
    cums = np.cumsum(demand, axis=0).T  # [W, N]
    return np.arange(ss.n_windows), ss.session_ids, cums


def aggregate_demand(session_set: SessionSet) -> np.ndarray:
    """Total demand per window and target over all sessions ([W, T])."""
    return session_set.demand_tensor().sum(axis=0)


# --- CSV writers ----------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


@contextmanager
def _open_out(out: str | Path | TextIO) -> Iterator[TextIO]:
    """Yield a writable text stream: open paths, pass streams through."""
    if hasattr(out, "write"):
        yield out
    else:
        with Path(out).open("w", newline="", encoding="utf-8") as fh:
            yield fh


def write_per_second_csv(records: Iterable[PerSecondRecord], out: str | Path | TextIO) -> None:
    with _open_out(out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PER_SECOND_HEADER)
        for r in records:
            writer.writerow(
                [
                    r.t,
                    r.session_id,
                    r.method,
                    _fmt(r.capacity_bps),
                    r.target_vmaf,
                    _fmt(r.experienced_vmaf),
                    _fmt(r.rate_bps),
                    _fmt(r.utility),
                ]
            )


def write_summary_csv(summaries: Iterable[KpiSummary], out: str | Path | TextIO) -> None:
    with _open_out(out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        for k in summaries:
            writer.writerow(
                [
                    _fmt(k.capacity_bps),
                    k.method,
                    _fmt(k.avg_utility),
                    _fmt(k.avg_vmaf),
                    _fmt(k.frac_below_50),
                    _fmt(k.frac_zero),
                ]
            )


def write_shares_csv(session_set: SessionSet, target: int, out: str | Path | TextIO) -> None:
    seconds, ids, cums = cumulative_shares(session_set, target)
    with _open_out(out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SHARES_HEADER)
        for t in seconds:
            for s, sid in enumerate(ids):
                writer.writerow([int(t), sid, _fmt(cums[t, s])])


def write_aggregate_demand_csv(session_set: SessionSet, out: str | Path | TextIO) -> None:
    totals = aggregate_demand(session_set)
    grid = session_set.grid
    with _open_out(out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AGGREGATE_HEADER)
        for t in range(totals.shape[0]):
            for k, target in enumerate(grid):
                writer.writerow([t, int(target), _fmt(totals[t, k])])
