"""Target-VMAF encoder emulation on top of CRF-ladder traces.

For every window and every integer quality target, pick the ladder
encode whose window VMAF is the smallest one at or above the target.
The rates of the picked encodes form the session's demand function:
the rate it needs in a given window to reach a given target.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .traces import LadderTrace, SessionTrace

__all__ = [
    "TargetVmafTrace",
    "AvgScc",
    "ConstantDemand",
    "default_target_grid",
    "emulate_target_vmaf",
    "sanitize_demand",
    "demand",
    "achievable_vmaf",
    "average_scc",
    "write_target_trace_csv",
    "write_avg_scc_csv",
]

TARGET_TRACE_HEADER = [
    "session_id",
    "window_index",
    "target_vmaf",
    "selected_crf",
    "rate_bps",
    "experienced_vmaf",
]
AVG_SCC_HEADER = ["label", "target_vmaf", "avg_rate_bps"]


def default_target_grid(lo: int = 10, hi: int = 95) -> np.ndarray:
    """Integer quality targets, inclusive on both ends."""
    if lo > hi:
        raise ValueError("empty target grid")
    grid = np.arange(lo, hi + 1, dtype=int)
    grid.setflags(write=False)
    return grid


@dataclass(frozen=True, eq=False)
class TargetVmafTrace:
    """Per-window emulation results of one session on a target grid.

    selected_crf, rates_bps and experienced_vmaf are [n_windows,
    n_targets] arrays; unreachable cells hold -1 / NaN / NaN.  After
    sanitize_demand, sanitized_demand holds a per-window non-decreasing
    rate per target with +inf marking unreachable targets.
    """

    session_id: str
    target_grid: np.ndarray
    selected_crf: np.ndarray
    rates_bps: np.ndarray
    experienced_vmaf: np.ndarray
    sanitized_demand: np.ndarray | None = None

    def __post_init__(self) -> None:
        for name in ("target_grid", "selected_crf", "rates_bps", "experienced_vmaf"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.sanitized_demand is not None:
            sd = np.asarray(self.sanitized_demand, dtype=float)
            sd.setflags(write=False)
            object.__setattr__(self, "sanitized_demand", sd)

    @property
    def n_windows(self) -> int:
        return self.rates_bps.shape[0]

    def target_index(self, target: int) -> int:
        idx = int(np.searchsorted(self.target_grid, target))
        if idx >= len(self.target_grid) or self.target_grid[idx] != target:
            raise ValueError(f"target {target} not on the grid")
        return idx

    def demand_row(self, t: int) -> np.ndarray:
        """Sanitized per-target demand for window t."""
        if self.sanitized_demand is None:
            raise ValueError("demand not sanitized yet")
        if not 0 <= t < self.n_windows:
            raise ValueError(f"window {t} out of range")
        return self.sanitized_demand[t]

    def slice(self, start: int, length: int, session_id: str) -> "TargetVmafTrace":
        """View of a contiguous window range as its own session."""
        if start < 0 or length <= 0 or start + length > self.n_windows:
            raise ValueError("invalid slice bounds")
        stop = start + length
        return TargetVmafTrace(
            session_id=session_id,
            target_grid=self.target_grid,
            selected_crf=self.selected_crf[start:stop],
            rates_bps=self.rates_bps[start:stop],
            experienced_vmaf=self.experienced_vmaf[start:stop],
            sanitized_demand=None
            if self.sanitized_demand is None
            else self.sanitized_demand[start:stop],
        )


@dataclass(frozen=True, eq=False)
class AvgScc:
    """Time-invariant average demand per target (a mean complexity curve)."""

    label: str
    target_grid: np.ndarray
    avg_rate_bps: np.ndarray

    def __post_init__(self) -> None:
        grid = np.asarray(self.target_grid)
        rates = np.asarray(self.avg_rate_bps, dtype=float)
        if grid.shape != rates.shape:
            raise ValueError("grid and rates must align")
        # Comparison instead of diff: inf - inf would warn on unreachable rungs.
        if np.any(rates[1:] < rates[:-1]):
            raise ValueError("average demand must be non-decreasing in target")
        grid.setflags(write=False)
        rates.setflags(write=False)
        object.__setattr__(self, "target_grid", grid)
        object.__setattr__(self, "avg_rate_bps", rates)

    def target_index(self, target: int) -> int:
        idx = int(np.searchsorted(self.target_grid, target))
        if idx >= len(self.target_grid) or self.target_grid[idx] != target:
            raise ValueError(f"target {target} not on the grid")
        return idx


class ConstantDemand:
    """Adapts an AvgScc to the per-window demand-view interface."""

    def __init__(self, scc: AvgScc, session_id: str | None = None):
        self.scc = scc
        self.session_id = session_id or scc.label
        self.target_grid = scc.target_grid

    def demand_row(self, t: int) -> np.ndarray:
        return self.scc.avg_rate_bps


# --- emulation ----------------------------------------------------------


def emulate_target_vmaf(
    ladder: LadderTrace | SessionTrace,
    target_grid: np.ndarray | None = None,
    session_id: str | None = None,
) -> TargetVmafTrace:
    """Emulate a target-VMAF encoder over every window and target.

    For each target the encode with the smallest window VMAF at or above
    the target wins; among equal VMAF scores the higher CRF wins.  Targets
    above every encode's VMAF are unreachable (-1 / NaN).
    """
    if target_grid is None:
        target_grid = default_target_grid()
    grid = np.asarray(target_grid)
    if grid.ndim != 1 or len(grid) == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("target grid must be non-empty and strictly ascending")

    if isinstance(ladder, SessionTrace):
        sid = session_id or ladder.session_id
        rates, vmafs = ladder.rates_bps, ladder.vmafs
        crfs = np.asarray(ladder.ladder.crf_values)
    else:
        sid = session_id or ladder.clip_id
        rates, vmafs = ladder.rates_bps, ladder.vmafs
        crfs = np.asarray(ladder.crf_values)

    n_w, n_c = vmafs.shape
    n_t = len(grid)
    sel_crf = np.full((n_w, n_t), -1, dtype=np.int16)
    sel_rate = np.full((n_w, n_t), np.nan)
    sel_vmaf = np.full((n_w, n_t), np.nan)

    for w in range(n_w):
        # Sort encodes by (vmaf asc, crf desc) so that for each target the
        # first qualifying entry is the minimal VMAF with the high-CRF
        # tie-break.
        order = np.lexsort((-crfs, vmafs[w]))
        v_sorted = vmafs[w][order]
        first = np.searchsorted(v_sorted, grid, side="left")
        ok = first < n_c
        pick = order[np.minimum(first, n_c - 1)]
        sel_crf[w] = np.where(ok, crfs[pick], -1)
        sel_rate[w] = np.where(ok, rates[w][pick], np.nan)
        sel_vmaf[w] = np.where(ok, vmafs[w][pick], np.nan)

    return TargetVmafTrace(
        session_id=sid,
        target_grid=grid,
        selected_crf=sel_crf,
        rates_bps=sel_rate,
        experienced_vmaf=sel_vmaf,
    )


def sanitize_demand(trace: TargetVmafTrace) -> TargetVmafTrace:
    """Make per-window demand non-decreasing in the target.

    Raw selected rates can dip when a higher target happens to pick a
    cheaper encode; the sanitized demand is the running maximum over
    targets, with +inf for unreachable targets.
    """
    raw = np.where(np.isnan(trace.rates_bps), np.inf, trace.rates_bps)
    sanitized = np.maximum.accumulate(raw, axis=1)
    return TargetVmafTrace(
        session_id=trace.session_id,
        target_grid=trace.target_grid,
        selected_crf=trace.selected_crf,
        rates_bps=trace.rates_bps,
        experienced_vmaf=trace.experienced_vmaf,
        sanitized_demand=sanitized,
    )


def demand(trace: TargetVmafTrace, t: int, target: int) -> float:
    """Sanitized rate needed in window t to reach the target (+inf if unreachable)."""
    return float(trace.demand_row(t)[trace.target_index(target)])


def achievable_vmaf(trace: TargetVmafTrace, t: int, rate_budget_bps: float) -> int:
    """Highest grid target whose demand fits the budget in window t (0 if none)."""
    row = trace.demand_row(t)
    idx = int(np.searchsorted(row, rate_budget_bps, side="right")) - 1
    if idx < 0:
        return 0
    return int(trace.target_grid[idx])


def average_scc(traces: Sequence[TargetVmafTrace], label: str) -> AvgScc:
    """Mean demand per target over all windows of all given traces.

    Windows where a target is unreachable are excluded from that
    target's mean; a target unreachable everywhere stays +inf.  A final
    running maximum keeps the curve non-decreasing when the exclusion
    alone would dent it.
    """
    if not traces:
        raise ValueError("no traces")
    grid = traces[0].target_grid
    for tr in traces[1:]:
        if not np.array_equal(tr.target_grid, grid):
            raise ValueError("traces use different target grids")
    sums = np.zeros(len(grid))
    counts = np.zeros(len(grid), dtype=int)
    for tr in traces:
        if tr.sanitized_demand is None:
            raise ValueError("demand not sanitized yet")
        d = tr.sanitized_demand
        finite = np.isfinite(d)
        sums += np.where(finite, d, 0.0).sum(axis=0)
        counts += finite.sum(axis=0)
    with np.errstate(invalid="ignore"):
        mean = np.where(counts > 0, sums / np.maximum(counts, 1), np.inf)
    mean = np.maximum.accumulate(mean)
    return AvgScc(label=label, target_grid=grid, avg_rate_bps=mean)


# --- CSV export ----------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def write_target_trace_csv(traces: Iterable[TargetVmafTrace], path: str | Path) -> None:
    """Write emulation results as CSV, omitting unreachable cells."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TARGET_TRACE_HEADER)
        for tr in traces:
            for w in range(tr.n_windows):
                for k, target in enumerate(tr.target_grid):
                    crf = int(tr.selected_crf[w, k])
                    if crf < 0:
                        continue
                    writer.writerow(
                        [
                            tr.session_id,
                            w,
                            int(target),
                            crf,
                            _fmt(tr.rates_bps[w, k]),
                            _fmt(tr.experienced_vmaf[w, k]),
                        ]
                    )


def write_avg_scc_csv(curves: Iterable[AvgScc], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AVG_SCC_HEADER)
        for curve in curves:
            for k, target in enumerate(curve.target_grid):
                rate = curve.avg_rate_bps[k]
                if not np.isfinite(rate):
                    continue
                writer.writerow([curve.label, int(target), _fmt(rate)])
