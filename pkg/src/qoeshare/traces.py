"""Frame logs, windowed CRF-ladder traces and session cuts.

A ladder trace holds, for every fixed-length time window of a clip and
every CRF in the encoding ladder, the mean rate and the window VMAF of
that encode.  All downstream processing (encoder emulation, allocation,
simulation) works on these windows.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np

__all__ = [
    "FrameLog",
    "LadderTrace",
    "SessionTrace",
    "LadderFormatError",
    "aggregate_frames",
    "load_ladder_trace",
    "save_ladder_trace",
    "cut_sessions",
]

# Frame VMAF values are clamped to this floor before the harmonic mean
# so a single zero-quality frame cannot zero out a whole window.
VMAF_FLOOR = 0.01

LADDER_HEADER = ["clip_id", "window_index", "crf", "mean_rate_bps", "window_vmaf"]


class LadderFormatError(ValueError):
    """Raised when a ladder CSV file is malformed."""


@dataclass(frozen=True)
class FrameLog:
    """Per-frame sizes and quality scores of one encode of one clip."""

    clip_id: str
    crf: int
    timestamps_s: np.ndarray
    frame_sizes_bytes: np.ndarray
    frame_vmafs: np.ndarray

    def __post_init__(self) -> None:
        ts = np.asarray(self.timestamps_s, dtype=float)
        sizes = np.asarray(self.frame_sizes_bytes, dtype=float)
        vmafs = np.asarray(self.frame_vmafs, dtype=float)
        if not (len(ts) == len(sizes) == len(vmafs)):
            raise ValueError("frame arrays must have equal length")
        if len(ts) and np.any(np.diff(ts) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if np.any(sizes <= 0):
            raise ValueError("frame sizes must be positive")
        if np.any((vmafs < 0) | (vmafs > 100)):
            raise ValueError("frame VMAF must lie in [0, 100]")
        for name, arr in (("timestamps_s", ts), ("frame_sizes_bytes", sizes), ("frame_vmafs", vmafs)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.timestamps_s)


@dataclass(frozen=True, eq=False)
class LadderTrace:
    """Windowed (rate, VMAF) points for every CRF of one clip's ladder.

    rates_bps and vmafs are [n_windows, n_crfs] arrays aligned with
    crf_values (ascending).
    """

    clip_id: str
    crf_values: Tuple[int, ...]
    rates_bps: np.ndarray
    vmafs: np.ndarray
    window_duration_s: float = 1.0

    def __post_init__(self) -> None:
        crfs = tuple(int(c) for c in self.crf_values)
        if list(crfs) != sorted(set(crfs)):
            raise ValueError("crf_values must be strictly ascending and unique")
        rates = np.asarray(self.rates_bps, dtype=float)
        vmafs = np.asarray(self.vmafs, dtype=float)
        if rates.shape != vmafs.shape or rates.ndim != 2 or rates.shape[1] != len(crfs):
            raise ValueError("rates/vmafs must be [n_windows, n_crfs] arrays")
        if np.any(rates < 0):
            raise ValueError("rates must be non-negative")
        if np.any((vmafs < 0) | (vmafs > 100)):
            raise ValueError("window VMAF must lie in [0, 100]")
        if self.window_duration_s <= 0:
            raise ValueError("window duration must be positive")
        rates.setflags(write=False)
        vmafs.setflags(write=False)
        object.__setattr__(self, "crf_values", crfs)
        object.__setattr__(self, "rates_bps", rates)
        object.__setattr__(self, "vmafs", vmafs)

    @property
    def n_windows(self) -> int:
        return self.rates_bps.shape[0]

    def window(self, index: int) -> dict:
        """Map crf -> (mean_rate_bps, window_vmaf) for one window."""
        return {
            crf: (float(self.rates_bps[index, k]), float(self.vmafs[index, k]))
            for k, crf in enumerate(self.crf_values)
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LadderTrace):
            return NotImplemented
        return (
            self.clip_id == other.clip_id
            and self.crf_values == other.crf_values
            and self.window_duration_s == other.window_duration_s
            and np.array_equal(self.rates_bps, other.rates_bps)
            and np.array_equal(self.vmafs, other.vmafs)
        )


@dataclass(frozen=True)
class SessionTrace:
    """A contiguous slice of a clip's ladder trace, viewed as one session."""

    session_id: str
    ladder: LadderTrace
    start_window: int
    length: int

    def __post_init__(self) -> None:
        if self.start_window < 0 or self.length <= 0:
            raise ValueError("invalid slice bounds")
        if self.start_window + self.length > self.ladder.n_windows:
            raise ValueError("slice exceeds clip length")

    @property
    def source_clip(self) -> str:
        return self.ladder.clip_id

    @property
    def rates_bps(self) -> np.ndarray:
        return self.ladder.rates_bps[self.start_window : self.start_window + self.length]

    @property
    def vmafs(self) -> np.ndarray:
        return self.ladder.vmafs[self.start_window : self.start_window + self.length]


# --- frame aggregation -------------------------------------------------


def aggregate_frames(log: FrameLog, window_duration_s: float = 1.0) -> LadderTrace:
    """Aggregate a frame log into fixed windows of one encode.

    Window rate is total bytes * 8 / window duration; window VMAF is the
    harmonic mean of the frame VMAFs (clamped to a small positive floor).
    The log is assumed to cover one inter-frame interval past the last
    frame; a trailing window not fully covered is dropped.  A fully empty
    window inside the covered span is a gap and raises ValueError.
    """
    if window_duration_s <= 0:
        raise ValueError("window duration must be positive")
    n = len(log)
    if n == 0:
        raise ValueError("no frames")
    ts = log.timestamps_s
    if n >= 2:
        gap = float(np.median(np.diff(ts)))
    else:
        gap = window_duration_s
    coverage_end = float(ts[-1]) + gap
    eps = 1e-9 * window_duration_s
    n_windows = int(math.floor(coverage_end / window_duration_s + eps))
    if n_windows < 1:
        raise ValueError("no complete window in trace")

    idx = np.floor(ts / window_duration_s).astype(int)
    keep = idx < n_windows
    idx = idx[keep]
    counts = np.bincount(idx, minlength=n_windows)
    if np.any(counts == 0):
        raise ValueError("gap in trace: window with zero frames")

    sizes = log.frame_sizes_bytes[keep]
    vmafs = np.maximum(log.frame_vmafs[keep], VMAF_FLOOR)
    byte_sums = np.bincount(idx, weights=sizes, minlength=n_windows)
    # fsum: the harmonic mean must not depend on summation order
    inv = 1.0 / vmafs
    bounds = np.searchsorted(idx, np.arange(n_windows + 1))
    inv_sums = np.array([math.fsum(inv[bounds[w] : bounds[w + 1]]) for w in range(n_windows)])

    rates = byte_sums * 8.0 / window_duration_s
    window_vmaf = counts / inv_sums
    return LadderTrace(
        clip_id=log.clip_id,
        crf_values=(log.crf,),
        rates_bps=rates[:, None],
        vmafs=window_vmaf[:, None],
        window_duration_s=window_duration_s,
    )


def merge_ladder(traces: Sequence[LadderTrace]) -> LadderTrace:
    """Combine single-CRF traces of one clip into a full ladder trace."""
    if not traces:
        raise ValueError("no traces to merge")
    clip = traces[0].clip_id
    dur = traces[0].window_duration_s
    n = min(t.n_windows for t in traces)
    parts = sorted(traces, key=lambda t: t.crf_values[0])
    crfs: List[int] = []
    for t in parts:
        if t.clip_id != clip:
            raise ValueError("traces belong to different clips")
        if t.window_duration_s != dur:
            raise ValueError("traces have different window durations")
        crfs.extend(t.crf_values)
    rates = np.hstack([t.rates_bps[:n] for t in parts])
    vmafs = np.hstack([t.vmafs[:n] for t in parts])
    return LadderTrace(clip, tuple(crfs), rates, vmafs, dur)


# --- CSV interchange ---------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def save_ladder_trace(trace: LadderTrace, path: str | Path) -> None:
    """Write a ladder trace as CSV (one row per window and CRF)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LADDER_HEADER)
        for w in range(trace.n_windows):
            for k, crf in enumerate(trace.crf_values):
                writer.writerow(
                    [trace.clip_id, w, crf, _fmt(trace.rates_bps[w, k]), _fmt(trace.vmafs[w, k])]
                )


def load_ladder_trace(path: str | Path, window_duration_s: float = 1.0) -> LadderTrace:
    """Read a ladder trace CSV; row order does not matter."""
    path = Path(path)
    cells: dict[tuple[int, int], tuple[float, float]] = {}
    clip_id: str | None = None
    with path.open("r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != LADDER_HEADER:
            raise LadderFormatError(f"{path}: bad header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise LadderFormatError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            cid, w_s, crf_s, rate_s, vmaf_s = row
            try:
                w = int(w_s)
                crf = int(crf_s)
                rate = float(rate_s)
                vmaf = float(vmaf_s)
            except ValueError as exc:
                raise LadderFormatError(f"{path}:{lineno}: {exc}") from None
            if clip_id is None:
                clip_id = cid
            elif cid != clip_id:
                raise LadderFormatError(f"{path}:{lineno}: multiple clip ids in one file")
            key = (w, crf)
            if key in cells:
                raise LadderFormatError(f"{path}:{lineno}: duplicate row for window {w}, crf {crf}")
            cells[key] = (rate, vmaf)
    if not cells or clip_id is None:
        raise LadderFormatError(f"{path}: empty ladder file")

    crfs = tuple(sorted({crf for _, crf in cells}))
    n_windows = max(w for w, _ in cells) + 1
    rates = np.empty((n_windows, len(crfs)))
    vmafs = np.empty((n_windows, len(crfs)))
    for w in range(n_windows):
        for k, crf in enumerate(crfs):
            cell = cells.get((w, crf))
            if cell is None:
                raise LadderFormatError(f"{path}: incomplete ladder: window {w} lacks crf {crf}")
            rates[w, k], vmafs[w, k] = cell
    return LadderTrace(clip_id, crfs, rates, vmafs, window_duration_s)


# --- session cutting ---------------------------------------------------


def cut_sessions(trace: LadderTrace, session_length: int, count: int) -> List[SessionTrace]:
    """Cut consecutive non-overlapping sessions from the start of a clip."""
    if session_length <= 0 or count <= 0:
        raise ValueError("session_length and count must be positive")
    if session_length * count > trace.n_windows:
        raise ValueError(
            f"clip {trace.clip_id} has {trace.n_windows} windows, "
            f"cannot cut {count} sessions of {session_length}"
        )
    return [
        SessionTrace(
            session_id=f"{trace.clip_id}-s{i + 1:02d}",
            ladder=trace,
            start_window=i * session_length,
            length=session_length,
        )
        for i in range(count)
    ]
