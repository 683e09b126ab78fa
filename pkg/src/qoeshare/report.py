"""Figure rendering for simulation outputs.

Every function writes PNG files next to the CSV exports so a report
directory carries both the numbers and their plots.  The Agg backend is
forced; nothing here opens a window.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .emulation import AvgScc
from .simulation import KpiReport, KpiSummary

__all__ = [
    "plot_kpi_curves",
    "plot_scenario_series",
    "plot_scc_curves",
    "plot_shares",
]

_DPI = 120


def _finish(fig: plt.Figure, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def plot_kpi_curves(summaries: Sequence[KpiSummary], out_dir: str | Path) -> List[Path]:
    """One figure per KPI: value over capacity, one line per method."""
    out_dir = Path(out_dir)
    by_method: Dict[str, List[KpiSummary]] = {}
    for row in summaries:
        by_method.setdefault(row.method, []).append(row)
    panels = [
        ("avg_utility", "average utility", "kpi_avg_utility.png"),
        ("avg_vmaf", "average VMAF", "kpi_avg_vmaf.png"),
        ("frac_below_50", "fraction of session-seconds below VMAF 50", "kpi_frac_below_50.png"),
        ("frac_zero", "fraction of session-seconds at VMAF 0", "kpi_frac_zero.png"),
    ]
    paths: List[Path] = []
    for attr, label, name in panels:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for method, rows in by_method.items():
            rows = sorted(rows, key=lambda r: r.capacity_bps)
            x = [r.capacity_bps / 1e6 for r in rows]
            y = [getattr(r, attr) for r in rows]
            ax.plot(x, y, label=method)
        ax.set_xlabel("capacity (Mbit/s)")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
        ax.legend()
        paths.append(_finish(fig, out_dir / name))
    return paths


def plot_scenario_series(
    reports: Mapping[str, KpiReport], out_dir: str | Path
) -> List[Path]:
    """Per-second series of one capacity: utility, average and minimum VMAF."""
    out_dir = Path(out_dir)
    panels = [
        ("per_second_avg_utility", "average utility", "scenario_avg_utility.png"),
        ("per_second_avg_vmaf", "average VMAF", "scenario_avg_vmaf.png"),
        ("per_second_min_vmaf", "minimum VMAF", "scenario_min_vmaf.png"),
    ]
    paths: List[Path] = []
    for attr, label, name in panels:
        fig, ax = plt.subplots(figsize=(8, 4.5))
        for method, report in reports.items():
            series = getattr(report, attr)
            ax.plot(np.arange(len(series)), series, label=method, linewidth=1.0)
        ax.set_xlabel("time (s)")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
        ax.legend()
        paths.append(_finish(fig, out_dir / name))
    return paths


def plot_scc_curves(curves: Sequence[AvgScc], path: str | Path) -> Path:
    """Average demand against quality target, one line per curve label."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for curve in curves:
        rates = np.asarray(curve.avg_rate_bps, dtype=float)
        mask = np.isfinite(rates)
        ax.plot(curve.target_grid[mask], rates[mask] / 1e6, label=curve.label)
    ax.set_xlabel("target VMAF")
    ax.set_ylabel("average rate (Mbit/s)")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3, which="both")
    ax.legend()
    return _finish(fig, Path(path))


def plot_shares(
    seconds: np.ndarray,
    session_ids: Sequence[str],
    cums: np.ndarray,
    path: str | Path,
    capacity_bps: float | None = None,
) -> Path:
    """Cumulative per-session demand over time; cums is [n_windows, n_sessions]."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    n_sessions = cums.shape[1]
    prev = np.zeros(len(seconds))
    for s in range(n_sessions):
        cur = cums[:, s] / 1e6
        ax.fill_between(seconds, prev, cur, alpha=0.55, linewidth=0.0)
        prev = cur
    ax.plot(seconds, prev, color="black", linewidth=0.8, label=f"total of {n_sessions} sessions")
    if capacity_bps is not None:
        ax.axhline(capacity_bps / 1e6, color="red", linestyle="--", label="capacity")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("cumulative demand (Mbit/s)")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="upper right")
    return _finish(fig, Path(path))
