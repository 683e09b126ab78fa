"""Bottleneck resource-sharing methods over per-window demand functions.

All methods see the same inputs: a capacity in bits/s and, for every
session, a sanitized demand row mapping integer quality targets to the
rate that reaches them in the current window.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import List, Protocol, Sequence, Tuple

import numpy as np

from .emulation import AvgScc, ConstantDemand
from .utility import DEFAULT_CURVE, UtilityCurve

__all__ = [
    "DemandView",
    "AllocationInput",
    "Allocation",
    "allocate_max_utility",
    "allocate_equal_vmaf",
    "allocate_rate_fair",
    "compute_static_rates",
    "brute_force_max_utility",
    "max_utility_capacity_profile",
]

BRUTE_FORCE_LIMIT = 10**7


class DemandView(Protocol):
    session_id: str
    target_grid: np.ndarray

    def demand_row(self, t: int) -> np.ndarray: ...


@dataclass(frozen=True)
class AllocationInput:
    """One allocation problem: capacity, sessions and the quality/utility model."""

    capacity_bps: float
    sessions: Sequence[DemandView]
    curve: UtilityCurve = DEFAULT_CURVE
    grid: np.ndarray | None = None
    t: int = 0

    def __post_init__(self) -> None:
        if self.capacity_bps < 0:
            raise ValueError("capacity must be non-negative")
        if not self.sessions:
            raise ValueError("no sessions")
        grid = self.grid if self.grid is not None else self.sessions[0].target_grid
        grid = np.asarray(grid)
        for s in self.sessions:
            if not np.array_equal(s.target_grid, grid):
                raise ValueError("sessions use different target grids")
        object.__setattr__(self, "grid", grid)

    def demand_matrix(self) -> np.ndarray:
        """[n_sessions, n_targets] sanitized demand for window t."""
        return np.stack([s.demand_row(self.t) for s in self.sessions])


@dataclass(frozen=True)
class Allocation:
    """Result of one allocation: per-session target and rate.

    targets holds the assigned integer quality target per session
    (0 = not admitted); rates the granted bits/s.  total_utility is the
    utility sum at the assigned targets.
    """

    targets: np.ndarray
    rates: np.ndarray
    leftover_bps: float
    total_utility: float

    def __post_init__(self) -> None:
        t = np.asarray(self.targets, dtype=int)
        r = np.asarray(self.rates, dtype=float)
        t.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "targets", t)
        object.__setattr__(self, "rates", r)


def _grid_utilities(curve: UtilityCurve, grid: np.ndarray) -> np.ndarray:
    return curve.utility_array(grid.astype(float))


def _step_marginal(du: float, dr: float, r_next: float) -> float:
    # Unreachable step: worthless.  Free step with positive gain: take now.
    if du <= 0.0:
        return 0.0
    if math.isinf(r_next):
        return 0.0
    if dr == 0.0:
        return math.inf
    return du / dr


def _greedy_steps(
    demands: np.ndarray,
    grid: np.ndarray,
    curve: UtilityCurve,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Full greedy step sequence, ignoring capacity.

    Returns (session, target_index, rate_after, rate_delta) arrays in the
    order the greedy would take the steps.  The executed allocation for a
    given capacity is the longest prefix whose cumulative rate delta fits.
    Ties on marginal utility go to the lowest session index.
    """
    n_sessions = demands.shape[0]
    util = _grid_utilities(curve, grid)
    # Comparison instead of diff: inf - inf would warn on unreachable rungs.
    if np.any(demands[:, 1:] < demands[:, :-1]):
        raise ValueError("demand must be sanitized (non-decreasing in target)")

    admit_idx = int(np.searchsorted(grid, curve.v_min, side="left"))
    # Highest step index still worth taking: beyond v_max utility is flat.
    top_idx = int(np.searchsorted(grid, curve.v_max, side="right")) - 1

    heap: List[Tuple[float, int, int, float, float, float]] = []
    if admit_idx <= top_idx:
        for s in range(n_sessions):
            r = float(demands[s, admit_idx])
            du = _step_marginal(util[admit_idx], r, r)
            heap.append((-du, s, admit_idx, r, r, du))
    heapq.heapify(heap)

    out_session: List[int] = []
    out_idx: List[int] = []
    out_rate: List[float] = []
    out_dr: List[float] = []

    while heap:
        neg_du, s, idx, r_next, dr, du = heapq.heappop(heap)
        if du <= 0.0:
            break
        out_session.append(s)
        out_idx.append(idx)
        out_rate.append(r_next)
        out_dr.append(dr)
        nxt = idx + 1
        if nxt <= top_idx:
            r2 = float(demands[s, nxt])
            dr2 = r2 - r_next
            if dr2 < 0:
                raise ValueError("demand must be sanitized (non-decreasing in target)")
            du2 = _step_marginal(util[nxt] - util[idx], dr2, r2)
            heapq.heappush(heap, (-du2, s, nxt, r2, dr2, du2))

    return (
        np.array(out_session, dtype=np.int32),
        np.array(out_idx, dtype=np.int32),
        np.array(out_rate),
        np.array(out_dr),
    )


def _allocation_from_state(
    v_idx: np.ndarray,
    rates: np.ndarray,
    grid: np.ndarray,
    util: np.ndarray,
    capacity: float,
    spent: float,
) -> Allocation:
    targets = np.where(v_idx >= 0, grid[np.maximum(v_idx, 0)], 0)
    total = float(util[v_idx[v_idx >= 0]].sum()) if np.any(v_idx >= 0) else 0.0
    return Allocation(
        targets=targets,
        rates=rates.copy(),
        leftover_bps=capacity - spent,
        total_utility=total,
    )


def allocate_max_utility(inp: AllocationInput, mode: str = "break") -> Allocation:
    """Greedy maximum-utility allocation.

    Repeatedly grants the step with the best utility gain per extra
    bit/s: admit a session at the lowest useful target, then raise it
    one grid point at a time up to the curve's v_max.  In "break" mode
    the first step that no longer fits ends the run; in "skip" mode that
    session is frozen and the search continues with the others.
    """
    if mode not in ("break", "skip"):
        raise ValueError(f"unknown mode {mode!r}")
    demands = inp.demand_matrix()
    grid = inp.grid
    util = _grid_utilities(inp.curve, grid)
    n_sessions = demands.shape[0]

    v_idx = np.full(n_sessions, -1, dtype=np.int32)
    rates = np.zeros(n_sessions)

    if mode == "break":
        sess, idx, rate_after, dr = _greedy_steps(demands, grid, inp.curve)
        spent = 0.0
        for k in range(len(sess)):
            if spent + dr[k] > inp.capacity_bps:
                break
            spent += dr[k]
            v_idx[sess[k]] = idx[k]
            rates[sess[k]] = rate_after[k]
        return _allocation_from_state(v_idx, rates, grid, util, inp.capacity_bps, spent)

    # skip mode: identical ordering, but an unaffordable step only
    # retires its own session.
    if np.any(demands[:, 1:] < demands[:, :-1]):
        raise ValueError("demand must be sanitized (non-decreasing in target)")
    admit_idx = int(np.searchsorted(grid, inp.curve.v_min, side="left"))
    top_idx = int(np.searchsorted(grid, inp.curve.v_max, side="right")) - 1
    heap: List[Tuple[float, int, int, float, float, float]] = []
    if admit_idx <= top_idx:
        for s in range(n_sessions):
            r = float(demands[s, admit_idx])
            du = _step_marginal(util[admit_idx], r, r)
            heap.append((-du, s, admit_idx, r, r, du))
    heapq.heapify(heap)
    spent = 0.0
    while heap:
        neg_du, s, idx, r_next, dr, du = heapq.heappop(heap)
        if du <= 0.0:
            break
        if spent + dr > inp.capacity_bps:
            continue  # retire this session, keep the rest going
        spent += dr
        v_idx[s] = idx
        rates[s] = r_next
        nxt = idx + 1
        if nxt <= top_idx:
            r2 = float(demands[s, nxt])
            dr2 = r2 - r_next
            du2 = _step_marginal(util[nxt] - util[idx], dr2, r2)
            heapq.heappush(heap, (-du2, s, nxt, r2, dr2, du2))
    return _allocation_from_state(v_idx, rates, grid, util, inp.capacity_bps, spent)


def max_utility_capacity_profile(
    inp: AllocationInput, capacities: Sequence[float]
) -> List[Allocation]:
    """Greedy allocations for many capacities on one demand snapshot.

    The greedy step order does not depend on capacity, so one step
    sequence serves every capacity; each result equals
    allocate_max_utility at that capacity in "break" mode.
    """
    demands = inp.demand_matrix()
    grid = inp.grid
    util = _grid_utilities(inp.curve, grid)
    n_sessions = demands.shape[0]
    sess, idx, rate_after, dr = _greedy_steps(demands, grid, inp.curve)

    order = np.argsort(np.asarray(capacities), kind="stable")
    v_idx = np.full(n_sessions, -1, dtype=np.int32)
    rates = np.zeros(n_sessions)
    out: List[Allocation | None] = [None] * len(capacities)
    spent = 0.0
    k = 0
    for pos in order:
        cap = float(capacities[pos])
        while k < len(sess) and spent + dr[k] <= cap:
            spent += dr[k]
            v_idx[sess[k]] = idx[k]
            rates[sess[k]] = rate_after[k]
            k += 1
        out[pos] = _allocation_from_state(v_idx, rates, grid, util, cap, spent)
    return out  # type: ignore[return-value]


def allocate_equal_vmaf(inp: AllocationInput) -> Allocation:
    """Give every session the same quality target, as high as fits.

    Scans the whole grid, including targets below the utility curve's
    v_min; if even the lowest common target does not fit, nobody is
    admitted.  Leftover capacity stays idle.
    """
    demands = inp.demand_matrix()
    grid = inp.grid
    util = _grid_utilities(inp.curve, grid)
    totals = demands.sum(axis=0)
    if np.any(totals[1:] < totals[:-1]):
        raise ValueError("demand must be sanitized (non-decreasing in target)")
    level = int(np.searchsorted(totals, inp.capacity_bps, side="right")) - 1
    n = demands.shape[0]
    if level < 0:
        return Allocation(
            targets=np.zeros(n, dtype=int),
            rates=np.zeros(n),
            leftover_bps=inp.capacity_bps,
            total_utility=0.0,
        )
    rates = demands[:, level].copy()
    spent = float(totals[level])
    return Allocation(
        targets=np.full(n, int(grid[level])),
        rates=rates,
        leftover_bps=inp.capacity_bps - spent,
        total_utility=float(util[level]) * n,
    )


def allocate_rate_fair(inp: AllocationInput) -> Allocation:
    """Split capacity evenly; each session gets the best target its share buys."""
    demands = inp.demand_matrix()
    grid = inp.grid
    util = _grid_utilities(inp.curve, grid)
    n = demands.shape[0]
    share = inp.capacity_bps / n
    # Nudge the share down by ulps if rounding would push the sum past C.
    while math.fsum([share] * n) > inp.capacity_bps:
        share = math.nextafter(share, 0.0)
    idx = np.sum(demands <= share, axis=1) - 1
    targets = np.where(idx >= 0, grid[np.maximum(idx, 0)], 0)
    total = float(util[idx[idx >= 0]].sum()) if np.any(idx >= 0) else 0.0
    rates = np.full(n, share)
    return Allocation(
        targets=targets,
        rates=rates,
        leftover_bps=inp.capacity_bps - math.fsum(rates),
        total_utility=total,
    )


def compute_static_rates(
    avg_sccs: Sequence[AvgScc],
    capacity_bps: float,
    curve: UtilityCurve = DEFAULT_CURVE,
    mode: str = "per_session",
) -> np.ndarray:
    """Fixed per-session rates from the greedy run on average demand curves.

    avg_sccs holds one curve per session; in per_clip mode sessions cut
    from the same clip pass the same (shared) curve object.
    """
    if mode not in ("per_session", "per_clip"):
        raise ValueError(f"unknown mode {mode!r}")
    views = [ConstantDemand(scc, session_id=f"{scc.label}#{i}") for i, scc in enumerate(avg_sccs)]
    inp = AllocationInput(capacity_bps=capacity_bps, sessions=views, curve=curve, t=0)
    return allocate_max_utility(inp).rates


def brute_force_max_utility(
    inp: AllocationInput, candidates: Sequence[Sequence[int]] | None = None
) -> Allocation:
    """Exhaustive reference for the greedy: best total utility over all
    per-session assignments from {off} plus each session's candidate
    targets.  Ties go to the lexicographically smallest target vector.
    """
    demands = inp.demand_matrix()
    grid = inp.grid
    util = _grid_utilities(inp.curve, grid)
    n = demands.shape[0]
    if candidates is None:
        candidates = [list(map(int, grid))] * n
    option_sets: List[List[int]] = []
    size = 1
    for s in range(n):
        uniq = sorted(set(int(c) for c in candidates[s]))
        opts = [-1] + [int(np.searchsorted(grid, c)) for c in uniq]
        for c, o in zip(uniq, opts[1:]):
            if o >= len(grid) or int(grid[o]) != c:
                raise ValueError(f"candidate {c} not on the grid")
        option_sets.append(opts)
        size *= len(opts)
        if size > BRUTE_FORCE_LIMIT:
            raise ValueError("search space too large for brute force")

    best_value = -1.0
    best_combo: Tuple[int, ...] | None = None
    best_spent = 0.0
    for combo in itertools.product(*option_sets):
        spent = 0.0
        value = 0.0
        feasible = True
        for s, o in enumerate(combo):
            if o < 0:
                continue
            d = demands[s, o]
            if not math.isfinite(d):
                feasible = False
                break
            spent += d
            value += util[o]
        if not feasible or spent > inp.capacity_bps:
            continue
        if value > best_value:
            best_value = value
            best_combo = combo
            best_spent = spent
    assert best_combo is not None  # the all-off assignment is always feasible
    v_idx = np.array(best_combo, dtype=np.int32)
    rates = np.where(v_idx >= 0, demands[np.arange(n), np.maximum(v_idx, 0)], 0.0)
    targets = np.where(v_idx >= 0, grid[np.maximum(v_idx, 0)], 0)
    return Allocation(
        targets=targets,
        rates=rates,
        leftover_bps=inp.capacity_bps - best_spent,
        total_utility=max(best_value, 0.0),
    )
