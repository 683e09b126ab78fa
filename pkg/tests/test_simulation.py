from __future__ import annotations

import csv
import math

import numpy as np
import pytest

from qoeshare import (
    DEFAULT_CURVE,
    METHODS,
    AllocationInput,
    PerSecondRecord,
    ScenarioConfig,
    aggregate_demand,
    allocate_equal_vmaf,
    allocate_max_utility,
    allocate_rate_fair,
    build_session_set,
    compute_kpis,
    compute_static_rates,
    cumulative_shares,
    cut_sessions,
    default_target_grid,
    run_scenario,
    sweep_capacity,
    write_per_second_csv,
    write_shares_csv,
    write_summary_csv,
)
from qoeshare.simulation import (
    AGGREGATE_HEADER,
    PER_SECOND_HEADER,
    SHARES_HEADER,
    SUMMARY_HEADER,
    write_aggregate_demand_csv,
)

CAPACITY = 50e6
SAMPLE_WINDOWS = (0, 37, 119, 219)


@pytest.fixture(scope="module")
def records_by_method(session_set):
    out = {}
    for method in METHODS:
        config = ScenarioConfig(capacity_bps=CAPACITY, method=method, session_set=session_set)
        out[method] = run_scenario(config)
    return out


def records_at(records, t, n_sessions):
    return records[t * n_sessions : (t + 1) * n_sessions]


class TestBuildSessionSet:
    def test_shape_and_order(self, session_set, default_corpus):
        ss = session_set
        assert ss.n_sessions == 30
        assert ss.n_windows == 220
        expected_ids = [
            f"{ladder.clip_id}-s{i:02d}" for ladder in default_corpus for i in range(1, 7)
        ]
        assert list(ss.session_ids) == expected_ids
        assert list(ss.session_clips) == [ladder.clip_id for ladder in default_corpus for _ in range(6)]

    def test_shared_grid(self, session_set):
        grid = default_target_grid()
        assert np.array_equal(session_set.grid, grid)
        for s in session_set.sessions:
            assert np.array_equal(s.target_grid, grid)

    def test_tensors(self, session_set):
        demand = session_set.demand_tensor()
        exp = session_set.experienced_tensor()
        n_targets = len(session_set.grid)
        assert demand.shape == (30, 220, n_targets)
        assert exp.shape == (30, 220, n_targets)
        # sanitized demand rows never decrease along the target axis
        assert np.all(demand[:, :, 1:] >= demand[:, :, :-1])

    def test_average_curves(self, session_set, default_corpus):
        clip_ids = [ladder.clip_id for ladder in default_corpus]
        assert sorted(session_set.clip_sccs) == sorted(clip_ids)
        assert [scc.label for scc in session_set.session_sccs] == list(session_set.session_ids)

    def test_sessions_match_clip_slices(self, session_set, default_corpus):
        ladder = default_corpus[2]
        cuts = list(cut_sessions(ladder, 220, 6))
        s = session_set.sessions[2 * 6 + 3]
        cut = cuts[3]
        assert s.session_id == cut.session_id
        assert s.n_windows == cut.length

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError, match="no sessions"):
            build_session_set([])


class TestScenarioConfig:
    def test_unknown_method(self, session_set):
        with pytest.raises(ValueError, match="unknown method"):
            ScenarioConfig(capacity_bps=1e6, method="fairest", session_set=session_set)

    def test_capacity_must_be_positive(self, session_set):
        with pytest.raises(ValueError, match="capacity"):
            ScenarioConfig(capacity_bps=0.0, method="max_utility", session_set=session_set)

    def test_reallocation_period_fixed(self, session_set):
        with pytest.raises(ValueError, match="reallocation"):
            ScenarioConfig(
                capacity_bps=1e6,
                method="max_utility",
                session_set=session_set,
                reallocation_period=2,
            )


class TestRunScenario:
    def test_record_count_and_order(self, session_set, records_by_method):
        records = records_by_method["max_utility"]
        assert len(records) == 220 * 30
        ids = session_set.session_ids
        for t in SAMPLE_WINDOWS:
            chunk = records_at(records, t, 30)
            assert [r.t for r in chunk] == [t] * 30
            assert [r.session_id for r in chunk] == list(ids)

    def test_utility_follows_curve(self, records_by_method):
        for records in records_by_method.values():
            exp = np.array([r.experienced_vmaf for r in records])
            util = np.array([r.utility for r in records])
            assert np.array_equal(util, DEFAULT_CURVE.utility_array(exp))

    def test_max_utility_matches_single_window_allocator(self, session_set, records_by_method):
        records = records_by_method["max_utility"]
        for t in SAMPLE_WINDOWS:
            inp = AllocationInput(capacity_bps=CAPACITY, sessions=session_set.sessions, t=t)
            alloc = allocate_max_utility(inp)
            chunk = records_at(records, t, 30)
            assert [r.target_vmaf for r in chunk] == alloc.targets.tolist()
            assert [r.rate_bps for r in chunk] == alloc.rates.tolist()

    def test_equal_vmaf_matches_single_window_allocator(self, session_set, records_by_method):
        records = records_by_method["equal_vmaf"]
        for t in SAMPLE_WINDOWS:
            inp = AllocationInput(capacity_bps=CAPACITY, sessions=session_set.sessions, t=t)
            alloc = allocate_equal_vmaf(inp)
            chunk = records_at(records, t, 30)
            assert [r.target_vmaf for r in chunk] == alloc.targets.tolist()
            assert [r.rate_bps for r in chunk] == alloc.rates.tolist()

    def test_rate_fair_matches_single_window_allocator(self, session_set, records_by_method):
        records = records_by_method["rate_fair"]
        for t in SAMPLE_WINDOWS:
            inp = AllocationInput(capacity_bps=CAPACITY, sessions=session_set.sessions, t=t)
            alloc = allocate_rate_fair(inp)
            chunk = records_at(records, t, 30)
            assert [r.target_vmaf for r in chunk] == alloc.targets.tolist()
            assert [r.rate_bps for r in chunk] == alloc.rates.tolist()

    def test_static_methods_hold_rates_constant(self, session_set, records_by_method):
        for method, mode in (("mu_per_clip", "per_clip"), ("mu_per_session", "per_session")):
            if mode == "per_clip":
                sccs = [session_set.clip_sccs[c] for c in session_set.session_clips]
            else:
                sccs = list(session_set.session_sccs)
            static = compute_static_rates(sccs, CAPACITY, mode=mode)
            records = records_by_method[method]
            rates = np.array([r.rate_bps for r in records]).reshape(220, 30)
            assert np.array_equal(rates, np.broadcast_to(static, (220, 30)))

    def test_static_targets_are_best_affordable(self, session_set, records_by_method):
        sccs = list(session_set.session_sccs)
        static = compute_static_rates(sccs, CAPACITY, mode="per_session")
        records = records_by_method["mu_per_session"]
        grid = session_set.grid
        demand = session_set.demand_tensor()
        for t in SAMPLE_WINDOWS:
            chunk = records_at(records, t, 30)
            for s, r in enumerate(chunk):
                k = int(np.sum(demand[s, t] <= static[s])) - 1
                assert r.target_vmaf == (int(grid[k]) if k >= 0 else 0)

    def test_not_admitted_means_zero_quality(self, records_by_method):
        for records in records_by_method.values():
            for r in records:
                if r.target_vmaf == 0:
                    assert r.experienced_vmaf == 0.0
                    assert r.utility == 0.0

    def test_capacity_respected_every_second(self, records_by_method):
        for records in records_by_method.values():
            rates = np.array([r.rate_bps for r in records]).reshape(220, 30)
            for t in range(220):
                assert math.fsum(rates[t]) <= CAPACITY


def toy_records():
    # two seconds, two sessions; experienced [[80, 0], [60, 45]]
    cells = [(0, "a", 80.0, 125.0), (0, "b", 0.0, 0.0), (1, "a", 60.0, 110.0), (1, "b", 45.0, 0.0)]
    return [
        PerSecondRecord(
            t=t,
            session_id=sid,
            method="max_utility",
            capacity_bps=1e6,
            target_vmaf=int(exp),
            experienced_vmaf=exp,
            rate_bps=0.0,
            utility=util,
        )
        for t, sid, exp, util in cells
    ]


class TestComputeKpis:
    def test_toy_values(self):
        report = compute_kpis(toy_records())
        assert report.summary.avg_utility == 58.75
        assert report.summary.avg_vmaf == 46.25
        assert report.summary.frac_below_50 == 0.5
        assert report.summary.frac_zero == 0.25
        assert report.per_second_avg_utility.tolist() == [62.5, 55.0]
        assert report.per_second_avg_vmaf.tolist() == [40.0, 52.5]
        assert report.per_second_min_vmaf.tolist() == [0.0, 45.0]

    def test_summary_identity(self):
        records = toy_records()
        report = compute_kpis(records)
        assert report.summary.method == "max_utility"
        assert report.summary.capacity_bps == 1e6

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="no records"):
            compute_kpis([])

    def test_mixed_methods_rejected(self):
        records = toy_records()
        bad = records[:3] + [
            PerSecondRecord(1, "b", "rate_fair", 1e6, 45, 45.0, 0.0, 0.0)
        ]
        with pytest.raises(ValueError, match="mix"):
            compute_kpis(bad)

    def test_mixed_capacities_rejected(self):
        records = toy_records()
        bad = records[:3] + [
            PerSecondRecord(1, "b", "max_utility", 2e6, 45, 45.0, 0.0, 0.0)
        ]
        with pytest.raises(ValueError, match="mix"):
            compute_kpis(bad)

    def test_unequal_counts_rejected(self):
        with pytest.raises(ValueError, match="unequal"):
            compute_kpis(toy_records()[:3])

    def test_full_scenario_fractions(self, records_by_method):
        report = compute_kpis(records_by_method["rate_fair"])
        exp = np.array([r.experienced_vmaf for r in records_by_method["rate_fair"]])
        assert report.summary.frac_below_50 == float((exp < 50.0).mean())
        assert report.summary.frac_zero == float((exp == 0.0).mean())


class TestSweep:
    def test_rows_ordered_and_match_scenarios(self, session_set):
        caps = [30e6, 50e6]
        methods = ("max_utility", "equal_vmaf")
        rows = sweep_capacity(session_set, caps, methods)
        assert [(r.capacity_bps, r.method) for r in rows] == [
            (30e6, "max_utility"),
            (30e6, "equal_vmaf"),
            (50e6, "max_utility"),
            (50e6, "equal_vmaf"),
        ]
        for row in rows:
            config = ScenarioConfig(
                capacity_bps=row.capacity_bps, method=row.method, session_set=session_set
            )
            assert compute_kpis(run_scenario(config)).summary == row

    def test_job_count_does_not_change_rows(self, session_set):
        caps = [20e6, 35e6, 50e6]
        serial = sweep_capacity(session_set, caps, ("equal_vmaf", "rate_fair"), jobs=1)
        parallel = sweep_capacity(session_set, caps, ("equal_vmaf", "rate_fair"), jobs=2)
        assert serial == parallel

    def test_empty_capacities_rejected(self, session_set):
        with pytest.raises(ValueError, match="no capacities"):
            sweep_capacity(session_set, [])

    def test_unknown_method_rejected(self, session_set):
        with pytest.raises(ValueError, match="unknown method"):
            sweep_capacity(session_set, [1e6], methods=("fairest",))


class TestDemandExports:
    def test_cumulative_shares_shape(self, session_set):
        seconds, ids, cums = cumulative_shares(session_set, 70)
        assert seconds.tolist() == list(range(220))
        assert ids == session_set.session_ids
        assert cums.shape == (220, 30)
        # running sums never decrease across the session axis
        assert np.all(np.diff(cums, axis=1) >= 0)

    def test_cumulative_shares_total(self, session_set):
        _, _, cums = cumulative_shares(session_set, 70)
        k = session_set.sessions[0].target_index(70)
        totals = aggregate_demand(session_set)[:, k]
        assert np.allclose(cums[:, -1], totals, rtol=1e-12)

    def test_target_off_grid_rejected(self, session_set):
        with pytest.raises(ValueError, match="not on the grid"):
            cumulative_shares(session_set, 97)

    def test_aggregate_demand_shape(self, session_set):
        totals = aggregate_demand(session_set)
        assert totals.shape == (220, len(session_set.grid))


class TestCsvWriters:
    def test_per_second_csv(self, tmp_path, records_by_method):
        records = records_by_method["max_utility"][:60]
        path = tmp_path / "per_second.csv"
        write_per_second_csv(records, path)
        rows = list(csv.reader(path.open()))
        assert rows[0] == PER_SECOND_HEADER
        assert len(rows) == 61
        first = rows[1]
        assert first[0] == "0"
        assert first[1] == records[0].session_id
        assert first[3] == repr(CAPACITY)
        assert float(first[6]) == records[0].rate_bps

    def test_summary_csv(self, tmp_path, records_by_method):
        summary = compute_kpis(records_by_method["equal_vmaf"]).summary
        path = tmp_path / "summary.csv"
        write_summary_csv([summary], path)
        rows = list(csv.reader(path.open()))
        assert rows[0] == SUMMARY_HEADER
        assert rows[1][1] == "equal_vmaf"
        assert float(rows[1][2]) == summary.avg_utility

    def test_shares_csv(self, tmp_path, session_set):
        path = tmp_path / "shares.csv"
        write_shares_csv(session_set, 70, path)
        rows = list(csv.reader(path.open()))
        assert rows[0] == SHARES_HEADER
        assert len(rows) == 1 + 220 * 30
        assert rows[1][0] == "0"
        assert rows[1][1] == session_set.session_ids[0]

    def test_aggregate_csv(self, tmp_path, session_set):
        path = tmp_path / "aggregate.csv"
        write_aggregate_demand_csv(session_set, path)
        rows = list(csv.reader(path.open()))
        assert rows[0] == AGGREGATE_HEADER
        assert len(rows) == 1 + 220 * len(session_set.grid)
        totals = aggregate_demand(session_set)
        assert float(rows[1][2]) == totals[0, 0]
