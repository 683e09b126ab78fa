"""QoE-aware sharing of a bottleneck link, simulated from ladder traces.

The pipeline: aggregate per-frame encoder logs into per-window ladder
traces (or generate a synthetic corpus), emulate a target-VMAF encoder
over a grid of quality targets, then compare sharing methods that split
one link across sessions every second.
"""

from .allocation import (
    Allocation,
    AllocationInput,
    allocate_equal_vmaf,
    allocate_max_utility,
    allocate_rate_fair,
    brute_force_max_utility,
    compute_static_rates,
    max_utility_capacity_profile,
)
from .emulation import (
    AvgScc,
    TargetVmafTrace,
    achievable_vmaf,
    average_scc,
    default_target_grid,
    demand,
    emulate_target_vmaf,
    sanitize_demand,
    write_avg_scc_csv,
    write_target_trace_csv,
)
from .simulation import (
    METHODS,
    KpiReport,
    KpiSummary,
    PerSecondRecord,
    ScenarioConfig,
    SessionSet,
    aggregate_demand,
    build_session_set,
    compute_kpis,
    cumulative_shares,
    run_scenario,
    sweep_capacity,
    write_per_second_csv,
    write_shares_csv,
    write_summary_csv,
)
from .synth import ClipProfile, GenParams, default_gen_params, generate_corpus
from .traces import (
    FrameLog,
    LadderFormatError,
    LadderTrace,
    SessionTrace,
    aggregate_frames,
    cut_sessions,
    load_ladder_trace,
    merge_ladder,
    save_ladder_trace,
)
from .utility import DEFAULT_CURVE, UtilityCurve, marginal_utility

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "AllocationInput",
    "AvgScc",
    "ClipProfile",
    "DEFAULT_CURVE",
    "FrameLog",
    "GenParams",
    "KpiReport",
    "KpiSummary",
    "LadderFormatError",
    "LadderTrace",
    "METHODS",
    "PerSecondRecord",
    "ScenarioConfig",
    "SessionSet",
    "SessionTrace",
    "TargetVmafTrace",
    "UtilityCurve",
    "achievable_vmaf",
    "aggregate_demand",
    "aggregate_frames",
    "allocate_equal_vmaf",
    "allocate_max_utility",
    "allocate_rate_fair",
    "average_scc",
    "brute_force_max_utility",
    "build_session_set",
    "compute_kpis",
    "compute_static_rates",
    "cumulative_shares",
    "cut_sessions",
    "default_gen_params",
    "default_target_grid",
    "demand",
    "emulate_target_vmaf",
    "generate_corpus",
    "load_ladder_trace",
    "marginal_utility",
    "max_utility_capacity_profile",
    "merge_ladder",
    "run_scenario",
    "sanitize_demand",
    "save_ladder_trace",
    "sweep_capacity",
    "write_avg_scc_csv",
    "write_per_second_csv",
    "write_shares_csv",
    "write_summary_csv",
    "write_target_trace_csv",
]
