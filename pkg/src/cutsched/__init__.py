"""Cut-aware scheduling and simulation for fleets of QPU modules.

The package plans parallel execution of quantum-circuit jobs across a fleet
of classically interconnected QPU modules, deciding adaptively when to cut
circuits into fragments (fully local variants, or classically coordinated
upstream/downstream pairs) under a sampling-overhead budget, and simulates
the queued system to compare the two cutting modes.
"""

from .cutplan import (CutBudget, CutMode, CutPlan, classical_delay,
                      find_bipartition, overhead, plan_cut, try_cut)
from .errors import (CapacityError, CutschedError, InfeasibleCutError,
                     OracleLimitError, OverheadOverflowError, ParseError,
                     UnschedulableError, ValidationError)
from .fleet import (Device, Fleet, default_fleet, load_fleet, lpst,
                    runtime_estimate, save_fleet)
from .grouping import Group, GroupingParams, causal_index, group_cost, pack_groups
from .report import (METRICS_COLUMNS, load_schedule_report, metrics_csv_text,
                     metrics_row, metrics_table_text, parse_metrics_csv,
                     save_gantt_from_schedule, save_gantt_from_trace,
                     save_metrics_csv, save_schedule_report, schedule_to_dict)
from .scheduler import (BETA_COMM, ModeTag, Placement, PlannerCache, Schedule,
                        SchedulerConfig, count_slots,
                        generate_initial_schedule, makespan, release_after,
                        schedule_with_cuts)
from .simkernel import (EventKind, Metrics, load_trace, replay_metrics,
                        save_trace, simulate, time_weighted_queue_length)
from .workload import (CLASS_PRESETS, Circuit, Job, Stage, WorkloadClass,
                       WorkloadSpec, gen_bridged_circuit, gen_random_circuit,
                       gen_workload, job_to_record, load_workload,
                       record_to_job, save_workload, shots_for_volume)

__version__ = "0.1.0"

__all__ = [
    "BETA_COMM", "CLASS_PRESETS", "CapacityError", "Circuit", "CutBudget",
    "CutMode", "CutPlan", "CutschedError", "Device", "EventKind", "Fleet",
    "Group", "GroupingParams", "InfeasibleCutError", "Job",
    "METRICS_COLUMNS", "Metrics", "ModeTag", "OracleLimitError",
    "OverheadOverflowError", "ParseError", "Placement", "PlannerCache",
    "Schedule", "SchedulerConfig", "Stage", "UnschedulableError",
    "ValidationError", "WorkloadClass", "WorkloadSpec", "causal_index",
    "classical_delay", "count_slots", "default_fleet", "find_bipartition",
    "gen_bridged_circuit", "gen_random_circuit", "gen_workload", "group_cost",
    "generate_initial_schedule", "job_to_record", "load_fleet",
    "load_schedule_report", "load_trace", "load_workload", "lpst", "makespan",
    "metrics_csv_text", "metrics_row", "metrics_table_text", "overhead",
    "pack_groups", "parse_metrics_csv", "plan_cut", "record_to_job",
    "release_after", "replay_metrics", "runtime_estimate", "save_fleet",
    "save_gantt_from_schedule", "save_gantt_from_trace", "save_metrics_csv",
    "save_schedule_report", "save_trace", "save_workload",
    "schedule_with_cuts", "shots_for_volume", "simulate",
    "time_weighted_queue_length", "try_cut",
]
