"""Command-line front end: workload generation, scheduling, simulation,
report emission, and the built-in self-check."""

from __future__ import annotations

import argparse
import os
import random
import sys

from .cutplan import CutBudget, CutMode, classical_delay, find_bipartition, overhead
from .errors import (CutschedError, OracleLimitError, ParseError,
                     UnschedulableError, ValidationError)
from .fleet import Fleet, default_fleet, load_fleet
from .grouping import GroupingParams, group_cost, pack_groups
from .scheduler import SchedulerConfig, generate_initial_schedule, schedule_with_cuts
from .workload import (CLASS_PRESETS, Job, Stage, WorkloadClass,
                       gen_random_circuit, gen_workload, load_workload,
                       save_workload)

FLEET_ENV_VAR = "CUTSCHED_FLEET"

_EXIT_OK = 0
_EXIT_VALIDATION = 2
_EXIT_UNSCHEDULABLE = 3

_CLASS_CHOICES = {
    "small": WorkloadClass.SMALL,
    "large": WorkloadClass.LARGE_MANDATORY,
    "random": WorkloadClass.RANDOM_HETEROGENEOUS,
}


def _resolve_fleet(path: str | None) -> Fleet:
    if path is None:
        path = os.environ.get(FLEET_ENV_VAR) or None
    if path is None:
        return default_fleet()
    return load_fleet(path)


def _modes(arg: str) -> list[CutMode]:
    if arg == "both":
        return [CutMode.LO, CutMode.LOCC]
    return [CutMode(arg)]


def _build_config(mode: CutMode, fleet: Fleet, args) -> SchedulerConfig:
    budget = CutBudget(max_overhead=args.budget,
                       adaptive_threshold=args.theta)
    grouping = GroupingParams(q_dev=fleet.max_qubits, c_max=args.cmax,
                              lam=args.lam)
    return SchedulerConfig(mode=mode, budget=budget, grouping=grouping,
                           window=args.window,
                           lambda_fidelity=args.lambda_fidelity)


def _add_sched_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--fleet", help="fleet calibration file "
                        f"(default: ${FLEET_ENV_VAR} or built-in fleet)")
    parser.add_argument("--window", type=int, default=50,
                        help="scheduling window size (default 50)")
    parser.add_argument("--theta", type=float, default=0.5,
                        help="adaptive cut width threshold as a fraction of "
                        "the largest device (default 0.5)")
    parser.add_argument("--budget", type=int, default=729,
                        help="sampling overhead budget (default 729)")
    parser.add_argument("--lambda", dest="lam", type=float, default=1.0,
                        help="causal-span weight in the grouping cost "
                        "(default 1.0)")
    parser.add_argument("--lambda-fidelity", type=float, default=0.1,
                        help="LPST weight in device choice (default 0.1)")
    parser.add_argument("--cmax", type=int, default=8,
                        help="max jobs per group (default 8)")


def _add_gen_flags(parser: argparse.ArgumentParser,
                   require_class: bool) -> None:
    parser.add_argument("--class", dest="wl_class",
                        choices=sorted(_CLASS_CHOICES),
                        default="random" if require_class else None,
                        help="workload class to generate")
    parser.add_argument("--count", type=int, default=50,
                        help="number of jobs (default 50)")
    parser.add_argument("--rate", type=float, default=1.0,
                        help="Poisson arrival rate, jobs per second "
                        "(default 1.0)")
    parser.add_argument("--large-fraction", type=float, default=None,
                        help="override the class's share of over-capacity "
                        "jobs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cutsched",
        description="Plan and simulate cut-aware quantum job schedules "
        "across a fleet of QPU modules.")
    parser.add_argument("--self-check", action="store_true",
                        help="run the built-in oracle-equivalence suite and "
                        "exit")
    sub = parser.add_subparsers(dest="command")

    g = sub.add_parser("gen-workload", help="generate a synthetic workload")
    _add_gen_flags(g, require_class=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output workload file")

    s = sub.add_parser("schedule", help="one-shot schedule of a workload")
    s.add_argument("--workload", required=True)
    s.add_argument("--mode", choices=["lo", "locc", "both"], default="lo")
    s.add_argument("--seed", type=int, default=0,
                   help="accepted for interface symmetry; scheduling itself "
                   "is deterministic")
    s.add_argument("--out", required=True, help="output directory")
    _add_sched_flags(s)

    m = sub.add_parser("simulate", help="discrete-event simulation")
    m.add_argument("--workload", help="workload file; omit to generate one")
    _add_gen_flags(m, require_class=False)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--mode", choices=["lo", "locc", "both"], default="both")
    m.add_argument("--out", required=True, help="output directory")
    _add_sched_flags(m)

    r = sub.add_parser("report", help="re-emit plots/metrics from saved "
                       "schedule or trace files")
    r.add_argument("--schedule", help="schedule report JSON")
    r.add_argument("--trace", help="simulation trace JSONL")
    r.add_argument("--fleet")
    r.add_argument("--out", required=True, help="output directory")
    return parser


def _cmd_gen_workload(args) -> int:
    jobs = gen_workload(_CLASS_CHOICES[args.wl_class], args.count, args.rate,
                        args.seed, large_fraction=args.large_fraction)
    save_workload(jobs, args.out)
    print(f"wrote {len(jobs)} jobs to {args.out}")
    return _EXIT_OK


def _cmd_schedule(args) -> int:
    from . import report as rp
    fleet = _resolve_fleet(args.fleet)
    jobs = load_workload(args.workload)
    os.makedirs(args.out, exist_ok=True)
    for mode in _modes(args.mode):
        config = _build_config(mode, fleet, args)
        schedule = schedule_with_cuts(jobs, fleet, config)
        report_path = os.path.join(args.out, f"schedule_{mode.value}.json")
        gantt_path = os.path.join(args.out, f"gantt_{mode.value}.svg")
        rp.save_schedule_report(schedule, mode.value, report_path)
        rp.save_gantt_from_schedule(
            schedule, fleet, gantt_path,
            f"schedule ({mode.value}, makespan {schedule.makespan:.3f} s)")
        print(f"{mode.value}: makespan {schedule.makespan!r} s, "
              f"{len(schedule.placements)} placements -> {report_path}")
    return _EXIT_OK


def _cmd_simulate(args) -> int:
    from . import report as rp
    from .simkernel import save_trace, simulate
    fleet = _resolve_fleet(args.fleet)
    if args.workload:
        jobs = load_workload(args.workload)
    else:
        wl_class = _CLASS_CHOICES[args.wl_class or "random"]
        jobs = gen_workload(wl_class, args.count, args.rate, args.seed,
                            large_fraction=args.large_fraction)
    os.makedirs(args.out, exist_ok=True)
    rows = []
    for mode in _modes(args.mode):
        config = _build_config(mode, fleet, args)
        metrics, trace = simulate(jobs, fleet, config)
        rows.append((mode.value.upper(), metrics))
        save_trace(trace, os.path.join(args.out, f"trace_{mode.value}.jsonl"))
        rp.save_gantt_from_trace(
            trace, fleet, os.path.join(args.out, f"gantt_{mode.value}.svg"),
            f"simulated schedule ({mode.value})")
    rp.save_metrics_csv(rows, os.path.join(args.out, "metrics.csv"))
    table = rp.metrics_table_text(rows)
    rp.atomic_write_text(os.path.join(args.out, "metrics.txt"), table)
    print(table, end="")
    return _EXIT_OK


def _cmd_report(args) -> int:
    from . import report as rp
    from .simkernel import load_trace, replay_metrics
    if not args.schedule and not args.trace:
        raise ValidationError("report needs --schedule and/or --trace")
    fleet = _resolve_fleet(args.fleet)
    os.makedirs(args.out, exist_ok=True)
    if args.schedule:
        doc = rp.load_schedule_report(args.schedule)
        bars = []
        for p in doc["placements"]:
            roots = sorted({m["parent_id"] or m["id"] for m in p["members"]})
            bars.append((p["device"], p["start"], p["finish"], roots))
        rp._render_gantt(bars, fleet,
                         os.path.join(args.out, "gantt_schedule.svg"),
                         f"schedule ({doc['mode']}, makespan "
                         f"{doc['makespan']:.3f} s)")
        print(f"schedule report: mode {doc['mode']}, "
              f"makespan {doc['makespan']!r} s")
    if args.trace:
        trace = load_trace(args.trace)
        metrics = replay_metrics(trace)
        rows = [("REPLAY", metrics)]
        rp.save_metrics_csv(rows, os.path.join(args.out, "metrics.csv"))
        rp.atomic_write_text(os.path.join(args.out, "metrics.txt"),
                             rp.metrics_table_text(rows))
        rp.save_gantt_from_trace(trace, fleet,
                                 os.path.join(args.out, "gantt_trace.svg"),
                                 "replayed schedule")
        print(rp.metrics_table_text(rows), end="")
    return _EXIT_OK


# ---------------------------------------------------------------------------
# Self-check
# ---------------------------------------------------------------------------

def _check_overheads() -> str | None:
    for k in range(7):
        if (overhead(CutMode.LO, k) != 9 ** k
                or overhead(CutMode.LOCC, k) != 4 ** k
                or overhead(CutMode.LO_WIRE, k) != 16 ** k):
            return f"overhead mismatch at k={k}"
    return None


def _check_min_cut() -> str | None:
    from .oracles import brute_min_cut
    rng = random.Random(20240)
    for i in range(30):
        width = rng.randint(2, 12)
        circ = gen_random_circuit(rng, f"sc{i}", width, rng.randint(4, 60))
        q_target = rng.randint((width + 1) // 2, width)
        _, _, n_cut = find_bipartition(circ, q_target)
        ref = brute_min_cut(circ, q_target)
        if n_cut != ref:
            return f"circuit sc{i}: n_cut {n_cut} != oracle {ref}"
    return None


def _random_job_set(rng: random.Random, tag: str) -> list[Job]:
    jobs = []
    for i in range(rng.randint(1, 12)):
        width = rng.randint(1, 30)
        circ = gen_random_circuit(rng, f"{tag}j{i}", width, rng.randint(2, 30))
        role = rng.random()
        if role < 0.2:
            stage, parent = Stage.UPSTREAM, f"{tag}p{i % 3}"
        elif role < 0.4:
            stage, parent = Stage.DOWNSTREAM, f"{tag}p{i % 3}"
        else:
            stage, parent = Stage.FLAT, None
        jobs.append(Job(id=f"{tag}j{i}", circuit=circ,
                        shots=rng.randint(1, 4000),
                        arrival_time=rng.random(),
                        parent_id=parent, stage=stage,
                        cut_index=0 if parent else None,
                        n_cut=1 if parent else 0))
    return jobs


def _check_grouping() -> str | None:
    rng = random.Random(77)
    params = GroupingParams(q_dev=32, c_max=4, lam=1.0)
    for trial in range(100):
        jobs = _random_job_set(rng, f"g{trial}")
        runtimes = {j.id: rng.uniform(0.1, 5.0) for j in jobs}
        groups = pack_groups(jobs, lambda j: runtimes[j.id], params)
        seen = [m.id for g in groups for m in g.members]
        if sorted(seen) != sorted(j.id for j in jobs):
            return f"trial {trial}: output not a partition"
        for g in groups:
            if group_cost(g.members, lambda j: runtimes[j.id],
                          params) == float("inf"):
                return f"trial {trial}: infeasible group emitted"
    return None


def _check_group_cost() -> str | None:
    import math
    rng = random.Random(5)
    circ = gen_random_circuit(rng, "gc", 4, 10)
    params = GroupingParams(q_dev=64, c_max=8, lam=1.0)
    flat_a = Job(id="a", circuit=circ, shots=10)
    flat_b = Job(id="b", circuit=circ, shots=10)
    up_a = Job(id="ua", circuit=circ, shots=10, parent_id="pa",
               stage=Stage.UPSTREAM, cut_index=0, n_cut=1)
    down_a = Job(id="da", circuit=circ, shots=10, parent_id="pa",
                 stage=Stage.DOWNSTREAM, cut_index=0, n_cut=1)
    down_b = Job(id="db", circuit=circ, shots=10, parent_id="pb",
                 stage=Stage.DOWNSTREAM, cut_index=0, n_cut=1)
    two = {"a": 2.0, "b": 4.0}
    checks = [
        (group_cost([flat_a], lambda j: 3.0, params), 0.0),
        (group_cost([flat_a, flat_b], lambda j: two[j.id], params), 1.0),
        (group_cost([up_a, down_b], lambda j: 3.0, params), 1.0),
    ]
    for got, want in checks:
        if abs(got - want) > 1e-12:
            return f"group_cost {got} != {want}"
    if not math.isinf(group_cost([up_a, down_a], lambda j: 3.0, params)):
        return "same-parent up/down not infinite"
    return None


def _check_assignment() -> str | None:
    from .oracles import brute_assign
    rng = random.Random(99)
    fleet = default_fleet()
    small = Fleet(devices=fleet.devices[:3])
    for trial in range(20):
        jobs = []
        for i in range(rng.randint(1, 4)):
            width = rng.randint(20, 60)
            circ = gen_random_circuit(rng, f"a{trial}j{i}", width,
                                      rng.randint(5, 40))
            jobs.append(Job(id=f"a{trial}j{i}", circuit=circ,
                            shots=rng.randint(100, 2000)))
        config = SchedulerConfig(
            mode=CutMode.LO, budget=CutBudget(),
            grouping=GroupingParams(q_dev=small.max_qubits, c_max=1),
            lambda_fidelity=0.0)
        schedule = generate_initial_schedule(jobs, small, config)
        if len(schedule.placements) * len(small.devices) > 12:
            continue
        opt = brute_assign([p.group for p in schedule.placements], small)
        if schedule.makespan > 1.5 * opt + 1e-9:
            return (f"trial {trial}: makespan {schedule.makespan} vs "
                    f"optimum {opt}")
    return None


def _check_delay() -> str | None:
    got = classical_delay(1, 4096, 2.0, 1e-6, 1e-2, 8)
    want = 4096 * 2e-6 + 8e-2
    if abs(got - want) > 1e-12:
        return f"classical_delay {got} != {want}"
    return None


def run_self_check() -> int:
    checks = [
        ("overhead-arithmetic", _check_overheads),
        ("min-cut-vs-oracle", _check_min_cut),
        ("grouping-feasibility", _check_grouping),
        ("group-cost-examples", _check_group_cost),
        ("assignment-vs-oracle", _check_assignment),
        ("classical-delay", _check_delay),
    ]
    failed = 0
    for name, fn in checks:
        try:
            problem = fn()
        except CutschedError as exc:
            problem = str(exc)
        status = "PASS" if problem is None else f"FAIL ({problem})"
        print(f"self-check: {name}: {status}")
        if problem is not None:
            failed += 1
    return _EXIT_OK if failed == 0 else _EXIT_VALIDATION


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.self_check:
        return run_self_check()
    if not args.command:
        parser.print_help()
        return _EXIT_VALIDATION
    handlers = {
        "gen-workload": _cmd_gen_workload,
        "schedule": _cmd_schedule,
        "simulate": _cmd_simulate,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except UnschedulableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_UNSCHEDULABLE
    except (ParseError, ValidationError, OracleLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
