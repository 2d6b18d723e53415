"""Discrete-event simulation of the queued fleet with windowed replanning."""

from __future__ import annotations

import heapq
import json
import os
from dataclasses import dataclass
from enum import IntEnum

from .errors import UnschedulableError, ValidationError
from .fleet import Fleet
from .scheduler import (PlannerCache, SchedulerConfig, release_after,
                        schedule_with_cuts)
from .workload import Job, Stage


class EventKind(IntEnum):
    """Tie-break order at equal times: finishes free devices first, arrivals
    join the queue, then the dispatcher replans, then starts commit."""

    GROUP_FINISH = 0
    ARRIVAL = 1
    WINDOW_DISPATCH = 2
    GROUP_START = 3


@dataclass(frozen=True)
class Metrics:
    """Aggregates over one simulation run; times are means over jobs, with
    cut parents aggregated across all their sub-jobs."""

    avg_queue_length: float
    t_wait: float
    t_run: float
    t_total: float
    mean_lpst: float
    workload_changes: int
    makespan: float


def simulate(workload, fleet: Fleet, config: SchedulerConfig):
    """Run the event loop over a workload; returns (Metrics, trace).

    The trace is a list of dict records (arrival, window_dispatch,
    group_start, group_finish, dropped) in processing order; it is
    self-contained, and the returned Metrics are computed from it via
    replay_metrics, so replaying always agrees.
    """
    jobs = sorted(workload, key=lambda j: (j.arrival_time, j.id))
    if len({j.id for j in jobs}) != len(jobs):
        raise ValidationError("workload job ids must be unique")

    heap: list[tuple[float, int, int, object]] = []
    seq = 0

    def push(time: float, kind: EventKind, payload) -> None:
        nonlocal seq
        heapq.heappush(heap, (time, int(kind), seq, payload))
        seq += 1

    for j in jobs:
        push(j.arrival_time, EventKind.ARRIVAL, j)

    trace: list[dict] = []
    queue: list[Job] = []              # arrived, not yet handed to the planner
    planned_jobs: list[Job] = []       # units in the current plan, unstarted
    plan_placements: list = []
    plan_version = 0
    started_indices: set[int] = set()
    device_free = {d.name: 0.0 for d in fleet.devices}
    devices_by_name = {d.name: d for d in fleet.devices}
    upstream_release: dict[str, float] = {}
    dispatch_pending: set[float] = set()
    cache = PlannerCache()

    def request_dispatch(time: float) -> None:
        if time not in dispatch_pending:
            dispatch_pending.add(time)
            push(time, EventKind.WINDOW_DISPATCH, None)

    def unstarted_placements() -> list[int]:
        return [i for i in range(len(plan_placements))
                if i not in started_indices]

    def replan(now: float) -> None:
        nonlocal planned_jobs, plan_placements, plan_version, started_indices
        take = queue[:config.window]
        del queue[:len(take)]
        planning = planned_jobs + take
        trace.append({
            "event": "window_dispatch", "time": now, "taken": len(take),
            "queued_remaining": len(queue), "planned_units": len(planning),
        })
        ready = {name: max(now, t) for name, t in device_free.items()}
        while True:
            if not planning:
                if queue:
                    # everything taken so far was dropped; refill the window
                    planning = queue[:config.window]
                    del queue[:len(planning)]
                    continue
                schedule = None
                break
            try:
                schedule = schedule_with_cuts(
                    planning, fleet, config, device_ready=ready,
                    upstream_release=upstream_release, cache=cache)
                break
            except UnschedulableError as exc:
                if exc.job_id is None:
                    raise
                trace.append({"event": "dropped", "time": now,
                              "job": exc.job_id, "reason": str(exc)})
                planning = [x for x in planning
                            if x.id != exc.job_id and x.parent_id != exc.job_id]
        plan_version += 1
        started_indices = set()
        if schedule is None:
            plan_placements = []
            planned_jobs = []
            return
        plan_placements = schedule.placements
        planned_jobs = [j for p in plan_placements for j in p.group.members]
        for i, p in enumerate(plan_placements):
            push(p.start, EventKind.GROUP_START, (plan_version, i))

    def commit_start(index: int) -> None:
        nonlocal planned_jobs
        p = plan_placements[index]
        started_indices.add(index)
        planned_jobs = [j for i in unstarted_placements()
                        for j in plan_placements[i].group.members]
        dev = devices_by_name[p.device]
        device_free[p.device] = p.finish
        members = []
        seen_up: set[str] = set()
        for m in p.group.members:
            members.append({
                "id": m.id, "root": m.root_id,
                "parent_id": m.parent_id, "stage": m.stage.value,
                "n_cut": m.n_cut, "qubits": m.num_qubits, "shots": m.shots,
                "lpst": cache.lpst_of(m, dev),
            })
            if m.stage is Stage.UPSTREAM and m.parent_id not in seen_up:
                seen_up.add(m.parent_id)
                rel = p.finish + release_after(m, dev)
                upstream_release[m.parent_id] = max(
                    upstream_release.get(m.parent_id, 0.0), rel)
        trace.append({
            "event": "group_start", "time": p.start, "device": p.device,
            "start": p.start, "finish": p.finish,
            "mode_tag": p.mode_tag.value, "members": members,
        })
        push(p.finish, EventKind.GROUP_FINISH, p)

    while heap:
        time, kind, _seq, payload = heapq.heappop(heap)
        kind = EventKind(kind)
        if kind is EventKind.ARRIVAL:
            queue.append(payload)
            trace.append({"event": "arrival", "time": time, "job": payload.id,
                          "root": payload.root_id,
                          "qubits": payload.num_qubits,
                          "shots": payload.shots})
            request_dispatch(time)
        elif kind is EventKind.WINDOW_DISPATCH:
            dispatch_pending.discard(time)
            replan(time)
        elif kind is EventKind.GROUP_START:
            version, index = payload
            if version == plan_version:
                commit_start(index)
        else:  # GROUP_FINISH
            p = payload
            trace.append({"event": "group_finish", "time": p.finish,
                          "device": p.device,
                          "members": [{"id": m.id, "root": m.root_id}
                                      for m in p.group.members]})
            if queue or unstarted_placements():
                request_dispatch(time)

    return replay_metrics(trace), trace


# ---------------------------------------------------------------------------
# Trace replay and persistence
# ---------------------------------------------------------------------------

def replay_metrics(trace) -> Metrics:
    """Recompute Metrics from a trace alone (no fleet or workload needed)."""
    integral = 0.0
    last_t = 0.0
    waiting = 0
    arrival: dict[str, float] = {}
    first_start: dict[str, float] = {}
    last_finish: dict[str, float] = {}
    dropped: set[str] = set()
    sum_lpst = 0.0
    n_lpst = 0
    changes = 0
    last_members: frozenset[str] | None = None
    makespan = 0.0
    horizon = 0.0
    for rec in trace:
        t = rec["time"]
        if t < last_t:
            raise ValidationError("trace records out of time order")
        integral += waiting * (t - last_t)
        last_t = t
        horizon = t
        kind = rec["event"]
        if kind == "arrival":
            root = rec["root"]
            if root not in arrival:
                arrival[root] = t
                waiting += 1
            else:
                arrival[root] = min(arrival[root], t)
        elif kind == "group_start":
            makespan = max(makespan, rec["finish"])
            for m in rec["members"]:
                root = m["root"]
                if root not in first_start:
                    first_start[root] = t
                    if root in arrival and root not in dropped:
                        waiting -= 1
                sum_lpst += m["lpst"]
                n_lpst += 1
            members = frozenset(m["id"] for m in rec["members"])
            if members != last_members:
                changes += 1
                last_members = members
        elif kind == "group_finish":
            for m in rec["members"]:
                root = m["root"]
                last_finish[root] = max(last_finish.get(root, 0.0), t)
        elif kind == "dropped":
            root = rec["job"]
            if root not in dropped:
                dropped.add(root)
                if root in arrival and root not in first_start:
                    waiting -= 1
        elif kind != "window_dispatch":
            raise ValidationError(f"unknown trace event {kind!r}")
    roots = [r for r in arrival if r not in dropped]
    for r in roots:
        if r not in first_start or r not in last_finish:
            raise ValidationError(f"trace incomplete: job {r} never ran")
    n = len(roots)
    t_wait = sum(first_start[r] - arrival[r] for r in roots) / n if n else 0.0
    t_run = sum(last_finish[r] - first_start[r] for r in roots) / n if n else 0.0
    return Metrics(
        avg_queue_length=integral / horizon if horizon > 0 else 0.0,
        t_wait=t_wait,
        t_run=t_run,
        t_total=t_wait + t_run,
        mean_lpst=sum_lpst / n_lpst if n_lpst else 0.0,
        workload_changes=changes,
        makespan=makespan,
    )


def time_weighted_queue_length(trace) -> float:
    """Average number of jobs waiting (arrived, not yet started) over the
    trace horizon; 0 on an empty horizon."""
    return replay_metrics(trace).avg_queue_length


def save_trace(trace, path: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        for rec in trace:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    os.replace(tmp, path)


def load_trace(path: str) -> list[dict]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(json.loads(line))
    return out
