"""Cut-aware schedule construction: grouping, device assignment with
precedence delays, slot accounting, and the iterative cut-improvement loop."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

from .cutplan import CutBudget, CutMode, classical_delay, overhead, try_cut
from .errors import InfeasibleCutError, UnschedulableError, ValidationError
from .fleet import Device, Fleet, lpst, runtime_estimate
from .grouping import Group, GroupingParams, pack_groups
from .workload import Job, Stage

# Classical bits exchanged per cut per shot (measurement outcome pair).
BETA_COMM = 2.0


class ModeTag(str, Enum):
    PLAIN = "plain"
    UPSTREAM_GROUP = "upstream_group"
    DOWNSTREAM_GROUP = "downstream_group"


@dataclass
class Placement:
    """One group assigned to one device for a time interval."""

    group: Group
    device: str
    start: float
    finish: float
    mode_tag: ModeTag

    def __post_init__(self):
        if not self.finish > self.start:
            raise ValidationError("placement must have finish > start")


@dataclass
class Schedule:
    """Placements plus the precedence edges that constrain them.

    precedence entries are (upstream placement index, downstream placement
    index, delay); iteration_makespans records the initial makespan of each
    outer improvement iteration, in order.
    """

    placements: list[Placement] = field(default_factory=list)
    precedence: list[tuple[int, int, float]] = field(default_factory=list)
    makespan: float = 0.0
    iteration_makespans: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class SchedulerConfig:
    mode: CutMode
    budget: CutBudget = field(default_factory=CutBudget)
    grouping: GroupingParams = field(default_factory=lambda: GroupingParams(q_dev=127))
    window: int = 50
    lambda_fidelity: float = 0.1

    def __post_init__(self):
        if self.mode not in (CutMode.LO, CutMode.LOCC):
            raise ValidationError("scheduler mode must be LO or LOCC")
        if self.window < 1:
            raise ValidationError("window must be >= 1")
        if self.lambda_fidelity < 0:
            raise ValidationError("lambda_fidelity must be >= 0")


class PlannerCache:
    """Memo for runtime/lpst estimates and cut expansions.

    Variants of one fragment share a circuit object, so keying on the circuit
    id collapses the 9^n/4^n duplicates to one entry.
    """

    def __init__(self):
        self.runtime: dict[tuple[str, int, str], float] = {}
        self.lpst: dict[tuple[str, str], float] = {}
        self.cut: dict[tuple[str, str, int, bool], list[Job]] = {}

    def runtime_of(self, job: Job, device: Device) -> float:
        key = (job.circuit.id, job.shots, device.name)
        v = self.runtime.get(key)
        if v is None:
            v = runtime_estimate(job, device)
            self.runtime[key] = v
        return v

    def lpst_of(self, job: Job, device: Device) -> float:
        key = (job.circuit.id, device.name)
        v = self.lpst.get(key)
        if v is None:
            v = lpst(job, device)
            self.lpst[key] = v
        return v

    def cut_of(self, job: Job, mode: CutMode, fleet_max_q: int,
               budget: CutBudget, mandatory: bool) -> list[Job]:
        key = (job.id, mode.value, fleet_max_q, mandatory)
        v = self.cut.get(key)
        if v is None:
            v = try_cut(job, mode, fleet_max_q, budget, mandatory=mandatory)
            self.cut[key] = v
        return v


def _sub_count(mode: CutMode, n_cut: int) -> int:
    return 2 * overhead(mode, n_cut)


def release_after(member: Job, device: Device) -> float:
    """Extra time after an upstream placement's finish before its parent's
    downstream work may start."""
    return classical_delay(member.n_cut, member.shots, BETA_COMM,
                           device.tau_link, device.gamma_proc,
                           _sub_count(CutMode.LOCC, member.n_cut))


def generate_initial_schedule(jobs, fleet: Fleet, config: SchedulerConfig,
                              device_ready: dict[str, float] | None = None,
                              upstream_release: dict[str, float] | None = None,
                              cache: PlannerCache | None = None) -> Schedule:
    """Group jobs and list-schedule the groups onto devices.

    Flat and upstream work is packed and placed first, downstream work after,
    so every downstream group sees its upstream placements. Device choice
    minimizes earliest-finish minus lambda_fidelity times mean member LPST;
    ties fall to device name, then group creation order (fixed by the loop).

    `device_ready` gives per-device earliest start times, `upstream_release`
    gives per-parent earliest downstream starts from already-committed work;
    both default to empty (time zero).
    """
    jobs = list(jobs)
    cache = cache if cache is not None else PlannerCache()
    ready = {d.name: 0.0 for d in fleet.devices}
    if device_ready:
        ready.update(device_ready)
    committed_release = dict(upstream_release) if upstream_release else {}

    max_cap = fleet.max_qubits
    for j in jobs:
        if j.num_qubits > max_cap:
            raise UnschedulableError(
                f"job {j.id} needs {j.num_qubits} qubits, largest device "
                f"has {max_cap}", job_id=j.id)

    ref_dev = min((d for d in fleet.devices if d.num_qubits == max_cap),
                  key=lambda d: d.name)
    params = replace(config.grouping, q_dev=max_cap)

    def ref_runtime(j: Job) -> float:
        return cache.runtime_of(j, ref_dev)

    pool_main = [j for j in jobs if j.stage is not Stage.DOWNSTREAM]
    pool_down = [j for j in jobs if j.stage is Stage.DOWNSTREAM]
    ordered: list[tuple[int, Group]] = []
    for pool_rank, pool in ((0, pool_main), (1, pool_down)):
        groups = pack_groups(pool, ref_runtime, params)
        bounds = [max(ref_runtime(j) for j in g.members) for g in groups]
        order = sorted(range(len(groups)), key=lambda i: (-bounds[i], i))
        ordered.extend((pool_rank, groups[i]) for i in order)

    schedule = Schedule()
    release_index: dict[str, list[tuple[int, float]]] = {}
    for _rank, group in ordered:
        arrivals = max(j.arrival_time for j in group.members)
        down_parents: list[Job] = []
        seen_parents: set[str] = set()
        has_up = False
        has_down = False
        for j in group.members:
            if j.stage is Stage.UPSTREAM:
                has_up = True
            elif j.stage is Stage.DOWNSTREAM:
                has_down = True
                if j.parent_id not in seen_parents:
                    seen_parents.add(j.parent_id)
                    down_parents.append(j)
        prec_bound = 0.0
        for member in down_parents:
            bound = committed_release.get(member.parent_id, 0.0)
            for _idx, rel in release_index.get(member.parent_id, ()):
                bound = max(bound, rel)
            prec_bound = max(prec_bound, bound)

        best = None
        fallback = None
        for dev in fleet.devices:
            if dev.num_qubits < group.qubit_demand:
                continue
            start = max(ready[dev.name], arrivals, prec_bound)
            exec_time = max(cache.runtime_of(j, dev) for j in group.members)
            finish = start + exec_time
            if config.lambda_fidelity > 0:
                mean_lpst = sum(cache.lpst_of(j, dev)
                                for j in group.members) / len(group.members)
                # 0 * -inf would be NaN, hence the guard above
                score = finish - config.lambda_fidelity * mean_lpst
            else:
                score = finish
            if fallback is None or (finish, dev.name) < fallback[:2]:
                fallback = (finish, dev.name, dev, start, exec_time)
            if math.isinf(score):
                continue
            if best is None or (score, dev.name) < best[:2]:
                best = (score, dev.name, dev, start, exec_time)
        chosen = best if best is not None else fallback
        if chosen is None:
            widest = max(group.members, key=lambda j: (j.num_qubits, j.id))
            raise UnschedulableError(
                f"job {widest.id} fits no device", job_id=widest.id)
        _score, _name, dev, start, exec_time = chosen
        group.runtime_bound = exec_time
        finish = start + exec_time
        tag = (ModeTag.UPSTREAM_GROUP if has_up
               else ModeTag.DOWNSTREAM_GROUP if has_down else ModeTag.PLAIN)
        idx = len(schedule.placements)
        schedule.placements.append(Placement(
            group=group, device=dev.name, start=start, finish=finish,
            mode_tag=tag))
        ready[dev.name] = finish
        if has_up:
            seen_up: set[str] = set()
            for j in group.members:
                if j.stage is Stage.UPSTREAM and j.parent_id not in seen_up:
                    seen_up.add(j.parent_id)
                    rel = finish + release_after(j, dev)
                    release_index.setdefault(j.parent_id, []).append((idx, rel))
        if has_down:
            for member in down_parents:
                for up_idx, rel in release_index.get(member.parent_id, ()):
                    delay = rel - schedule.placements[up_idx].finish
                    schedule.precedence.append((up_idx, idx, delay))

    schedule.makespan = makespan(schedule)
    return schedule


def makespan(schedule: Schedule) -> float:
    return max((p.finish for p in schedule.placements), default=0.0)


def count_slots(schedule: Schedule, fleet: Fleet, q_max_sub: int,
                include_idle: bool = False) -> int:
    """Free-slot count: per placement, how many q_max_sub-wide openings its
    device's leftover qubits hold; idle devices count floor(Q_m / q_max_sub)
    openings each when include_idle is set."""
    if q_max_sub < 1:
        raise ValidationError("q_max_sub must be >= 1")
    caps = {d.name: d.num_qubits for d in fleet.devices}
    slots = 0
    used: set[str] = set()
    for p in schedule.placements:
        slots += (caps[p.device] - p.group.qubit_demand) // q_max_sub
        used.add(p.device)
    if include_idle:
        for d in fleet.devices:
            if d.name not in used:
                slots += d.num_qubits // q_max_sub
    return slots


def _jobs_in_schedule_order(schedule: Schedule) -> list[Job]:
    order = sorted(range(len(schedule.placements)),
                   key=lambda i: (schedule.placements[i].start,
                                  schedule.placements[i].device, i))
    out: list[Job] = []
    for i in order:
        out.extend(schedule.placements[i].group.members)
    return out


def schedule_with_cuts(jobs, fleet: Fleet, config: SchedulerConfig,
                       device_ready: dict[str, float] | None = None,
                       upstream_release: dict[str, float] | None = None,
                       cache: PlannerCache | None = None) -> Schedule:
    """Full scheduling pass: mandatory cuts, then iterative improvement.

    Jobs wider than the largest device are cut unconditionally up front.
    Then, repeatedly: build a schedule, walk its jobs in schedule order, and
    for each cut-eligible job whose expansion passes the budget and the
    free-slot test, accept the cut iff the candidate schedule's makespan does
    not regress; restart after each acceptance. A job is cut at most once, so
    the loop runs at most len(jobs) + 1 times.
    """
    cache = cache if cache is not None else PlannerCache()
    max_cap = fleet.max_qubits
    current: list[Job] = []
    for j in jobs:
        if j.num_qubits > max_cap:
            if j.stage is not Stage.FLAT:
                raise UnschedulableError(
                    f"sub-job {j.id} wider than any device", job_id=j.id)
            try:
                subs = cache.cut_of(j, config.mode, max_cap, config.budget,
                                    mandatory=True)
            except InfeasibleCutError as exc:
                raise UnschedulableError(str(exc), job_id=j.id) from exc
            current.extend(subs)
        else:
            current.append(j)

    threshold = config.budget.adaptive_threshold * max_cap
    iteration_makespans: list[float] = []
    guard = len(current) + 2
    schedule = None
    for _ in range(guard):
        schedule = generate_initial_schedule(
            current, fleet, config, device_ready=device_ready,
            upstream_release=upstream_release, cache=cache)
        t_initial = schedule.makespan
        iteration_makespans.append(t_initial)
        accepted = False
        for j in _jobs_in_schedule_order(schedule):
            if (j.stage is not Stage.FLAT or j.parent_id is not None
                    or j.num_qubits < 2 or j.num_qubits < threshold):
                continue
            subs = cache.cut_of(j, config.mode, max_cap, config.budget,
                                mandatory=False)
            if not subs:
                continue
            q_max_sub = max(s.num_qubits for s in subs)
            n_slots = count_slots(schedule, fleet, q_max_sub, include_idle=True)
            if len(subs) > n_slots:
                continue
            candidate = [x for x in current if x.id != j.id] + subs
            cand_schedule = generate_initial_schedule(
                candidate, fleet, config, device_ready=device_ready,
                upstream_release=upstream_release, cache=cache)
            if cand_schedule.makespan <= t_initial:
                current = candidate
                accepted = True
                break
        if not accepted:
            break
    schedule.iteration_makespans = iteration_makespans
    return schedule
