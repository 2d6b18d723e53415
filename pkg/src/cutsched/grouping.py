"""Packing jobs into co-executable groups under capacity and causal rules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .errors import ValidationError
from .workload import Job, Stage


@dataclass(frozen=True)
class GroupingParams:
    """Capacity and cost knobs for group packing.

    q_dev is the qubit capacity groups are packed against; c_max bounds the
    member count; lam weights the causal-span term of the group cost.
    """

    q_dev: int
    c_max: int = 8
    lam: float = 1.0

    def __post_init__(self):
        if self.q_dev < 1:
            raise ValidationError("q_dev must be >= 1")
        if self.c_max < 1:
            raise ValidationError("c_max must be >= 1")
        if self.lam < 0:
            raise ValidationError("lam must be >= 0")


@dataclass
class Group:
    """Jobs co-executed on one device at the same time.

    runtime_bound is the max member runtime on the assigned device; it stays
    None until a scheduler assigns the group.
    """

    members: tuple[Job, ...]
    qubit_demand: int
    runtime_bound: float | None = None

    def __post_init__(self):
        if not self.members:
            raise ValidationError("group must have at least one member")
        if self.qubit_demand != sum(j.num_qubits for j in self.members):
            raise ValidationError("qubit_demand must equal summed member widths")

    @property
    def member_ids(self) -> tuple[str, ...]:
        return tuple(j.id for j in self.members)

    @property
    def stage_signature(self) -> dict[str, set[Stage]]:
        sig: dict[str, set[Stage]] = {}
        for j in self.members:
            if j.parent_id is not None:
                sig.setdefault(j.parent_id, set()).add(j.stage)
        return sig


def causal_index(job: Job) -> int:
    """Causal span contribution: downstream work sits one step later than
    everything else."""
    return 1 if job.stage is Stage.DOWNSTREAM else 0


def _stage_conflict(members) -> bool:
    # A group may never hold both sides of one parent's cut.
    by_parent: dict[str, Stage] = {}
    for j in members:
        if j.parent_id is None or j.stage is Stage.FLAT:
            continue
        prev = by_parent.get(j.parent_id)
        if prev is not None and prev is not j.stage:
            return True
        by_parent[j.parent_id] = j.stage
    return False


def group_cost(members, runtimes: Callable[[Job], float],
               params: GroupingParams) -> float:
    """Cost of co-executing `members`: runtime imbalance plus weighted causal
    span; +inf when the group is infeasible outright."""
    members = list(members)
    if not members:
        raise ValidationError("group_cost needs a non-empty group")
    if (len(members) > params.c_max
            or sum(j.num_qubits for j in members) > params.q_dev
            or _stage_conflict(members)):
        return math.inf
    times = [runtimes(j) for j in members]
    if min(times) <= 0:
        raise ValidationError("runtimes must be strictly positive")
    spans = [causal_index(j) for j in members]
    a = max(times) / min(times) - 1.0
    b = params.lam * (max(spans) - min(spans))
    return a + b


def pack_groups(jobs, runtimes: Callable[[Job], float],
                params: GroupingParams) -> list[Group]:
    """Greedy packing: open a group on the longest-running unassigned job,
    then admit jobs in descending runtime order unless capacity, cardinality,
    or the per-parent stage rule says no.

    Canonical ordering (runtime desc, id asc) makes the result independent of
    the input permutation.
    """
    jobs = list(jobs)
    if len({j.id for j in jobs}) != len(jobs):
        raise ValidationError("job ids must be unique within one packing call")
    for j in jobs:
        if j.num_qubits > params.q_dev:
            raise ValidationError(
                f"job {j.id} needs {j.num_qubits} qubits, exceeds "
                f"q_dev={params.q_dev}")
    rt = {}
    for j in jobs:
        t = runtimes(j)
        if t <= 0:
            raise ValidationError(f"job {j.id}: runtime must be > 0")
        rt[j.id] = t
    remaining = sorted(jobs, key=lambda j: (-rt[j.id], j.id))
    groups: list[Group] = []
    while remaining:
        picked = [remaining[0]]
        q_used = remaining[0].num_qubits
        stages: dict[str, Stage] = {}
        if remaining[0].parent_id is not None and remaining[0].stage is not Stage.FLAT:
            stages[remaining[0].parent_id] = remaining[0].stage
        picked_ids = {remaining[0].id}
        for j in remaining[1:]:
            if len(picked) >= params.c_max:
                break
            if q_used + j.num_qubits > params.q_dev:
                continue
            if (j.parent_id is not None and j.stage is not Stage.FLAT
                    and stages.get(j.parent_id, j.stage) is not j.stage):
                continue
            picked.append(j)
            picked_ids.add(j.id)
            q_used += j.num_qubits
            if j.parent_id is not None and j.stage is not Stage.FLAT:
                stages[j.parent_id] = j.stage
        groups.append(Group(members=tuple(picked), qubit_demand=q_used))
        remaining = [j for j in remaining if j.id not in picked_ids]
    return groups
