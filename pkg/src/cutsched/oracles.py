"""Brute-force reference implementations for tests and --self-check.

These deliberately re-derive results by exhaustive enumeration and share no
search logic with the modules they check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .cutplan import classical_delay
from .errors import OracleLimitError, ValidationError
from .fleet import Fleet, runtime_estimate
from .grouping import Group
from .scheduler import BETA_COMM
from .workload import Circuit, Job, Stage


@dataclass(frozen=True)
class OracleLimit:
    """Instance-size ceilings that keep each exhaustive search around a
    second or less."""

    max_qubits: int = 12
    max_jobs: int = 8
    max_groups_x_devices: int = 12


def brute_min_cut(circuit: Circuit, q_target: int,
                  limit: OracleLimit = OracleLimit()) -> int:
    """Exact minimum crossing weight over every bipartition whose parts both
    fit q_target; enumerates all 2^n assignments."""
    n = circuit.num_qubits
    if n > limit.max_qubits:
        raise OracleLimitError(f"{n} qubits exceeds oracle limit "
                               f"{limit.max_qubits}")
    if n < 2:
        raise ValidationError("need at least 2 qubits")
    edges = circuit.coupling
    best = None
    for mask in range(1, (1 << n) - 1):
        size_a = bin(mask).count("1")
        if size_a > q_target or n - size_a > q_target:
            continue
        crossing = 0
        for a, b, w in edges:
            if ((mask >> a) & 1) != ((mask >> b) & 1):
                crossing += w
        if best is None or crossing < best:
            best = crossing
    if best is None:
        raise ValidationError(
            f"no bipartition of {n} qubits fits q_target={q_target}")
    return best


def _partitions(items: list):
    """All set partitions, generated by recursive block assignment."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for smaller in _partitions(rest):
        for i in range(len(smaller)):
            yield smaller[:i] + [[first] + smaller[i]] + smaller[i + 1:]
        yield [[first]] + smaller


def _independent_group_cost(members, runtimes, q_dev, c_max, lam):
    # Re-derivation of the grouping cost, kept separate from grouping.py.
    if len(members) > c_max:
        return None
    if sum(j.num_qubits for j in members) > q_dev:
        return None
    per_parent: dict[str, Stage] = {}
    for j in members:
        if j.parent_id is None or j.stage is Stage.FLAT:
            continue
        prev = per_parent.get(j.parent_id)
        if prev is not None and prev is not j.stage:
            return None
        per_parent[j.parent_id] = j.stage
    times = [runtimes(j) for j in members]
    if min(times) <= 0:
        raise ValidationError("runtimes must be strictly positive")
    spans = [1 if j.stage is Stage.DOWNSTREAM else 0 for j in members]
    return max(times) / min(times) - 1.0 + lam * (max(spans) - min(spans))


def brute_partition(jobs, runtimes, params,
                    limit: OracleLimit = OracleLimit()):
    """Enumerate every set partition of the jobs; returns (minimum total
    cost, minimum feasible group count) over feasible partitions."""
    jobs = list(jobs)
    if len(jobs) > limit.max_jobs:
        raise OracleLimitError(f"{len(jobs)} jobs exceeds oracle limit "
                               f"{limit.max_jobs}")
    if not jobs:
        raise ValidationError("need at least one job")
    best_cost = None
    best_count = None
    for partition in _partitions(jobs):
        total = 0.0
        feasible = True
        for block in partition:
            cost = _independent_group_cost(block, runtimes, params.q_dev,
                                           params.c_max, params.lam)
            if cost is None:
                feasible = False
                break
            total += cost
        if not feasible:
            continue
        if best_cost is None or total < best_cost:
            best_cost = total
        if best_count is None or len(partition) < best_count:
            best_count = len(partition)
    if best_cost is None:
        raise ValidationError("no feasible partition exists")
    return best_cost, best_count


def _group_edges(groups: list[Group]):
    """Precedence pairs (i_up, j_down, parents) derived from member stages."""
    ups: dict[str, list[int]] = {}
    downs: dict[str, list[int]] = {}
    for i, g in enumerate(groups):
        for m in g.members:
            if m.stage is Stage.UPSTREAM:
                ups.setdefault(m.parent_id, []).append(i)
            elif m.stage is Stage.DOWNSTREAM:
                downs.setdefault(m.parent_id, []).append(i)
    edges: dict[tuple[int, int], list[str]] = {}
    for parent, up_list in ups.items():
        for i in up_list:
            for jdx in downs.get(parent, ()):
                if i != jdx:
                    edges.setdefault((i, jdx), []).append(parent)
    return edges


def brute_assign(groups: list[Group], fleet: Fleet,
                 limit: OracleLimit = OracleLimit()) -> float:
    """Exact minimum makespan over all group-to-device assignments and all
    per-device orderings, honoring upstream/downstream delays."""
    groups = list(groups)
    n_groups = len(groups)
    devices = list(fleet.devices)
    if n_groups * len(devices) > limit.max_groups_x_devices:
        raise OracleLimitError(
            f"{n_groups} groups x {len(devices)} devices exceeds oracle "
            f"limit {limit.max_groups_x_devices}")
    if not groups:
        return 0.0
    edges = _group_edges(groups)
    edge_members: dict[tuple[int, int], list[Job]] = {}
    for (i, jdx), parents in edges.items():
        reps: dict[str, Job] = {}
        for m in groups[i].members:
            if m.stage is Stage.UPSTREAM and m.parent_id in parents:
                reps.setdefault(m.parent_id, m)
        edge_members[(i, jdx)] = list(reps.values())

    exec_time: dict[tuple[int, int], float] = {}
    for gi, g in enumerate(groups):
        for di, d in enumerate(devices):
            if g.qubit_demand <= d.num_qubits:
                exec_time[(gi, di)] = max(runtime_estimate(m, d)
                                          for m in g.members)

    best = None
    for assignment in itertools.product(range(len(devices)), repeat=n_groups):
        if any((gi, di) not in exec_time
               for gi, di in enumerate(assignment)):
            continue
        per_device: dict[int, list[int]] = {}
        for gi, di in enumerate(assignment):
            per_device.setdefault(di, []).append(gi)
        ordering_sets = [itertools.permutations(gs)
                         for gs in per_device.values()]
        dev_keys = list(per_device.keys())
        for orderings in itertools.product(*ordering_sets):
            seq_of = dict(zip(dev_keys, orderings))
            finish: dict[int, float] = {}
            pos = {di: 0 for di in dev_keys}
            dev_clock = {di: 0.0 for di in dev_keys}
            placed = 0
            # place next-in-order groups whose upstream feeds are resolved
            while placed < n_groups:
                progressed = False
                for di in dev_keys:
                    while pos[di] < len(seq_of[di]):
                        gi = seq_of[di][pos[di]]
                        bound = max((m.arrival_time
                                     for m in groups[gi].members), default=0.0)
                        blocked = False
                        for (ui, vi), _parents in edges.items():
                            if vi != gi:
                                continue
                            if ui not in finish:
                                blocked = True
                                break
                            up_dev = devices[assignment[ui]]
                            for member in edge_members[(ui, vi)]:
                                delay = classical_delay(
                                    member.n_cut, member.shots, BETA_COMM,
                                    up_dev.tau_link, up_dev.gamma_proc,
                                    2 * 4 ** member.n_cut)
                                bound = max(bound, finish[ui] + delay)
                        if blocked:
                            break
                        start = max(dev_clock[di], bound)
                        finish[gi] = start + exec_time[(gi, di)]
                        dev_clock[di] = finish[gi]
                        pos[di] += 1
                        placed += 1
                        progressed = True
                if not progressed:
                    break  # circular wait under this ordering
            if placed < n_groups:
                continue
            makespan = max(finish.values())
            if best is None or makespan < best:
                best = makespan
    if best is None:
        raise ValidationError("no feasible assignment exists")
    return best
