"""Shared builders and independent safety checkers for the test suite.

The checkers re-derive every constraint from first principles (formulas are
restated here, not imported), so a scheduler bug cannot hide behind its own
bookkeeping.
"""

from __future__ import annotations

import random
from collections import defaultdict

import pytest

from cutsched import Circuit, Device, Fleet, Job

EPS = 1e-9


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def line_circuit(circuit_id: str, n: int, weight: int = 1, depth: int = 10,
                 one_q: int = 0) -> Circuit:
    """n qubits coupled in a chain: min cut is `weight` at any interior split."""
    coupling = tuple((i, i + 1, weight) for i in range(n - 1))
    return Circuit(id=circuit_id, num_qubits=n, depth=depth,
                   coupling=coupling, one_q_gates=one_q)


def ring_circuit(circuit_id: str, n: int, weight: int = 1,
                 depth: int = 10) -> Circuit:
    """Cycle graph: every bipartition cuts an even number >= 2 of edges."""
    coupling = tuple((i, i + 1, weight) for i in range(n - 1)) + ((0, n - 1, weight),)
    return Circuit(id=circuit_id, num_qubits=n, depth=depth, coupling=coupling)


def complete_circuit(circuit_id: str, n: int, weight: int = 1,
                     depth: int = 10) -> Circuit:
    coupling = tuple((a, b, weight) for a in range(n) for b in range(a + 1, n))
    return Circuit(id=circuit_id, num_qubits=n, depth=depth, coupling=coupling)


def random_circuit(rng: random.Random, circuit_id: str, n: int,
                   max_weight: int = 6, edge_prob: float = 0.45,
                   depth: int = 20) -> Circuit:
    edges = []
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < edge_prob:
                edges.append((a, b, rng.randint(1, max_weight)))
    return Circuit(id=circuit_id, num_qubits=n, depth=depth,
                   coupling=tuple(edges))


def make_device(name: str, qubits: int, *, err_1q: float = 1e-4,
                err_2q: float = 5e-3, err_readout: float = 1e-2,
                t_2q: float = 5e-7, t_readout: float = 4e-6,
                t_load: float = 0.3, tau_link: float = 1e-6,
                gamma_proc: float = 1e-2) -> Device:
    return Device(name=name, num_qubits=qubits, err_1q=err_1q, err_2q=err_2q,
                  err_readout=err_readout, t_1q=3e-8, t_2q=t_2q,
                  t_readout=t_readout, t_load=t_load, tau_link=tau_link,
                  gamma_proc=gamma_proc)


def small_fleet() -> Fleet:
    """Three devices with distinct capacities; largest holds 12 qubits."""
    return Fleet(devices=(
        make_device("dev12", 12),
        make_device("dev08", 8, err_2q=7e-3, t_load=0.2),
        make_device("dev06", 6, err_2q=9e-3, t_load=0.15),
    ))


def make_job(circuit: Circuit, *, job_id: str | None = None,
             shots: int = 1000, arrival: float = 0.0, **kw) -> Job:
    return Job(id=job_id or circuit.id, circuit=circuit, shots=shots,
               arrival_time=arrival, **kw)


@pytest.fixture
def fleet3() -> Fleet:
    return small_fleet()


# ---------------------------------------------------------------------------
# Independent re-derivations (mirrors of the published formulas)
# ---------------------------------------------------------------------------

def expected_runtime(job: Job, device: Device) -> float:
    return job.shots * (job.circuit.depth * device.t_2q + device.t_readout) \
        + device.t_load


def expected_release_delay(n_cut: int, shots: int, device: Device) -> float:
    """Feed-forward delay: 2 classical bits per cut per shot over the link,
    plus post-processing for all 2 * 4^n_cut sub-jobs."""
    return n_cut * 2.0 * device.tau_link * shots \
        + device.gamma_proc * (2 * 4 ** n_cut)


def crossing_weight(circuit: Circuit, part_a) -> int:
    in_a = set(part_a)
    return sum(w for a, b, w in circuit.coupling
               if (a in in_a) != (b in in_a))


# ---------------------------------------------------------------------------
# Safety checkers
# ---------------------------------------------------------------------------

def assert_schedule_safe(schedule, fleet: Fleet, jobs=None) -> None:
    """Capacity, per-device exclusivity, arrival and precedence constraints,
    all re-derived; optionally that exactly the given jobs were placed."""
    caps = {d.name: d.num_qubits for d in fleet.devices}
    devs = {d.name: d for d in fleet.devices}

    by_device = defaultdict(list)
    placed_ids = []
    for p in schedule.placements:
        assert p.device in caps, f"unknown device {p.device}"
        demand = sum(m.num_qubits for m in p.group.members)
        assert demand == p.group.qubit_demand
        assert demand <= caps[p.device], \
            f"group of {demand}q on {p.device} ({caps[p.device]}q)"
        assert p.finish > p.start
        for m in p.group.members:
            assert m.arrival_time <= p.start + EPS, \
                f"{m.id} started before arrival"
            placed_ids.append(m.id)
        by_device[p.device].append(p)

    assert len(placed_ids) == len(set(placed_ids)), "member placed twice"
    if jobs is not None:
        assert sorted(placed_ids) == sorted(j.id for j in jobs)

    for device, ps in by_device.items():
        ps = sorted(ps, key=lambda p: p.start)
        for prev, nxt in zip(ps, ps[1:]):
            assert nxt.start >= prev.finish - EPS, \
                f"overlap on {device}: {prev.finish} > {nxt.start}"

    # Physical precedence: every downstream placement starts no earlier than
    # each of its parents' upstream placements' finish plus the re-derived
    # classical delay.
    up_release = defaultdict(list)
    for p in schedule.placements:
        for m in p.group.members:
            if m.stage.value == "upstream":
                delay = expected_release_delay(m.n_cut, m.shots,
                                               devs[p.device])
                up_release[m.parent_id].append(p.finish + delay)
    for p in schedule.placements:
        for m in p.group.members:
            if m.stage.value == "downstream":
                assert up_release[m.parent_id], \
                    f"{m.id} has no upstream placement"
                bound = max(up_release[m.parent_id])
                assert p.start >= bound - EPS, \
                    f"{m.id} starts {p.start} before release {bound}"

    # Declared precedence edges must match placements.
    for u, d, delay in schedule.precedence:
        up, down = schedule.placements[u], schedule.placements[d]
        assert down.start >= up.finish + delay - EPS

    computed = max((p.finish for p in schedule.placements), default=0.0)
    assert abs(schedule.makespan - computed) <= EPS


def assert_trace_safe(trace, fleet: Fleet) -> None:
    """Same physical constraints, checked on the simulator's event trace."""
    caps = {d.name: d.num_qubits for d in fleet.devices}
    devs = {d.name: d for d in fleet.devices}

    arrival: dict[str, float] = {}
    starts = []
    last_t = 0.0
    for rec in trace:
        assert rec["time"] >= last_t - EPS, "trace out of time order"
        last_t = rec["time"]
        if rec["event"] == "arrival":
            root = rec["root"]
            arrival[root] = min(arrival.get(root, rec["time"]), rec["time"])
        elif rec["event"] == "group_start":
            starts.append(rec)

    by_device = defaultdict(list)
    up_release = defaultdict(list)
    for rec in starts:
        demand = sum(m["qubits"] for m in rec["members"])
        assert demand <= caps[rec["device"]], \
            f"group of {demand}q on {rec['device']}"
        assert rec["finish"] > rec["start"]
        by_device[rec["device"]].append(rec)
        for m in rec["members"]:
            if m["root"] in arrival:
                assert rec["start"] >= arrival[m["root"]] - EPS, \
                    f"{m['id']} started before arrival"
            if m["stage"] == "upstream":
                delay = expected_release_delay(m["n_cut"], m["shots"],
                                               devs[rec["device"]])
                up_release[m["parent_id"]].append(rec["finish"] + delay)

    for device, recs in by_device.items():
        recs = sorted(recs, key=lambda r: r["start"])
        for prev, nxt in zip(recs, recs[1:]):
            assert nxt["start"] >= prev["finish"] - EPS, \
                f"overlap on {device}"

    for rec in starts:
        for m in rec["members"]:
            if m["stage"] == "downstream":
                assert up_release[m["parent_id"]], \
                    f"{m['id']} ran with no upstream start in trace"
                bound = max(up_release[m["parent_id"]])
                assert rec["start"] >= bound - EPS, \
                    f"{m['id']} starts before classical release"
