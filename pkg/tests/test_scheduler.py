"""Schedule construction, slot accounting, and the cut-improvement loop."""

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cutsched import (
    Circuit,
    CutBudget,
    CutMode,
    Fleet,
    ModeTag,
    Placement,
    PlannerCache,
    Schedule,
    SchedulerConfig,
    Stage,
    UnschedulableError,
    ValidationError,
    count_slots,
    generate_initial_schedule,
    makespan,
    release_after,
    schedule_with_cuts,
    try_cut,
)
from cutsched.grouping import Group, GroupingParams
from cutsched.workload import gen_bridged_circuit, gen_workload, WorkloadSpec

from conftest import (
    assert_schedule_safe,
    expected_release_delay,
    line_circuit,
    make_device,
    make_job,
    small_fleet,
)


def config(mode=CutMode.LO, **kw):
    kw.setdefault("grouping", GroupingParams(q_dev=127))
    return SchedulerConfig(mode=mode, **kw)


def narrow_jobs(rng, count, max_width=6, arrival_span=0.0):
    jobs = []
    for i in range(count):
        width = rng.randint(1, max_width)
        depth = rng.randint(5, 30)
        arrival = rng.uniform(0.0, arrival_span) if arrival_span else 0.0
        c = line_circuit(f"n{i}", width, depth=depth)
        jobs.append(make_job(c, shots=rng.randint(50, 800), arrival=arrival))
    return jobs


class TestConfigAndPlacement:
    def test_config_validation(self):
        with pytest.raises(ValidationError):
            SchedulerConfig(mode=CutMode.LO_WIRE)
        with pytest.raises(ValidationError):
            SchedulerConfig(mode=CutMode.LO, window=0)
        with pytest.raises(ValidationError):
            SchedulerConfig(mode=CutMode.LO, lambda_fidelity=-0.1)

    def test_config_defaults(self):
        cfg = SchedulerConfig(mode=CutMode.LOCC)
        assert cfg.window == 50
        assert cfg.lambda_fidelity == 0.1
        assert cfg.budget.max_overhead == 729

    def test_placement_validation(self):
        g = Group(members=(make_job(line_circuit("a", 2)),), qubit_demand=2)
        with pytest.raises(ValidationError):
            Placement(group=g, device="d", start=1.0, finish=1.0,
                      mode_tag=ModeTag.PLAIN)


class TestReleaseAfter:
    def test_matches_published_delay_formula(self):
        dev = make_device("d", 8, tau_link=1e-6, gamma_proc=1e-2)
        frag = make_job(line_circuit("p.a", 4), job_id="p.c0a0",
                        shots=4096, parent_id="p", stage=Stage.UPSTREAM,
                        cut_index=0, n_cut=1)
        assert release_after(frag, dev) == pytest.approx(0.088192, abs=1e-12)
        assert release_after(frag, dev) == pytest.approx(
            expected_release_delay(1, 4096, dev))


class TestGenerateInitialSchedule:
    def test_empty(self, fleet3):
        s = generate_initial_schedule([], fleet3, config())
        assert s.placements == []
        assert s.makespan == 0.0

    def test_single_job(self, fleet3):
        job = make_job(line_circuit("a", 4, depth=10), shots=100)
        s = generate_initial_schedule([job], fleet3, config())
        assert len(s.placements) == 1
        assert_schedule_safe(s, fleet3, jobs=[job])

    @given(st.integers(0, 100_000), st.integers(1, 40))
    @settings(max_examples=80, deadline=None)
    def test_safety_on_random_flat_workloads(self, seed, count):
        rng = random.Random(seed)
        fleet = small_fleet()
        jobs = narrow_jobs(rng, count, max_width=12, arrival_span=3.0)
        s = generate_initial_schedule(jobs, fleet, config())
        assert_schedule_safe(s, fleet, jobs=jobs)

    def test_safety_with_locc_fragments(self, fleet3):
        parent = make_job(line_circuit("p", 8, depth=15), shots=700)
        subs = try_cut(parent, CutMode.LOCC, 12, CutBudget())
        assert subs
        others = narrow_jobs(random.Random(1), 6)
        s = generate_initial_schedule(subs + others, fleet3,
                                      config(CutMode.LOCC))
        assert_schedule_safe(s, fleet3, jobs=subs + others)
        assert s.precedence, "expected recorded precedence edges"
        for u, d, delay in s.precedence:
            up = s.placements[u]
            member = next(m for m in up.group.members
                          if m.stage is Stage.UPSTREAM)
            dev = fleet3.by_name(up.device)
            assert delay == pytest.approx(
                expected_release_delay(member.n_cut, member.shots, dev))

    def test_downstream_waits_even_when_devices_idle(self, fleet3):
        parent = make_job(line_circuit("p", 8, depth=15), shots=700)
        subs = try_cut(parent, CutMode.LOCC, 12, CutBudget())
        s = generate_initial_schedule(subs, fleet3, config(CutMode.LOCC))
        ups = [p for p in s.placements if p.mode_tag is ModeTag.UPSTREAM_GROUP]
        downs = [p for p in s.placements
                 if p.mode_tag is ModeTag.DOWNSTREAM_GROUP]
        assert ups and downs
        last_release = max(
            p.finish + expected_release_delay(1, 700, fleet3.by_name(p.device))
            for p in ups)
        assert all(d.start >= last_release - 1e-9 for d in downs)

    def test_arrival_respected(self, fleet3):
        job = make_job(line_circuit("a", 4), arrival=5.0)
        s = generate_initial_schedule([job], fleet3, config())
        assert s.placements[0].start >= 5.0

    def test_device_ready_respected(self, fleet3):
        job = make_job(line_circuit("a", 4))
        busy = {d.name: 9.0 for d in fleet3.devices}
        s = generate_initial_schedule([job], fleet3, config(),
                                      device_ready=busy)
        assert s.placements[0].start >= 9.0

    def test_committed_upstream_release_respected(self, fleet3):
        parent = make_job(line_circuit("p", 8, depth=15), shots=700)
        subs = try_cut(parent, CutMode.LOCC, 12, CutBudget())
        downs = [s for s in subs if s.stage is Stage.DOWNSTREAM]
        s = generate_initial_schedule(
            downs, fleet3, config(CutMode.LOCC),
            upstream_release={"p": 42.0})
        assert all(p.start >= 42.0 - 1e-9 for p in s.placements)

    def test_too_wide_job_rejected(self, fleet3):
        job = make_job(line_circuit("w", 13))
        with pytest.raises(UnschedulableError) as exc:
            generate_initial_schedule([job], fleet3, config())
        assert exc.value.job_id == "w"

    def test_deterministic(self, fleet3):
        jobs = narrow_jobs(random.Random(3), 25, max_width=12,
                           arrival_span=2.0)
        s1 = generate_initial_schedule(jobs, fleet3, config())
        s2 = generate_initial_schedule(jobs, fleet3, config())
        assert [(p.device, p.start, p.finish, p.group.member_ids)
                for p in s1.placements] == \
               [(p.device, p.start, p.finish, p.group.member_ids)
                for p in s2.placements]

    def test_lambda_fidelity_steers_device_choice(self):
        # identical timing, very different two-qubit error: plain
        # earliest-finish ties on name, fidelity weighting flips the pick
        good = make_device("zgood", 8, err_2q=1e-4)
        bad = make_device("abad", 8, err_2q=5e-2)
        fleet = Fleet(devices=(bad, good))
        job = make_job(line_circuit("j", 6, weight=20, depth=10), shots=100)
        pick_zero = generate_initial_schedule(
            [job], fleet, config(lambda_fidelity=0.0)).placements[0].device
        pick_fid = generate_initial_schedule(
            [job], fleet, config(lambda_fidelity=10.0)).placements[0].device
        assert pick_zero == "abad"   # tie on finish, name order wins
        assert pick_fid == "zgood"   # fidelity term dominates

    def test_dead_fleet_falls_back_to_earliest_finish(self):
        dead_a = make_device("a", 8, err_readout=1.0, t_load=0.5)
        dead_b = make_device("b", 8, err_readout=1.0, t_load=0.1)
        fleet = Fleet(devices=(dead_a, dead_b))
        job = make_job(line_circuit("j", 4, depth=10), shots=10)
        s = generate_initial_schedule([job], fleet,
                                      config(lambda_fidelity=0.1))
        assert s.placements[0].device == "b"

    def test_zero_lambda_with_dead_device_is_not_nan(self):
        dead = make_device("a", 8, err_readout=1.0, t_load=0.1)
        live = make_device("b", 8, t_load=0.5)
        fleet = Fleet(devices=(dead, live))
        job = make_job(line_circuit("j", 4, depth=10), shots=10)
        s = generate_initial_schedule([job], fleet,
                                      config(lambda_fidelity=0.0))
        assert s.placements[0].device == "a"  # earliest finish, no NaN trap


class TestCountSlots:
    def test_counts_leftover_openings(self, fleet3):
        g = Group(members=(make_job(line_circuit("a", 7)),), qubit_demand=7)
        s = Schedule(placements=[Placement(
            group=g, device="dev12", start=0.0, finish=1.0,
            mode_tag=ModeTag.PLAIN)])
        # (12 - 7) // 2 = 2 openings on the busy device
        assert count_slots(s, fleet3, 2) == 2
        # idle dev08 and dev06 add 4 + 3
        assert count_slots(s, fleet3, 2, include_idle=True) == 9

    def test_empty_schedule(self, fleet3):
        assert count_slots(Schedule(), fleet3, 3) == 0
        assert count_slots(Schedule(), fleet3, 3, include_idle=True) == \
            12 // 3 + 8 // 3 + 6 // 3

    def test_validation(self, fleet3):
        with pytest.raises(ValidationError):
            count_slots(Schedule(), fleet3, 0)


class TestScheduleWithCuts:
    def test_mandatory_cut_of_oversized_job(self, fleet3):
        wide = make_job(gen_bridged_circuit(random.Random(0), "w", 16, 20),
                        shots=200)
        s = schedule_with_cuts([wide], fleet3, config(CutMode.LO))
        placed = [m.id for p in s.placements for m in p.group.members]
        assert "w" not in placed
        assert len(placed) == 18
        assert all(m.parent_id == "w" for p in s.placements
                   for m in p.group.members)
        assert_schedule_safe(s, fleet3)

    def test_mandatory_cut_locc_keeps_order(self, fleet3):
        wide = make_job(gen_bridged_circuit(random.Random(0), "w", 16, 20),
                        shots=200)
        s = schedule_with_cuts([wide], fleet3, config(CutMode.LOCC))
        placed = [m for p in s.placements for m in p.group.members]
        assert len(placed) == 8
        assert_schedule_safe(s, fleet3)

    def test_mandatory_infeasible_raises(self, fleet3):
        # LOCC on a 24-qubit bridge: 12+1 ancilla never fits 12 qubits
        wide = make_job(gen_bridged_circuit(random.Random(1), "w", 24, 20))
        with pytest.raises(UnschedulableError) as exc:
            schedule_with_cuts([wide], fleet3, config(CutMode.LOCC))
        assert exc.value.job_id == "w"

    def test_oversized_fragment_rejected(self, fleet3):
        frag = make_job(line_circuit("p.a", 13), job_id="p.c0a0",
                        parent_id="p", stage=Stage.UPSTREAM, cut_index=0,
                        n_cut=1)
        with pytest.raises(UnschedulableError):
            schedule_with_cuts([frag], fleet3, config(CutMode.LOCC))

    def test_narrow_jobs_never_cut(self, fleet3):
        # all widths below theta * max capacity = 6
        jobs = narrow_jobs(random.Random(2), 12, max_width=5)
        s = schedule_with_cuts(jobs, fleet3, config())
        assert all(m.parent_id is None for p in s.placements
                   for m in p.group.members)
        assert len(s.iteration_makespans) == 1

    def test_zero_overhead_cut_accepted(self, fleet3):
        # a disconnected 12-qubit job splits into two 6-qubit halves at no
        # sampling cost; the candidate ties the incumbent makespan, and the
        # accept rule (candidate <= incumbent) takes it and restarts
        halves = Circuit(id="w", num_qubits=12, depth=10,
                         coupling=tuple((i, i + 1, 3) for i in range(5))
                         + tuple((i, i + 1, 3) for i in range(6, 11)))
        w = make_job(halves, shots=300)
        solid = make_job(line_circuit("s", 12, depth=10), shots=300)
        s = schedule_with_cuts([w, solid], fleet3, config(CutMode.LO))
        assert len(s.iteration_makespans) == 2
        assert s.iteration_makespans[1] <= s.iteration_makespans[0]
        placed = sorted(m.id for p in s.placements for m in p.group.members)
        assert placed == ["s", "w.c0a0", "w.c0b0"]
        assert_schedule_safe(s, fleet3)

    @given(st.integers(0, 50_000))
    @settings(max_examples=30, deadline=None)
    def test_iteration_makespans_monotone(self, seed):
        rng = random.Random(seed)
        fleet = small_fleet()
        jobs = narrow_jobs(rng, rng.randint(1, 25), max_width=12,
                           arrival_span=2.0)
        mode = CutMode.LO if seed % 2 == 0 else CutMode.LOCC
        s = schedule_with_cuts(jobs, fleet, config(mode))
        ms = s.iteration_makespans
        assert 1 <= len(ms) <= len(jobs) + 2
        assert all(b <= a + 1e-9 for a, b in zip(ms, ms[1:]))
        assert s.makespan <= ms[0] + 1e-9
        assert_schedule_safe(s, fleet)

    def test_deterministic(self, fleet3):
        spec = WorkloadSpec(width_range=(2, 12), depth_range=(5, 40))
        jobs = gen_workload(spec, 20, rate=5.0, seed=7,
                            max_module_qubits=12)
        s1 = schedule_with_cuts(jobs, fleet3, config(CutMode.LOCC))
        s2 = schedule_with_cuts(jobs, fleet3, config(CutMode.LOCC))
        assert [(p.device, p.start, p.finish, p.group.member_ids)
                for p in s1.placements] == \
               [(p.device, p.start, p.finish, p.group.member_ids)
                for p in s2.placements]

    def test_cache_reuse_is_equivalent(self, fleet3):
        jobs = narrow_jobs(random.Random(9), 15, max_width=12)
        shared = PlannerCache()
        s1 = schedule_with_cuts(jobs, fleet3, config(), cache=shared)
        s2 = schedule_with_cuts(jobs, fleet3, config(), cache=shared)
        fresh = schedule_with_cuts(jobs, fleet3, config())
        for s in (s2,):
            assert [(p.device, p.start) for p in s.placements] == \
                [(p.device, p.start) for p in fresh.placements]
        assert makespan(s1) == makespan(fresh)
