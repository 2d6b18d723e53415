"""Circuit bipartitioning, cut overheads, sub-job expansion, classical delay."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (InfeasibleCutError, OverheadOverflowError,
                     ValidationError)
from .workload import Circuit, Job, Stage


class CutMode(str, Enum):
    """How a cut is realized: fully local variants, wire-style local cut,
    or classically coordinated (upstream feeds downstream)."""

    LO = "lo"
    LOCC = "locc"
    LO_WIRE = "lo_wire"


_OVERHEAD_BASE = {CutMode.LO: 9, CutMode.LOCC: 4, CutMode.LO_WIRE: 16}

# Exact-integer ceiling for overhead values; anything past this is far over
# any practical budget and reported as overflow instead of silently huge.
_OVERHEAD_LIMIT = 2 ** 63 - 1

# Hard cap on emitted sub-jobs for mandatory cuts (budget is bypassed there).
MAX_SUBJOBS = 200_000

# Widths up to this are bipartitioned by exhaustive enumeration.
EXACT_SEARCH_LIMIT = 12

_POPCOUNT = np.array([bin(i).count("1") for i in range(1 << EXACT_SEARCH_LIMIT)],
                     dtype=np.int64)


@dataclass(frozen=True)
class CutBudget:
    """Global sampling budget and the adaptive cut-eligibility threshold.

    A Flat job becomes an adaptive cut candidate when its width reaches
    `adaptive_threshold` times the largest device capacity; a cut whose
    overhead exceeds `max_overhead` is rejected unless mandatory.
    """

    max_overhead: int = 729
    adaptive_threshold: float = 0.5

    def __post_init__(self):
        if self.max_overhead < 1:
            raise ValidationError("max_overhead must be >= 1")
        if not (0.0 < self.adaptive_threshold <= 1.0):
            raise ValidationError("adaptive_threshold must be in (0, 1]")


@dataclass(frozen=True)
class CutPlan:
    """A resolved bipartition of one parent circuit plus its cost figures."""

    parent_id: str
    part_a: tuple[int, ...]
    part_b: tuple[int, ...]
    n_cut: int
    mode: CutMode
    overhead: int
    ancilla_per_side: int

    def __post_init__(self):
        if not self.part_a or not self.part_b:
            raise ValidationError("both parts must be non-empty")
        if set(self.part_a) & set(self.part_b):
            raise ValidationError("parts must be disjoint")
        if self.n_cut < 1:
            raise ValidationError("a cut plan needs n_cut >= 1")
        if self.overhead != overhead(self.mode, self.n_cut):
            raise ValidationError("overhead inconsistent with mode and n_cut")
        expected_anc = self.n_cut if self.mode is CutMode.LOCC else 0
        if self.ancilla_per_side != expected_anc:
            raise ValidationError("ancilla_per_side inconsistent with mode")


def overhead(mode: CutMode, n_cut: int) -> int:
    """Sampling overhead of a cut: 9^n (LO), 4^n (LOCC), 16^n (wire)."""
    if n_cut < 0:
        raise ValidationError("n_cut must be >= 0")
    value = _OVERHEAD_BASE[CutMode(mode)] ** n_cut
    if value > _OVERHEAD_LIMIT:
        raise OverheadOverflowError(
            f"overhead {mode} n_cut={n_cut} exceeds exact integer range")
    return value


# ---------------------------------------------------------------------------
# Bipartition search
# ---------------------------------------------------------------------------

def _crossing_weight(coupling, in_a) -> int:
    return sum(w for a, b, w in coupling if in_a[a] != in_a[b])


def _exact_bipartition(circuit: Circuit, q_target: int):
    # Qubit n-1 pinned to part_b: halves the search and kills the mirror (a
    # bipartition and its complement are the same cut).
    n = circuit.num_qubits
    masks = np.arange(1, 1 << (n - 1), dtype=np.int64)
    size_a = _POPCOUNT[masks]
    feasible = (size_a <= q_target) & ((n - size_a) <= q_target)
    cross = np.zeros(masks.shape[0], dtype=np.int64)
    for a, b, w in circuit.coupling:
        cross += w * (((masks >> a) ^ (masks >> b)) & 1)
    big = np.iinfo(np.int64).max
    cross = np.where(feasible, cross, big)
    idx = int(np.argmin(cross))  # first minimum: lowest mask wins ties
    mask = int(masks[idx])
    part_a = tuple(i for i in range(n) if (mask >> i) & 1)
    part_b = tuple(i for i in range(n) if not (mask >> i) & 1)
    return part_a, part_b, int(cross[idx])


_KL_MAX_PASSES = 10
_KL_TOP_K = 8


def _kl_bipartition(circuit: Circuit, q_target: int):
    # Balanced split refined by Kernighan-Lin swap passes. Pair swaps keep
    # part sizes fixed, so for odd widths both balanced seeds (ceil on A,
    # floor on A) are refined and the lower-crossing result wins.
    n = circuit.num_qubits
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    wmap: dict[tuple[int, int], int] = {}
    for a, b, w in circuit.coupling:
        adj[a].append((b, w))
        adj[b].append((a, w))
        wmap[(a, b)] = w
    best = None
    for size_a in sorted({(n + 1) // 2, n // 2}, reverse=True):
        in_a = _kl_refine(n, adj, wmap, size_a)
        crossing = _crossing_weight(circuit.coupling, in_a)
        if best is None or crossing < best[0]:
            best = (crossing, in_a)
    crossing, in_a = best
    part_a = tuple(u for u in range(n) if in_a[u])
    part_b = tuple(u for u in range(n) if not in_a[u])
    return part_a, part_b, crossing


def _kl_refine(n: int, adj, wmap, size_a: int):
    in_a = [i < size_a for i in range(n)]

    def edge_w(u, v):
        return wmap.get((u, v) if u < v else (v, u), 0)

    for _ in range(_KL_MAX_PASSES):
        d = [0] * n
        for u in range(n):
            for v, w in adj[u]:
                d[u] += w if in_a[u] != in_a[v] else -w
        locked = [False] * n
        side_a = [u for u in range(n) if in_a[u]]
        side_b = [u for u in range(n) if not in_a[u]]
        seq: list[tuple[int, int, int]] = []
        for _step in range(min(len(side_a), len(side_b))):
            top_a = sorted((u for u in side_a if not locked[u]),
                           key=lambda u: (-d[u], u))[:_KL_TOP_K]
            top_b = sorted((u for u in side_b if not locked[u]),
                           key=lambda u: (-d[u], u))[:_KL_TOP_K]
            best = None
            for ua in top_a:
                for ub in top_b:
                    gain = d[ua] + d[ub] - 2 * edge_w(ua, ub)
                    key = (-gain, ua, ub)
                    if best is None or key < best:
                        best = key
            gain, ua, ub = -best[0], best[1], best[2]
            locked[ua] = locked[ub] = True
            seq.append((gain, ua, ub))
            for v, w in adj[ua]:
                if not locked[v]:
                    d[v] += 2 * w if in_a[v] else -2 * w
            for v, w in adj[ub]:
                if not locked[v]:
                    d[v] += 2 * w if not in_a[v] else -2 * w
        cum = list(itertools.accumulate(g for g, _, _ in seq))
        best_k = max(range(len(cum)), key=lambda k: (cum[k], -k), default=-1)
        if best_k < 0 or cum[best_k] <= 0:
            break
        for gain, ua, ub in seq[:best_k + 1]:
            in_a[ua] = False
            in_a[ub] = True
    return in_a


def find_bipartition(circuit: Circuit, q_target: int):
    """Split a circuit's qubits into two parts of at most q_target each,
    minimizing crossing coupling weight.

    Exact (exhaustive) up to EXACT_SEARCH_LIMIT qubits, deterministic
    swap-refinement above. Returns (part_a, part_b, n_cut).
    """
    if q_target < 1:
        raise ValidationError("q_target must be >= 1")
    n = circuit.num_qubits
    if n < 2:
        raise ValidationError("cannot bipartition a single-qubit circuit")
    if (n + 1) // 2 > q_target:
        raise InfeasibleCutError(
            f"circuit {circuit.id}: no bipartition of {n} qubits fits "
            f"q_target={q_target}")
    if n <= EXACT_SEARCH_LIMIT:
        return _exact_bipartition(circuit, q_target)
    return _kl_bipartition(circuit, q_target)


# ---------------------------------------------------------------------------
# Sub-job expansion
# ---------------------------------------------------------------------------

def _resolve(circuit: Circuit, mode: CutMode, fleet_max_q: int):
    """Bipartition honoring ancilla space in LOCC mode.

    LOCC fragments carry n_cut ancillas each, so the usable width shrinks
    with the very n_cut being computed; a short fixed-point loop settles it.
    """
    if mode is CutMode.LO:
        part_a, part_b, n_cut = find_bipartition(circuit, fleet_max_q)
        return part_a, part_b, n_cut, 0
    q_target = fleet_max_q
    for _ in range(8):
        part_a, part_b, n_cut = find_bipartition(circuit, q_target)
        widest = max(len(part_a), len(part_b)) + n_cut
        if widest <= fleet_max_q:
            return part_a, part_b, n_cut, n_cut
        q_target = fleet_max_q - n_cut
        if q_target < (circuit.num_qubits + 1) // 2:
            break  # ancillas leave no room for half the qubits
    raise InfeasibleCutError(
        f"circuit {circuit.id}: fragments plus ancillas never fit "
        f"{fleet_max_q} qubits")


def plan_cut(job: Job, mode: CutMode, fleet_max_q: int) -> CutPlan | None:
    """Resolve the cut a job would get; None when the min cut is zero
    (disconnected circuit, plain split with no overhead)."""
    part_a, part_b, n_cut, anc = _resolve(job.circuit, mode, fleet_max_q)
    if n_cut == 0:
        return None
    return CutPlan(parent_id=job.id, part_a=part_a, part_b=part_b,
                   n_cut=n_cut, mode=mode, overhead=overhead(mode, n_cut),
                   ancilla_per_side=anc)


def _fragment_circuit(parent: Circuit, part: tuple[int, ...], ancillas: int,
                      suffix: str, one_q: int) -> Circuit:
    index = {q: i for i, q in enumerate(sorted(part))}
    inner = tuple(sorted((index[a], index[b], w) for a, b, w in parent.coupling
                         if a in index and b in index))
    return Circuit(id=f"{parent.id}.{suffix}", num_qubits=len(part) + ancillas,
                   depth=parent.depth, coupling=inner, one_q_gates=one_q)


def try_cut(job: Job, mode: CutMode, fleet_max_q: int, budget: CutBudget,
            mandatory: bool = False) -> list[Job]:
    """Expand a Flat job into its cut sub-jobs, or return [] if the cut is
    rejected (over budget, or unrealizable on a non-mandatory cut).

    LO: 2 x 9^n_cut Flat variants, one batch per fragment. LOCC: 2 x 4^n_cut
    variants, fragment A Upstream and fragment B Downstream, each widened by
    n_cut Bell-pair ancillas. Variants inherit shots and arrival time.
    """
    if mode not in (CutMode.LO, CutMode.LOCC):
        raise ValidationError("try_cut mode must be LO or LOCC")
    if job.stage is not Stage.FLAT:
        raise ValidationError(f"job {job.id}: sub-jobs are never re-cut")
    circ = job.circuit
    try:
        if circ.num_qubits < 2:
            raise InfeasibleCutError(
                f"job {job.id}: single-qubit circuit cannot be cut")
        part_a, part_b, n_cut, anc = _resolve(circ, mode, fleet_max_q)
        ov = overhead(mode, n_cut)
    except (InfeasibleCutError, OverheadOverflowError) as exc:
        if mandatory:
            raise InfeasibleCutError(
                f"job {job.id}: mandatory cut failed: {exc}") from exc
        return []
    if not mandatory and ov > budget.max_overhead:
        return []
    if 2 * ov > MAX_SUBJOBS:
        if mandatory:
            raise InfeasibleCutError(
                f"job {job.id}: cut would emit {2 * ov} sub-jobs "
                f"(cap {MAX_SUBJOBS})")
        return []

    one_q_a = circ.one_q_gates * len(part_a) // circ.num_qubits
    frag_a = _fragment_circuit(circ, part_a, anc, "a", one_q_a)
    frag_b = _fragment_circuit(circ, part_b, anc, "b",
                               circ.one_q_gates - one_q_a)
    if mode is CutMode.LOCC and n_cut >= 1:
        stage_a, stage_b = Stage.UPSTREAM, Stage.DOWNSTREAM
    else:
        # LO variants, and zero-cut splits in either mode, are independent.
        stage_a = stage_b = Stage.FLAT
    pad = max(len(str(ov - 1)), 1)
    subs: list[Job] = []
    for key, frag, stage in (("a", frag_a, stage_a), ("b", frag_b, stage_b)):
        for v in range(ov):
            subs.append(Job(
                id=f"{job.id}.c0{key}{v:0{pad}d}",
                circuit=frag,
                shots=job.shots,
                arrival_time=job.arrival_time,
                parent_id=job.id,
                stage=stage,
                cut_index=0,
                n_cut=n_cut,
            ))
    return subs


def classical_delay(n_cut: int, shots: int, beta_comm: float,
                    tau_link: float, gamma_proc: float, n_sub: int) -> float:
    """Classical feed-forward delay of an LOCC cut: per-shot link traffic of
    beta_comm bits per cut, plus per-sub-job post-processing."""
    if n_cut < 1 or shots < 1 or n_sub < 1:
        raise ValidationError("n_cut, shots and n_sub must be >= 1")
    if beta_comm <= 0 or tau_link <= 0 or gamma_proc < 0:
        raise ValidationError("beta_comm and tau_link must be > 0, "
                              "gamma_proc >= 0")
    return n_cut * beta_comm * tau_link * shots + gamma_proc * n_sub
