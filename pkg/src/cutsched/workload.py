"""Circuit and job models, synthetic workload generation, JSONL persistence."""

from __future__ import annotations

import json
import math
import os
import random
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import ParseError, ValidationError

WORKLOAD_FORMAT = "workload"
WORKLOAD_VERSION = 1


class Stage(str, Enum):
    """Role of a job in a cut: plain circuit, or one side of an LOCC cut."""

    FLAT = "flat"
    UPSTREAM = "upstream"
    DOWNSTREAM = "downstream"


class WorkloadClass(str, Enum):
    SMALL = "small"
    LARGE_MANDATORY = "large_mandatory"
    RANDOM_HETEROGENEOUS = "random_heterogeneous"


@dataclass(frozen=True)
class Circuit:
    """Static description of a circuit: width, depth and weighted coupling.

    `coupling` holds one entry per interacting qubit pair, `(a, b, weight)`
    with a < b; the weight counts two-qubit gates on that pair across the
    whole circuit.
    """

    id: str
    num_qubits: int
    depth: int
    coupling: tuple[tuple[int, int, int], ...]
    one_q_gates: int = 0

    def __post_init__(self):
        if not self.id:
            raise ValidationError("circuit id must be non-empty")
        if self.num_qubits < 1:
            raise ValidationError(f"circuit {self.id}: num_qubits must be >= 1")
        if self.depth < 1:
            raise ValidationError(f"circuit {self.id}: depth must be >= 1")
        if self.one_q_gates < 0:
            raise ValidationError(f"circuit {self.id}: one_q_gates must be >= 0")
        norm = []
        seen = set()
        for edge in self.coupling:
            if len(edge) != 3:
                raise ValidationError(
                    f"circuit {self.id}: coupling entries must be (a, b, weight)")
            a, b, w = int(edge[0]), int(edge[1]), int(edge[2])
            if not (0 <= a < b < self.num_qubits):
                raise ValidationError(
                    f"circuit {self.id}: bad coupling pair ({a}, {b})")
            if w < 1:
                raise ValidationError(
                    f"circuit {self.id}: coupling weight must be >= 1")
            if (a, b) in seen:
                raise ValidationError(
                    f"circuit {self.id}: duplicate coupling pair ({a}, {b})")
            seen.add((a, b))
            norm.append((a, b, w))
        norm.sort()
        object.__setattr__(self, "coupling", tuple(norm))

    @property
    def volume(self) -> int:
        return self.num_qubits * self.depth

    @property
    def two_q_gates(self) -> int:
        return sum(w for _, _, w in self.coupling)


@dataclass(frozen=True)
class Job:
    """A unit of schedulable work: a circuit plus shot count and arrival time.

    Cut products carry lineage: `parent_id` names the job they were cut from,
    `cut_index` distinguishes multiple cuts of one parent, `n_cut` is the
    number of severed gates. Upstream/downstream stages only appear on LOCC
    fragments; fully independent fragments (LO variants, zero-cut splits)
    stay FLAT but keep their lineage fields.
    """

    id: str
    circuit: Circuit
    shots: int
    arrival_time: float = 0.0
    parent_id: str | None = None
    stage: Stage = Stage.FLAT
    cut_index: int | None = None
    n_cut: int = 0

    def __post_init__(self):
        if not self.id:
            raise ValidationError("job id must be non-empty")
        if self.shots < 1:
            raise ValidationError(f"job {self.id}: shots must be >= 1")
        if not (self.arrival_time >= 0.0 and math.isfinite(self.arrival_time)):
            raise ValidationError(
                f"job {self.id}: arrival_time must be finite and >= 0")
        if self.n_cut < 0:
            raise ValidationError(f"job {self.id}: n_cut must be >= 0")
        if self.cut_index is not None and self.cut_index < 0:
            raise ValidationError(f"job {self.id}: cut_index must be >= 0")
        if self.stage is not Stage.FLAT:
            # LOCC fragments are meaningless without lineage and >= 1 cut.
            if self.parent_id is None or self.cut_index is None:
                raise ValidationError(
                    f"job {self.id}: stage {self.stage.value} requires "
                    "parent_id and cut_index")
            if self.n_cut < 1:
                raise ValidationError(
                    f"job {self.id}: stage {self.stage.value} requires n_cut >= 1")

    @property
    def num_qubits(self) -> int:
        return self.circuit.num_qubits

    @property
    def root_id(self) -> str:
        """Id of the original submitted job this work derives from."""
        return self.parent_id if self.parent_id is not None else self.id


def shots_for_volume(width: int, depth: int, base_shots: int = 1000,
                     factor: float = 1.5) -> int:
    """Shot count scaled by circuit volume: round(base * factor**b) with
    b = floor(log10(volume)). Bigger circuits get sampled harder."""
    if width < 1 or depth < 1:
        raise ValidationError("width and depth must be >= 1")
    if base_shots < 1 or factor <= 0:
        raise ValidationError("base_shots must be >= 1 and factor > 0")
    volume = width * depth
    b = len(str(volume)) - 1  # exact floor(log10) for positive ints
    return round(base_shots * factor ** b)


# ---------------------------------------------------------------------------
# Synthetic circuit generators
# ---------------------------------------------------------------------------

def gen_random_circuit(rng: random.Random, circuit_id: str, width: int,
                       depth: int, long_range_fraction: float = 0.1) -> Circuit:
    """Random connected circuit on a line backbone.

    Adjacent pairs carry most of the two-qubit weight (roughly depth/4 to
    depth/2 gates each); a sparse set of longer-range pairs gets light
    weights. Single-qubit gates fill the remaining depth budget.
    """
    if width == 1:
        return Circuit(id=circuit_id, num_qubits=1, depth=depth,
                       coupling=(), one_q_gates=depth)
    weights: dict[tuple[int, int], int] = {}
    lo_w = max(1, depth // 4)
    hi_w = max(1, depth // 2)
    for i in range(width - 1):
        weights[(i, i + 1)] = rng.randint(lo_w, hi_w)
    n_long = round(long_range_fraction * (width - 1))
    for _ in range(n_long):
        a = rng.randrange(width)
        b = rng.randrange(width)
        if a == b:
            continue
        if a > b:
            a, b = b, a
        w = rng.randint(1, max(1, depth // 8))
        weights[(a, b)] = weights.get((a, b), 0) + w
    coupling = tuple((a, b, w) for (a, b), w in sorted(weights.items()))
    two_q = sum(weights.values())
    one_q = max(width * depth - 2 * two_q, 0)
    return Circuit(id=circuit_id, num_qubits=width, depth=depth,
                   coupling=coupling, one_q_gates=one_q)


def gen_bridged_circuit(rng: random.Random, circuit_id: str, width: int,
                        depth: int, n_bridge: int = 1) -> Circuit:
    """Circuit made of two dense halves joined by `n_bridge` unit-weight
    edges. The bridge is the min cut, so these circuits are cheap to split."""
    if width < 2:
        raise ValidationError("bridged circuits need width >= 2")
    if n_bridge < 1:
        raise ValidationError("n_bridge must be >= 1")
    half_a = width // 2
    left = gen_random_circuit(rng, circuit_id + ".l", half_a, depth)
    right = gen_random_circuit(rng, circuit_id + ".r", width - half_a, depth)
    weights: dict[tuple[int, int], int] = {}
    for a, b, w in left.coupling:
        weights[(a, b)] = w
    for a, b, w in right.coupling:
        weights[(a + half_a, b + half_a)] = w
    placed = 0
    attempts = 0
    while placed < n_bridge and attempts < 20 * n_bridge:
        attempts += 1
        a = rng.randrange(half_a)
        b = half_a + rng.randrange(width - half_a)
        if (a, b) in weights:
            continue
        weights[(a, b)] = 1
        placed += 1
    if placed < n_bridge:
        raise ValidationError(
            f"circuit {circuit_id}: could not place {n_bridge} bridge edges")
    coupling = tuple((a, b, w) for (a, b), w in sorted(weights.items()))
    two_q = sum(weights.values())
    one_q = max(width * depth - 2 * two_q, 0)
    return Circuit(id=circuit_id, num_qubits=width, depth=depth,
                   coupling=coupling, one_q_gates=one_q)


# ---------------------------------------------------------------------------
# Workload classes and generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WorkloadSpec:
    """Sampling ranges for one workload class."""

    width_range: tuple[int, int]
    depth_range: tuple[int, int]
    large_fraction: float = 0.0
    base_shots: int = 1000
    shot_factor: float = 1.5


CLASS_PRESETS: dict[WorkloadClass, WorkloadSpec] = {
    WorkloadClass.SMALL: WorkloadSpec(
        width_range=(5, 40), depth_range=(10, 80), large_fraction=0.0),
    WorkloadClass.LARGE_MANDATORY: WorkloadSpec(
        width_range=(5, 40), depth_range=(10, 80), large_fraction=0.1),
    WorkloadClass.RANDOM_HETEROGENEOUS: WorkloadSpec(
        width_range=(5, 127), depth_range=(10, 200), large_fraction=0.1),
}


def gen_workload(wl_class: WorkloadClass | WorkloadSpec, count: int,
                 rate: float, seed: int, large_fraction: float | None = None,
                 max_module_qubits: int = 127) -> list[Job]:
    """Generate `count` jobs with Poisson arrivals at the given rate.

    A `large_fraction` share of jobs exceeds `max_module_qubits` (width drawn
    from (max+1) .. (max+33)); those are built as bridged circuits so a
    mandatory cut stays cheap. Everything else is a random circuit capped at
    `max_module_qubits`.
    """
    if count < 0:
        raise ValidationError("count must be >= 0")
    if rate <= 0:
        raise ValidationError("arrival rate must be > 0")
    spec = CLASS_PRESETS[wl_class] if isinstance(wl_class, WorkloadClass) else wl_class
    if large_fraction is not None:
        spec = replace(spec, large_fraction=large_fraction)
    if not (0.0 <= spec.large_fraction <= 1.0):
        raise ValidationError("large_fraction must be in [0, 1]")
    rng = random.Random(seed)
    jobs: list[Job] = []
    t = 0.0
    for i in range(count):
        t += rng.expovariate(rate)
        jid = f"j{i:04d}"
        depth = rng.randint(*spec.depth_range)
        if spec.large_fraction > 0 and rng.random() < spec.large_fraction:
            width = rng.randint(max_module_qubits + 1, max_module_qubits + 33)
            circ = gen_bridged_circuit(rng, jid, width, depth, n_bridge=1)
        else:
            width = min(rng.randint(*spec.width_range), max_module_qubits)
            circ = gen_random_circuit(rng, jid, width, depth)
        shots = shots_for_volume(width, depth, spec.base_shots, spec.shot_factor)
        jobs.append(Job(id=jid, circuit=circ, shots=shots, arrival_time=t))
    return jobs


# ---------------------------------------------------------------------------
# Persistence (JSON Lines, versioned header)
# ---------------------------------------------------------------------------

def job_to_record(job: Job) -> dict:
    return {
        "id": job.id,
        "circuit_id": job.circuit.id,
        "num_qubits": job.circuit.num_qubits,
        "depth": job.circuit.depth,
        "one_q_gates": job.circuit.one_q_gates,
        "coupling": [[a, b, w] for a, b, w in job.circuit.coupling],
        "shots": job.shots,
        "arrival_time": job.arrival_time,
        "parent_id": job.parent_id,
        "stage": job.stage.value,
        "cut_index": job.cut_index,
        "n_cut": job.n_cut,
    }


_REQUIRED_FIELDS = ("id", "num_qubits", "depth", "one_q_gates", "coupling",
                    "shots", "arrival_time", "parent_id", "stage",
                    "cut_index", "n_cut")


def record_to_job(rec: dict) -> Job:
    for name in _REQUIRED_FIELDS:
        if name not in rec:
            raise ValidationError(f"missing field {name!r}")
    try:
        stage = Stage(rec["stage"])
    except ValueError:
        raise ValidationError(f"unknown stage {rec['stage']!r}") from None
    # circuit_id is optional: cut variants share one fragment circuit whose
    # id differs from the job id; plain jobs just reuse the job id.
    circ = Circuit(
        id=str(rec.get("circuit_id") or rec["id"]),
        num_qubits=int(rec["num_qubits"]),
        depth=int(rec["depth"]),
        coupling=tuple(tuple(e) for e in rec["coupling"]),
        one_q_gates=int(rec["one_q_gates"]),
    )
    return Job(
        id=str(rec["id"]),
        circuit=circ,
        shots=int(rec["shots"]),
        arrival_time=float(rec["arrival_time"]),
        parent_id=rec["parent_id"],
        stage=stage,
        cut_index=rec["cut_index"],
        n_cut=int(rec["n_cut"]),
    )


def save_workload(jobs: list[Job], path: str) -> None:
    """Write jobs as JSON Lines behind a format/version header line."""
    lines = [json.dumps({"format": WORKLOAD_FORMAT, "version": WORKLOAD_VERSION},
                        sort_keys=True)]
    lines.extend(json.dumps(job_to_record(j), sort_keys=True) for j in jobs)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def load_workload(path: str) -> list[Job]:
    """Read a workload file; parse problems name the line (and field)."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read().splitlines()
    if not raw:
        raise ParseError("empty file, expected a header line", path=path, line=1)
    try:
        header = json.loads(raw[0])
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON in header: {exc.msg}",
                         path=path, line=1) from None
    if not isinstance(header, dict) or header.get("format") != WORKLOAD_FORMAT:
        raise ParseError("not a workload file (bad format header)",
                         path=path, line=1, field="format")
    if header.get("version") != WORKLOAD_VERSION:
        raise ParseError(
            f"unsupported workload version {header.get('version')!r}, "
            f"expected {WORKLOAD_VERSION}", path=path, line=1, field="version")
    jobs: list[Job] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(raw[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}",
                             path=path, line=lineno) from None
        if not isinstance(rec, dict):
            raise ParseError("record must be a JSON object",
                             path=path, line=lineno)
        try:
            job = record_to_job(rec)
        except ValidationError as exc:
            raise ParseError(str(exc), path=path, line=lineno) from None
        except (TypeError, ValueError) as exc:
            raise ParseError(f"bad field value: {exc}",
                             path=path, line=lineno) from None
        if job.id in seen_ids:
            raise ParseError(f"duplicate job id {job.id!r}",
                             path=path, line=lineno, field="id")
        seen_ids.add(job.id)
        jobs.append(job)
    return jobs
