"""Device fleet model: capacities, error rates, timing, and estimators."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, asdict

from .errors import CapacityError, ParseError, ValidationError
from .workload import Job

FLEET_FORMAT = "fleet"
FLEET_VERSION = 1


@dataclass(frozen=True)
class Device:
    """One QPU module: capacity, per-gate error rates, timing constants.

    tau_link is the classical interconnect latency to peer modules;
    gamma_proc the per-sub-job classical post-processing time.
    """

    name: str
    num_qubits: int
    err_1q: float
    err_2q: float
    err_readout: float
    t_1q: float
    t_2q: float
    t_readout: float
    t_load: float
    tau_link: float
    gamma_proc: float

    def __post_init__(self):
        if not self.name:
            raise ValidationError("device name must be non-empty")
        if self.num_qubits < 1:
            raise ValidationError(f"device {self.name}: num_qubits must be >= 1")
        for field_name in ("err_1q", "err_2q", "err_readout"):
            v = getattr(self, field_name)
            # 1.0 admitted so a dead device reports lpst = -inf, not an error
            if not (0.0 <= v <= 1.0):
                raise ValidationError(
                    f"device {self.name}: {field_name} must be in [0, 1]")
        for field_name in ("t_1q", "t_2q", "t_readout", "tau_link"):
            if getattr(self, field_name) <= 0:
                raise ValidationError(
                    f"device {self.name}: {field_name} must be > 0")
        for field_name in ("t_load", "gamma_proc"):
            if getattr(self, field_name) < 0:
                raise ValidationError(
                    f"device {self.name}: {field_name} must be >= 0")


@dataclass(frozen=True)
class Fleet:
    devices: tuple[Device, ...]

    def __post_init__(self):
        if not self.devices:
            raise ValidationError("fleet must contain at least one device")
        names = [d.name for d in self.devices]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValidationError(f"duplicate device names: {dupes}")
        object.__setattr__(self, "devices", tuple(self.devices))

    @property
    def max_qubits(self) -> int:
        return max(d.num_qubits for d in self.devices)

    def by_name(self, name: str) -> Device:
        for d in self.devices:
            if d.name == name:
                return d
        raise ValidationError(f"no device named {name!r}")


def default_fleet() -> Fleet:
    """Built-in 11-module fleet: two 127-qubit anchors plus nine smaller
    modules (27..65 qubits) with varied synthetic calibration."""
    rows = [
        # name, qubits, err_1q, err_2q, err_ro, t_1q, t_2q, t_read, t_load, tau_link, gamma_proc
        ("q127a", 127, 2.2e-4, 5.0e-3, 1.2e-2, 3.0e-8, 4.8e-7, 3.8e-6, 0.40, 1.0e-6, 1.0e-2),
        ("q127b", 127, 2.6e-4, 5.6e-3, 1.4e-2, 3.0e-8, 5.2e-7, 4.0e-6, 0.40, 1.0e-6, 1.0e-2),
        ("q65a",   65, 2.0e-4, 4.4e-3, 1.1e-2, 3.0e-8, 4.4e-7, 3.6e-6, 0.35, 1.2e-6, 1.0e-2),
        ("q56a",   56, 2.4e-4, 5.2e-3, 1.3e-2, 3.0e-8, 4.6e-7, 3.7e-6, 0.35, 1.2e-6, 1.0e-2),
        ("q48a",   48, 2.8e-4, 6.2e-3, 1.6e-2, 3.2e-8, 5.4e-7, 4.2e-6, 0.30, 1.5e-6, 1.2e-2),
        ("q42a",   42, 3.0e-4, 6.8e-3, 1.7e-2, 3.2e-8, 5.6e-7, 4.3e-6, 0.30, 1.5e-6, 1.2e-2),
        ("q36a",   36, 3.4e-4, 7.6e-3, 1.9e-2, 3.4e-8, 5.8e-7, 4.5e-6, 0.28, 1.5e-6, 1.2e-2),
        ("q33a",   33, 3.6e-4, 8.2e-3, 2.0e-2, 3.4e-8, 6.0e-7, 4.6e-6, 0.28, 1.8e-6, 1.4e-2),
        ("q30a",   30, 3.8e-4, 8.8e-3, 2.2e-2, 3.6e-8, 6.2e-7, 4.8e-6, 0.25, 1.8e-6, 1.4e-2),
        ("q28a",   28, 4.0e-4, 9.4e-3, 2.4e-2, 3.6e-8, 6.4e-7, 4.9e-6, 0.25, 1.8e-6, 1.4e-2),
        ("q27a",   27, 4.2e-4, 1.0e-2, 2.6e-2, 3.8e-8, 6.6e-7, 5.0e-6, 0.25, 2.0e-6, 1.4e-2),
    ]
    return Fleet(devices=tuple(Device(*row) for row in rows))


_DEVICE_FIELDS = ("name", "num_qubits", "err_1q", "err_2q", "err_readout",
                  "t_1q", "t_2q", "t_readout", "t_load", "tau_link",
                  "gamma_proc")


def save_fleet(fleet: Fleet, path: str) -> None:
    header = {"format": FLEET_FORMAT, "version": FLEET_VERSION,
              "calibration": "synthetic"}
    lines = [json.dumps(header, sort_keys=True)]
    lines.extend(json.dumps(asdict(d), sort_keys=True) for d in fleet.devices)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def load_fleet(path: str) -> Fleet:
    """Read a fleet calibration file (JSON Lines behind a v1 header)."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read().splitlines()
    if not raw or not any(line.strip() for line in raw):
        raise ParseError("fleet must contain at least one device",
                         path=path, line=1)
    try:
        header = json.loads(raw[0])
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON in header: {exc.msg}",
                         path=path, line=1) from None
    if not isinstance(header, dict) or header.get("format") != FLEET_FORMAT:
        raise ParseError("not a fleet file (bad format header)",
                         path=path, line=1, field="format")
    if header.get("version") != FLEET_VERSION:
        raise ParseError(
            f"unsupported fleet version {header.get('version')!r}, "
            f"expected {FLEET_VERSION}", path=path, line=1, field="version")
    devices = []
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
        for name in _DEVICE_FIELDS:
            if name not in rec:
                raise ParseError(f"missing field {name!r}",
                                 path=path, line=lineno, field=name)
        try:
            devices.append(Device(
                name=str(rec["name"]),
                num_qubits=int(rec["num_qubits"]),
                err_1q=float(rec["err_1q"]),
                err_2q=float(rec["err_2q"]),
                err_readout=float(rec["err_readout"]),
                t_1q=float(rec["t_1q"]),
                t_2q=float(rec["t_2q"]),
                t_readout=float(rec["t_readout"]),
                t_load=float(rec["t_load"]),
                tau_link=float(rec["tau_link"]),
                gamma_proc=float(rec["gamma_proc"]),
            ))
        except ValidationError as exc:
            raise ParseError(str(exc), path=path, line=lineno) from None
        except (TypeError, ValueError) as exc:
            raise ParseError(f"bad field value: {exc}",
                             path=path, line=lineno) from None
    if not devices:
        raise ParseError("fleet must contain at least one device",
                         path=path, line=2)
    try:
        return Fleet(devices=tuple(devices))
    except ValidationError as exc:
        raise ParseError(str(exc), path=path) from None


def runtime_estimate(job: Job, device: Device) -> float:
    """Wall-clock estimate: per-shot depth and readout, plus load overhead."""
    if job.circuit.num_qubits > device.num_qubits:
        raise CapacityError(
            f"job {job.id} needs {job.circuit.num_qubits} qubits, "
            f"device {device.name} has {device.num_qubits}")
    return (job.shots * (job.circuit.depth * device.t_2q + device.t_readout)
            + device.t_load)


def lpst(job: Job, device: Device) -> float:
    """Log probability of successful trial on this device; 0 is perfect,
    more negative is worse. -inf on a dead (error rate 1) device."""
    if job.circuit.num_qubits > device.num_qubits:
        raise CapacityError(
            f"job {job.id} needs {job.circuit.num_qubits} qubits, "
            f"device {device.name} has {device.num_qubits}")
    total = 0.0
    for weight, err in ((job.circuit.two_q_gates, device.err_2q),
                        (job.circuit.one_q_gates, device.err_1q),
                        (job.circuit.num_qubits, device.err_readout)):
        if weight == 0:
            continue
        if err >= 1.0:
            return -math.inf
        total += weight * math.log1p(-err)
    return total
