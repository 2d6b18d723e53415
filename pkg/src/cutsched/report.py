"""Report emission: schedule JSON, metrics CSV/text, Gantt SVG rendering."""

from __future__ import annotations

import csv
import io
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .errors import ParseError, ValidationError  # noqa: E402
from .fleet import Fleet  # noqa: E402
from .scheduler import Schedule  # noqa: E402
from .simkernel import Metrics  # noqa: E402

SCHEDULE_FORMAT = "schedule"
SCHEDULE_VERSION = 1

METRICS_COLUMNS = ("Mode", "Length", "T_wait", "T_run", "T_total", "LPST",
                   "WorkloadChanges")

# Fixed hash salt keeps matplotlib's generated SVG ids stable across runs.
_SVG_SALT = "cutsched"


def atomic_write_text(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Schedule report
# ---------------------------------------------------------------------------

def schedule_to_dict(schedule: Schedule, mode: str) -> dict:
    placements = []
    cuts: dict[str, dict] = {}
    for p in schedule.placements:
        members = []
        for m in p.group.members:
            members.append({
                "id": m.id, "parent_id": m.parent_id, "stage": m.stage.value,
                "n_cut": m.n_cut, "qubits": m.num_qubits, "shots": m.shots,
                "arrival_time": m.arrival_time,
            })
            if m.parent_id is not None:
                entry = cuts.setdefault(m.parent_id, {
                    "parent_id": m.parent_id, "n_cut": m.n_cut,
                    "sub_jobs": 0, "fragment_widths": set(),
                    "stages": set(),
                })
                entry["sub_jobs"] += 1
                entry["fragment_widths"].add(m.num_qubits)
                entry["stages"].add(m.stage.value)
        placements.append({
            "device": p.device, "start": p.start, "finish": p.finish,
            "mode_tag": p.mode_tag.value, "qubit_demand": p.group.qubit_demand,
            "members": members,
        })
    cut_list = []
    for parent_id in sorted(cuts):
        entry = cuts[parent_id]
        cut_list.append({
            "parent_id": parent_id, "n_cut": entry["n_cut"],
            "sub_jobs": entry["sub_jobs"],
            "fragment_widths": sorted(entry["fragment_widths"]),
            "stages": sorted(entry["stages"]),
        })
    return {
        "format": SCHEDULE_FORMAT, "version": SCHEDULE_VERSION, "mode": mode,
        "makespan": schedule.makespan,
        "iteration_makespans": list(schedule.iteration_makespans),
        "placements": placements,
        "precedence": [{"upstream": u, "downstream": d, "delay": delay}
                       for u, d, delay in schedule.precedence],
        "cuts": cut_list,
    }


def save_schedule_report(schedule: Schedule, mode: str, path: str) -> None:
    atomic_write_text(path, json.dumps(schedule_to_dict(schedule, mode),
                                       sort_keys=True, indent=2) + "\n")


def load_schedule_report(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", path=path,
                             line=exc.lineno) from None
    if not isinstance(doc, dict) or doc.get("format") != SCHEDULE_FORMAT:
        raise ParseError("not a schedule report", path=path, field="format")
    if doc.get("version") != SCHEDULE_VERSION:
        raise ParseError(f"unsupported schedule version {doc.get('version')!r}",
                         path=path, field="version")
    return doc


# ---------------------------------------------------------------------------
# Metrics table
# ---------------------------------------------------------------------------

def metrics_row(mode: str, metrics: Metrics) -> list[str]:
    # repr() keeps full float precision so rows parse back bit-identical
    return [mode, repr(metrics.avg_queue_length), repr(metrics.t_wait),
            repr(metrics.t_run), repr(metrics.t_total),
            repr(metrics.mean_lpst), str(metrics.workload_changes)]


def metrics_csv_text(rows: list[tuple[str, Metrics]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_COLUMNS)
    for mode, metrics in rows:
        writer.writerow(metrics_row(mode, metrics))
    return buf.getvalue()


def save_metrics_csv(rows: list[tuple[str, Metrics]], path: str) -> None:
    atomic_write_text(path, metrics_csv_text(rows))


def parse_metrics_csv(path: str) -> list[dict]:
    """Read a metrics CSV back into per-row dicts keyed by column name."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows or tuple(rows[0]) != METRICS_COLUMNS:
        raise ParseError("bad metrics CSV header", path=path, line=1)
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(METRICS_COLUMNS):
            raise ParseError("wrong column count", path=path, line=lineno)
        out.append({
            "Mode": row[0],
            "Length": float(row[1]),
            "T_wait": float(row[2]),
            "T_run": float(row[3]),
            "T_total": float(row[4]),
            "LPST": float(row[5]),
            "WorkloadChanges": int(row[6]),
        })
    return out


def metrics_table_text(rows: list[tuple[str, Metrics]]) -> str:
    """Human-oriented fixed-width rendering of the same table."""
    header = list(METRICS_COLUMNS)
    body = []
    for mode, m in rows:
        body.append([mode, f"{m.avg_queue_length:.4f}", f"{m.t_wait:.4f}",
                     f"{m.t_run:.4f}", f"{m.t_total:.4f}",
                     f"{m.mean_lpst:.4f}", str(m.workload_changes)])
    widths = [max(len(header[i]), *(len(r[i]) for r in body)) if body
              else len(header[i]) for i in range(len(header))]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(header))]
    lines.append("  ".join("-" * w for w in widths))
    for r in body:
        lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(r))))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Gantt rendering
# ---------------------------------------------------------------------------

def _bars_from_schedule(schedule: Schedule):
    bars = []
    for p in schedule.placements:
        roots = sorted({m.root_id for m in p.group.members})
        bars.append((p.device, p.start, p.finish, roots))
    return bars


def _bars_from_trace(trace):
    bars = []
    for rec in trace:
        if rec.get("event") == "group_start":
            roots = sorted({m["root"] for m in rec["members"]})
            bars.append((rec["device"], rec["start"], rec["finish"], roots))
    return bars


def _render_gantt(bars, fleet: Fleet, path: str, title: str) -> None:
    lanes = [d.name for d in sorted(fleet.devices,
                                    key=lambda d: (-d.num_qubits, d.name))]
    lane_index = {name: i for i, name in enumerate(lanes)}
    for device, _, _, _ in bars:
        if device not in lane_index:
            raise ValidationError(
                f"bar references device {device!r} not present in the fleet")
    all_roots = sorted({r for _, _, _, roots in bars for r in roots})
    cmap = plt.colormaps["tab20"]
    color_of = {root: cmap(i % 20) for i, root in enumerate(all_roots)}

    plt.rcParams["svg.hashsalt"] = _SVG_SALT
    fig, ax = plt.subplots(figsize=(11, 0.55 * max(len(lanes), 4) + 1.2))
    for device, start, finish, roots in bars:
        y = lane_index[device]
        ax.broken_barh([(start, finish - start)], (y + 0.1, 0.8),
                       facecolors=color_of[roots[0]], edgecolor="black",
                       linewidth=0.4)
    for i in range(1, len(lanes)):
        ax.axhline(i, color="black", linewidth=0.8)
    ax.set_yticks([i + 0.5 for i in range(len(lanes))])
    ax.set_yticklabels(lanes)
    ax.set_ylim(0, len(lanes))
    ax.invert_yaxis()
    ax.set_xlabel("time (s)")
    ax.set_title(title)
    fig.tight_layout()
    tmp = path + ".tmp"
    fig.savefig(tmp, format="svg", metadata={"Date": None})
    plt.close(fig)
    os.replace(tmp, path)


def save_gantt_from_schedule(schedule: Schedule, fleet: Fleet, path: str,
                             title: str) -> None:
    _render_gantt(_bars_from_schedule(schedule), fleet, path, title)


def save_gantt_from_trace(trace, fleet: Fleet, path: str, title: str) -> None:
    _render_gantt(_bars_from_trace(trace), fleet, path, title)
