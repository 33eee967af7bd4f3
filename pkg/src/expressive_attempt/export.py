"""Deterministic plan export: sampled CSV and a structured JSON document.

CSV rows use 9 significant digits. The JSON document writes floats with
Python's shortest round-trip repr, so reloading it reproduces every waypoint
exactly.
"""

from __future__ import annotations

import io
import json

import numpy as np

from .kinematics import KinematicChain, joint_positions
from .motion import MotionPlan, Phase, sample_plan_labeled
from .taskfile import task_from_dict, task_to_dict

CSV_DT = 0.02
FORMAT_VERSION = 1


def _fmt(v):
    return format(float(v), ".9g")


def _plain(obj):
    """Recursively convert numpy scalars/arrays into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def plan_header(plan):
    """Header fields echoed by every export (task name, settings, objective, residual)."""
    meta = plan.metadata
    return {
        "task": meta.get("task"),
        "kind": meta.get("kind"),
        "settings": meta.get("settings", {}),
        "objective": meta.get("objective"),
        "constraint_residual": meta.get("constraint_residual"),
    }


def export_csv(plan, chain, dt=CSV_DT):
    """Sampled rows ``t, phase, q_0..q_{n-1}, ee_x, ee_y`` preceded by ``#`` header lines.

    Rows come from :func:`~expressive_attempt.motion.sample_plan_labeled`, so
    there are ``floor(total / dt) + 1`` of them plus one more when ``dt`` does
    not divide the total duration.
    """
    times, labels, configs = sample_plan_labeled(plan, dt)
    ee = joint_positions(chain, configs)[0][:, -1, :]
    out = io.StringIO()
    header = plan_header(plan)
    out.write(f"# task: {header['task']}\n")
    out.write(f"# kind: {header['kind']}\n")
    out.write("# settings: " + json.dumps(_plain(header["settings"]), sort_keys=True, separators=(",", ":")) + "\n")
    for key in ("objective", "constraint_residual"):
        value = header[key]
        out.write(f"# {key}: {'none' if value is None else _fmt(value)}\n")
    out.write("t,phase," + ",".join(f"q{i}" for i in range(chain.dof)) + ",ee_x,ee_y\n")
    for t, label, q, p in zip(times, labels, configs, ee):
        out.write(",".join([_fmt(t), label, *map(_fmt, q), _fmt(p[0]), _fmt(p[1])]) + "\n")
    return out.getvalue()


def export_structured(plan, chain, task=None):
    """Full phase/waypoint hierarchy plus chain, task and settings echo, as JSON text."""
    doc = {
        "format": "expressive-attempt-plan",
        "version": FORMAT_VERSION,
        "header": plan_header(plan),
        "chain": chain.to_dict(),
        "task": None if task is None else task_to_dict(task),
        "total_duration": plan.total_duration,
        "phases": [
            {"label": p.label, "step_duration": p.step_duration, "waypoints": p.waypoints}
            for p in plan.phases
        ],
    }
    return json.dumps(_plain(doc), sort_keys=True, indent=2) + "\n"


def export_plan(plan, chain, fmt="csv", task=None):
    """Render ``plan`` as ``"csv"`` or ``"structured"`` text."""
    if fmt == "csv":
        return export_csv(plan, chain)
    if fmt == "structured":
        return export_structured(plan, chain, task)
    raise ValueError(f"format must be 'csv' or 'structured', got {fmt!r}")


def load_plan(text):
    """Parse a structured export back into ``(plan, chain, task)``.

    ``task`` is ``None`` when the export did not include one.
    """
    doc = json.loads(text)
    if doc.get("format") != "expressive-attempt-plan":
        raise ValueError("not a structured plan export")
    c = doc["chain"]
    chain = KinematicChain(c["base_mobile"], c["link_lengths"], c["joint_limits"], c["body_points"])
    phases = [Phase(p["label"], np.array(p["waypoints"], dtype=float), p["step_duration"]) for p in doc["phases"]]
    h = doc["header"]
    meta = {"kind": h.get("kind"), "task": h.get("task"), "settings": h.get("settings", {}),
            "objective": h.get("objective"), "constraint_residual": h.get("constraint_residual")}
    task = None if doc.get("task") is None else task_from_dict(doc["task"])
    return MotionPlan(phases, meta), chain, task
