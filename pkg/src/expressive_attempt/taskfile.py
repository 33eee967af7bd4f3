"""Reading and writing task files (TOML).

A task file bundles everything one solve needs: the chain, the task, its
obstacles, the cost, solver options and the motion timing. Only ``[task]`` is
required; every other section falls back to defaults. See the README for the
full grammar.
"""

from __future__ import annotations

import math
import os
import re
import sys
from importlib import resources
from typing import NamedTuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .collision import Box, Circle, CollisionModel, Obstacle
from .costs import COST_KINDS, CostSpec, DistanceMetric
from .exceptions import AttemptError, TaskFileError
from .kinematics import KinematicChain, Pose, default_chain
from .motion import Task, TimingProfile
from .optimizer import SolveOptions

SECTIONS = {
    "chain": {"base_mobile", "link_lengths", "joint_limits", "body_points"},
    "task": {"name", "q_s", "x_f", "x_d", "q_d", "constrain_orientation"},
    "collision": {"link_clearance"},
    "cost": {"kind", "metric", "k", "lambda", "alpha", "body_points"},
    "solve": {
        "T", "penalty_init", "penalty_growth", "outer_iterations", "max_inner_iterations", "gtol",
        "ftol", "constraint_tolerance", "collision_margin", "fixed_base_fk", "inner_solver", "rng_seed",
    },
    "timing": {
        "fast", "moderate", "slow", "attempt_speed", "rewind_speed", "approach_speed",
        "repetitions", "approach_steps",
    },
}
OBSTACLE_KEYS = {"name", "circle", "box", "ignore_links"}
SHAPE_KEYS = {"circle": {"center", "radius"}, "box": {"min", "max"}}
POSE_KEYS = {"position", "orientation"}


BUNDLED_TASKS = ("lift", "push", "pull", "pull-down", "push-sideways")


class TaskBundle(NamedTuple):
    chain: KinematicChain
    task: Task
    spec: CostSpec
    options: SolveOptions
    timing: TimingProfile


class _Locator:
    """Maps dotted field paths back to source lines for error messages."""

    _header = re.compile(r"^\s*\[\[?\s*([A-Za-z0-9_.\-]+)\s*\]\]?")
    _key = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=")

    def __init__(self, text):
        self.index = {}
        counts = {}
        section = ""
        for lineno, line in enumerate(text.splitlines(), 1):
            m = self._header.match(line)
            if m:
                name = m.group(1)
                if line.lstrip().startswith("[["):
                    i = counts.get(name, 0)
                    counts[name] = i + 1
                    name = f"{name}[{i}]"
                section = name
                self.index.setdefault(section, lineno)
                continue
            m = self._key.match(line)
            if m:
                self.index.setdefault(f"{section}.{m.group(1)}" if section else m.group(1), lineno)

    def line(self, path):
        # fall back to the closest enclosing key that was written out
        while path:
            if path in self.index:
                return self.index[path]
            stripped = re.sub(r"\[\d+\]$", "", path)
            path = stripped if stripped != path else path.rpartition(".")[0]
        return None


def _fail(loc, path, message):
    raise TaskFileError(message, field=path, line=loc.line(path))


def _check_keys(loc, table, allowed, path):
    if not isinstance(table, dict):
        _fail(loc, path, f"expected a table, got {type(table).__name__}")
    unknown = sorted(set(table) - allowed)
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        _fail(loc, where, f"unknown key {unknown[0]!r} (allowed: {', '.join(sorted(allowed))})")


def _number(loc, value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        _fail(loc, path, f"expected a finite number, got {value!r}")
    return float(value)


def _vector(loc, value, path, length=None):
    if not isinstance(value, list):
        _fail(loc, path, f"expected an array of numbers, got {value!r}")
    out = [_number(loc, v, f"{path}[{i}]") for i, v in enumerate(value)]
    if length is not None and len(out) != length:
        _fail(loc, path, f"expected {length} numbers, got {len(out)}")
    return out


def _pose(loc, value, path):
    if isinstance(value, dict):
        _check_keys(loc, value, POSE_KEYS, path)
        if "position" not in value:
            _fail(loc, path, "pose table needs 'position'")
        pos = _vector(loc, value["position"], f"{path}.position", 2)
        return Pose(pos, _number(loc, value.get("orientation", 0.0), f"{path}.orientation"))
    return Pose(_vector(loc, value, path, 2))


def _build(loc, path, factory, *args, **kwargs):
    """Run a constructor, turning its validation errors into field-tagged ones."""
    try:
        return factory(*args, **kwargs)
    except (ValueError, TypeError, KeyError, AttemptError) as err:
        if isinstance(err, TaskFileError):
            raise
        message = err.args[0] if err.args else str(err)
        _fail(loc, path, str(message))


def _field_error_path(message, section, keys):
    """Pick the key named in a constructor's message, if any."""
    for key in sorted(keys, key=len, reverse=True):
        if re.search(rf"\b{re.escape(key)}\b", message):
            return f"{section}.{key}"
    return section


def _typed(loc, table, section, key, kind):
    path = f"{section}.{key}"
    value = table[key]
    if kind is bool:
        if not isinstance(value, bool):
            _fail(loc, path, f"expected true or false, got {value!r}")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            _fail(loc, path, f"expected an integer, got {value!r}")
        return value
    if kind is str:
        if not isinstance(value, str):
            _fail(loc, path, f"expected a string, got {value!r}")
        return value
    return _number(loc, value, path)


def _construct(loc, section, cls, table, kinds, rename=None):
    rename = rename or {}
    kwargs = {rename.get(k, k): _typed(loc, table, section, k, kinds[k]) for k in table}
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as err:
        message = str(err)
        _fail(loc, _field_error_path(message, section, table.keys()), message)


def _parse_chain(loc, table):
    if table is None:
        return default_chain()
    _check_keys(loc, table, SECTIONS["chain"], "chain")
    for key in ("base_mobile", "link_lengths", "joint_limits"):
        if key not in table:
            _fail(loc, "chain", f"missing required key {key!r}")
    base = _typed(loc, table, "chain", "base_mobile", bool)
    lengths = _vector(loc, table["link_lengths"], "chain.link_lengths")
    limits_raw = table["joint_limits"]
    if not isinstance(limits_raw, list):
        _fail(loc, "chain.joint_limits", "expected an array of [lower, upper] pairs")
    limits = [_vector(loc, p, f"chain.joint_limits[{i}]", 2) for i, p in enumerate(limits_raw)]
    body = table.get("body_points")
    if body is not None:
        if not isinstance(body, dict):
            _fail(loc, "chain.body_points", "expected a table mapping names to 'base' or joint indices")
        for name, where in body.items():
            if not (where == "base" or (isinstance(where, int) and not isinstance(where, bool))):
                _fail(loc, f"chain.body_points.{name}", f"expected 'base' or a joint index, got {where!r}")
    try:
        return KinematicChain(base, lengths, limits, body)
    except (ValueError, TypeError) as err:
        message = str(err)
        path = "chain.body_points" if "body point" in message else _field_error_path(message, "chain", table.keys())
        _fail(loc, path, message)


def _parse_obstacles(loc, items, collision, n_links):
    if items is None:
        items = []
    if not isinstance(items, list):
        _fail(loc, "obstacles", "expected [[obstacles]] entries")
    obstacles, ignore = [], set()
    for i, entry in enumerate(items):
        path = f"obstacles[{i}]"
        _check_keys(loc, entry, OBSTACLE_KEYS, path)
        if "name" not in entry or not isinstance(entry["name"], str) or not entry["name"]:
            _fail(loc, path, "every obstacle needs a non-empty string 'name'")
        shapes = [k for k in ("circle", "box") if k in entry]
        if len(shapes) != 1:
            _fail(loc, path, "give exactly one of 'circle' or 'box'")
        kind = shapes[0]
        params = entry[kind]
        _check_keys(loc, params, SHAPE_KEYS[kind], f"{path}.{kind}")
        missing = SHAPE_KEYS[kind] - set(params)
        if missing:
            _fail(loc, f"{path}.{kind}", f"missing {sorted(missing)[0]!r}")
        if kind == "circle":
            shape = _build(loc, f"{path}.circle", Circle,
                           _vector(loc, params["center"], f"{path}.circle.center", 2),
                           _number(loc, params["radius"], f"{path}.circle.radius"))
        else:
            shape = _build(loc, f"{path}.box", Box,
                           _vector(loc, params["min"], f"{path}.box.min", 2),
                           _vector(loc, params["max"], f"{path}.box.max", 2))
        obstacles.append(Obstacle(entry["name"], shape))
        links = entry.get("ignore_links", [])
        if not isinstance(links, list):
            _fail(loc, f"{path}.ignore_links", "expected an array of link indices")
        for link in links:
            if isinstance(link, bool) or not isinstance(link, int) or not 0 <= link < n_links:
                _fail(loc, f"{path}.ignore_links", f"link index must be an integer in 0..{n_links - 1}, got {link!r}")
            ignore.add((link, entry["name"]))
    clearance = 0.0
    if collision is not None:
        _check_keys(loc, collision, SECTIONS["collision"], "collision")
        if "link_clearance" in collision:
            clearance = _number(loc, collision["link_clearance"], "collision.link_clearance")
    if clearance < 0:
        _fail(loc, "collision.link_clearance", f"must be >= 0, got {clearance}")
    return _build(loc, "obstacles", CollisionModel, obstacles, clearance, frozenset(ignore))


def _parse_task(loc, table, chain, model):
    if table is None:
        _fail(loc, "task", "missing required section [task]")
    _check_keys(loc, table, SECTIONS["task"], "task")
    for key in ("q_s", "x_f", "x_d"):
        if key not in table:
            _fail(loc, "task", f"missing required key {key!r}")
    name = table.get("name", "task")
    if not isinstance(name, str) or not name:
        _fail(loc, "task.name", "expected a non-empty string")
    q_s = _vector(loc, table["q_s"], "task.q_s", chain.dof)
    q_d = _vector(loc, table["q_d"], "task.q_d", chain.dof) if "q_d" in table else None
    orient = _typed(loc, table, "task", "constrain_orientation", bool) if "constrain_orientation" in table else False
    task = Task(name, q_s, _pose(loc, table["x_f"], "task.x_f"), _pose(loc, table["x_d"], "task.x_d"), q_d, model, orient)
    for key, q in (("q_s", task.q_s), ("q_d", task.q_d)):
        if q is None:
            continue
        out = [i for i in range(chain.dof) if not chain.lower[i] <= q[i] <= chain.upper[i]]
        if out:
            i = out[0]
            _fail(loc, f"task.{key}", f"entry {i} = {q[i]:.6g} outside joint limits "
                  f"[{chain.lower[i]:.6g}, {chain.upper[i]:.6g}]")
    return task


def _parse_cost(loc, table):
    table = {} if table is None else table
    _check_keys(loc, table, SECTIONS["cost"], "cost")
    kind = table.get("kind", "cee")
    if kind not in COST_KINDS:
        _fail(loc, "cost.kind", f"must be one of {', '.join(COST_KINDS)}, got {kind!r}")
    metric_kind = table.get("metric", "proj")
    k = _typed(loc, table, "cost", "k", int) if "k" in table else 3
    metric = _build(loc, "cost.k" if metric_kind == "proj" and "k" in table else "cost.metric",
                    DistanceMetric, metric_kind, k)
    lam = _number(loc, table["lambda"], "cost.lambda") if "lambda" in table else None
    alpha = _number(loc, table["alpha"], "cost.alpha") if "alpha" in table else None
    body = table.get("body_points")
    if body is not None and (not isinstance(body, list) or not all(isinstance(b, str) for b in body)):
        _fail(loc, "cost.body_points", "expected an array of body-point names")
    kwargs = {"cost_kind": kind, "metric": metric, "body_points": None if body is None else tuple(body)}
    if lam is not None:
        kwargs["lam"] = lam
    if alpha is not None:
        kwargs["alpha"] = alpha
    try:
        return CostSpec(**kwargs)
    except (ValueError, TypeError) as err:
        message = str(err)
        path = "cost.body_points" if "body point" in message else _field_error_path(message, "cost", table.keys())
        _fail(loc, path, message)


_SOLVE_KINDS = {
    "T": int, "penalty_init": float, "penalty_growth": float, "outer_iterations": int,
    "max_inner_iterations": int, "gtol": float, "ftol": float, "constraint_tolerance": float,
    "collision_margin": float, "fixed_base_fk": bool, "inner_solver": str, "rng_seed": int,
}
_TIMING_KINDS = {
    "fast": float, "moderate": float, "slow": float, "attempt_speed": str, "rewind_speed": str,
    "approach_speed": str, "repetitions": int, "approach_steps": int,
}


def parse_task_text(text, source="<string>"):
    """Parse task-file text into a validated :class:`TaskBundle`.

    Raises
    ------
    TaskFileError
        On any syntax or validation problem; the message names the line and
        field when they are known.
    """
    if not isinstance(text, str):
        raise TaskFileError(f"{source}: expected text, got {type(text).__name__}")
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        m = re.search(r"line (\d+)", str(err))
        raise TaskFileError(f"syntax error: {err}", line=int(m.group(1)) if m else None) from None
    loc = _Locator(text)
    unknown = sorted(set(doc) - set(SECTIONS) - {"obstacles"})
    if unknown:
        _fail(loc, unknown[0], f"unknown section {unknown[0]!r}")

    chain = _parse_chain(loc, doc.get("chain"))
    model = _parse_obstacles(loc, doc.get("obstacles"), doc.get("collision"), chain.n_links)
    task = _parse_task(loc, doc.get("task"), chain, model)
    spec = _parse_cost(loc, doc.get("cost"))

    solve = doc.get("solve", {})
    _check_keys(loc, solve, SECTIONS["solve"], "solve")
    options = _construct(loc, "solve", SolveOptions, solve, _SOLVE_KINDS)
    timing = doc.get("timing", {})
    _check_keys(loc, timing, SECTIONS["timing"], "timing")
    timing = _construct(loc, "timing", TimingProfile, timing, _TIMING_KINDS)
    return TaskBundle(chain, task, spec, options, timing)


def parse_task_file(path):
    """Read and validate a task file; see :func:`parse_task_text`."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise TaskFileError(f"cannot read {path}: {err.strerror or err}") from None
    except UnicodeDecodeError as err:
        raise TaskFileError(f"{path} is not UTF-8 text: {err.reason}") from None
    return parse_task_text(text, source=str(path))


def bundled_task_text(name):
    """Source text of one of the :data:`BUNDLED_TASKS`."""
    if name not in BUNDLED_TASKS:
        raise TaskFileError(f"unknown bundled task {name!r} (available: {', '.join(BUNDLED_TASKS)})")
    return resources.files(__package__).joinpath("tasks", f"{name}.toml").read_text(encoding="utf-8")


def load_task(name_or_path):
    """Parse a task file, or a bundled task given by name (``lift``, ``lift.task`` ...)."""
    if os.path.exists(str(name_or_path)):
        return parse_task_file(name_or_path)
    stem = os.path.basename(str(name_or_path))
    for suffix in (".toml", ".task"):
        if stem.endswith(suffix):
            stem = stem[: -len(suffix)]
    if stem in BUNDLED_TASKS:
        return parse_task_text(bundled_task_text(stem), source=stem)
    return parse_task_file(name_or_path)


def task_to_dict(task):
    """Plain-data echo of a task and its obstacles."""
    out = {
        "name": task.name,
        "q_s": [float(v) for v in task.q_s],
        "x_f": {"position": [float(v) for v in task.x_f.position], "orientation": float(task.x_f.orientation)},
        "x_d": {"position": [float(v) for v in task.x_d.position], "orientation": float(task.x_d.orientation)},
        "q_d": None if task.q_d is None else [float(v) for v in task.q_d],
        "constrain_orientation": bool(task.constrain_orientation),
    }
    obstacles = []
    for obs in task.obstacles.obstacles:
        entry = {"name": obs.name}
        if isinstance(obs.shape, Circle):
            entry["circle"] = {"center": list(obs.shape.center), "radius": obs.shape.radius}
        else:
            entry["box"] = {"min": list(obs.shape.min_corner), "max": list(obs.shape.max_corner)}
        entry["ignore_links"] = sorted(i for i, n in task.obstacles.ignore_pairs if n == obs.name)
        obstacles.append(entry)
    out["obstacles"] = obstacles
    out["link_clearance"] = float(task.obstacles.link_clearance)
    return out


def task_from_dict(data):
    """Inverse of :func:`task_to_dict`."""
    obstacles, ignore = [], set()
    for entry in data.get("obstacles", []):
        if "circle" in entry:
            shape = Circle(entry["circle"]["center"], entry["circle"]["radius"])
        else:
            shape = Box(entry["box"]["min"], entry["box"]["max"])
        obstacles.append(Obstacle(entry["name"], shape))
        ignore.update((i, entry["name"]) for i in entry.get("ignore_links", []))
    model = CollisionModel(obstacles, data.get("link_clearance", 0.0), frozenset(ignore))
    x_f = Pose(data["x_f"]["position"], data["x_f"]["orientation"])
    x_d = Pose(data["x_d"]["position"], data["x_d"]["orientation"])
    return Task(data["name"], data["q_s"], x_f, x_d, data.get("q_d"),
                model, data.get("constrain_orientation", False))
