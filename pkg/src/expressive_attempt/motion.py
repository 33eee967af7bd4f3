"""Tasks and the timed composition of attempt motions.

An expressive plan approaches the failure configuration, then runs the
optimized attempt and its exact reverse ``N`` times. The repeated-failure
baseline instead rewinds and replays the last ``T`` steps of the approach.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .collision import CollisionModel, is_collision_free
from .exceptions import ApproachCollisionError
from .kinematics import Pose, check_configuration

SPEED_LEVELS = ("fast", "moderate", "slow")
PHASE_LABELS = ("approach", "attempt", "rewind")


@dataclass(frozen=True, eq=False)
class Task:
    """An incompletable task: start, failure pose, desired pose and obstacles."""

    name: str
    q_s: np.ndarray
    x_f: Pose
    x_d: Pose
    q_d: np.ndarray = None
    obstacles: CollisionModel = field(default_factory=CollisionModel)
    constrain_orientation: bool = False

    def __post_init__(self):
        object.__setattr__(self, "q_s", np.array(self.q_s, dtype=float))
        if self.q_d is not None:
            object.__setattr__(self, "q_d", np.array(self.q_d, dtype=float))
        for name in ("x_f", "x_d"):
            v = getattr(self, name)
            if not isinstance(v, Pose):
                object.__setattr__(self, name, Pose(v))
        if self.obstacles is None:
            object.__setattr__(self, "obstacles", CollisionModel())

    def validate(self, chain):
        """Check the task against ``chain``; returns ``self``."""
        check_configuration(chain, self.q_s, limits=True, name="q_s")
        if self.q_d is not None:
            check_configuration(chain, self.q_d, limits=True, name="q_d")
        n = chain.n_links
        bad = [i for i, _ in self.obstacles.ignore_pairs if not 0 <= i < n]
        if bad:
            raise ValueError(f"ignore_pairs reference links {sorted(bad)} outside 0..{n - 1}")
        return self


@dataclass(frozen=True)
class TimingProfile:
    """Seconds per waypoint transition for each speed level, and which level each phase uses."""

    fast: float = 0.05
    moderate: float = 0.10
    slow: float = 0.20
    attempt_speed: str = "fast"
    rewind_speed: str = "moderate"
    approach_speed: str = "moderate"
    repetitions: int = 3
    approach_steps: int = 20

    def __post_init__(self):
        if not 0 < self.fast < self.moderate < self.slow:
            raise ValueError(
                f"speed durations must satisfy 0 < fast < moderate < slow, got "
                f"({self.fast}, {self.moderate}, {self.slow})"
            )
        for name in ("attempt_speed", "rewind_speed", "approach_speed"):
            if getattr(self, name) not in SPEED_LEVELS:
                raise ValueError(f"{name} must be one of {SPEED_LEVELS}, got {getattr(self, name)!r}")
        for name in ("repetitions", "approach_steps"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")

    def duration(self, level):
        return getattr(self, level)

    def to_dict(self):
        return {
            "fast": self.fast,
            "moderate": self.moderate,
            "slow": self.slow,
            "attempt_speed": self.attempt_speed,
            "rewind_speed": self.rewind_speed,
            "approach_speed": self.approach_speed,
            "repetitions": self.repetitions,
            "approach_steps": self.approach_steps,
        }


@dataclass(frozen=True, eq=False)
class Phase:
    label: str
    waypoints: np.ndarray
    step_duration: float

    def __post_init__(self):
        if self.label not in PHASE_LABELS:
            raise ValueError(f"phase label must be one of {PHASE_LABELS}, got {self.label!r}")
        w = np.array(self.waypoints, dtype=float)
        if w.ndim != 2 or len(w) < 2:
            raise ValueError("a phase needs at least two waypoints")
        w.setflags(write=False)
        object.__setattr__(self, "waypoints", w)

    @property
    def duration(self):
        return (len(self.waypoints) - 1) * self.step_duration


@dataclass(frozen=True, eq=False)
class MotionPlan:
    phases: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        if not self.phases:
            raise ValueError("a plan needs at least one phase")
        for a, b in zip(self.phases, self.phases[1:]):
            if not np.array_equal(a.waypoints[-1], b.waypoints[0]):
                raise ValueError(f"phase {a.label!r} does not end where {b.label!r} starts")

    @property
    def total_duration(self):
        return sum(p.duration for p in self.phases)

    @property
    def start(self):
        return self.phases[0].waypoints[0]

    @property
    def end(self):
        return self.phases[-1].waypoints[-1]

    def labels(self):
        return [p.label for p in self.phases]

    def with_metadata(self, **extra):
        """Copy of the plan with ``extra`` merged into its metadata."""
        return MotionPlan(self.phases, {**self.metadata, **extra})


def approach_path(q_s, xi0, steps):
    """Straight joint-space line from ``q_s`` to ``xi0`` with ``steps`` transitions."""
    return np.linspace(np.asarray(q_s, float), np.asarray(xi0, float), int(steps) + 1)


def _checked_approach(chain, task, xi0, steps):
    path = approach_path(task.q_s, xi0, steps)
    ok, index, dist = is_collision_free(task.obstacles, chain, path, 0.0)
    if not ok:
        raise ApproachCollisionError(index, dist)
    return path


def _require_converged(solve_result):
    if not solve_result.converged:
        raise ValueError("cannot compose a motion from a non-converged solve result")


def compose_expressive(chain, task, solve_result, timing=None, approach_steps=None):
    """Approach, then ``N`` rounds of attempt (e.g. Fast) and exact rewind (e.g. Moderate)."""
    _require_converged(solve_result)
    timing = timing or TimingProfile()
    steps = timing.approach_steps if approach_steps is None else approach_steps
    xi = np.asarray(solve_result.trajectory, dtype=float)
    phases = [Phase("approach", _checked_approach(chain, task, xi[0], steps), timing.duration(timing.approach_speed))]
    for _ in range(timing.repetitions):
        phases.append(Phase("attempt", xi, timing.duration(timing.attempt_speed)))
        phases.append(Phase("rewind", xi[::-1], timing.duration(timing.rewind_speed)))
    return MotionPlan(phases, {"kind": "expressive", "task": task.name})


def compose_baseline(chain, task, solve_result, timing=None, approach_steps=None, rewind_steps=None):
    """Repeated-failure motion: approach, then ``N`` rounds of rewinding the last
    ``rewind_steps`` approach steps (rewind speed) and replaying them (attempt speed).

    ``rewind_steps`` defaults to the attempt's ``T``.
    """
    _require_converged(solve_result)
    timing = timing or TimingProfile()
    steps = timing.approach_steps if approach_steps is None else approach_steps
    xi = np.asarray(solve_result.trajectory, dtype=float)
    back = len(xi) - 1 if rewind_steps is None else int(rewind_steps)
    if back < 1 or steps < back:
        raise ValueError(f"approach has {steps} steps, fewer than the {back} steps to rewind")
    path = _checked_approach(chain, task, xi[0], steps)
    segment = path[-(back + 1):]
    phases = [Phase("approach", path, timing.duration(timing.approach_speed))]
    for _ in range(timing.repetitions):
        phases.append(Phase("rewind", segment[::-1], timing.duration(timing.rewind_speed)))
        phases.append(Phase("attempt", segment, timing.duration(timing.attempt_speed)))
    return MotionPlan(phases, {"kind": "baseline", "task": task.name})


def sample_times(plan, dt):
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    total = plan.total_duration
    n = int(np.floor(total / dt + 1e-9))
    times = [i * dt for i in range(n + 1)]
    if total - times[-1] > 1e-9 * max(1.0, total):
        times.append(total)
    elif n > 0:
        times[-1] = total
    return times


def sample_plan_labeled(plan, dt):
    """``(times, labels, configurations)`` sampled every ``dt`` seconds.

    Sampling is piecewise linear in joint space; the last sample is always the
    plan's final waypoint (appended if ``dt`` does not divide the duration).
    """
    times = sample_times(plan, dt)
    starts = np.cumsum([0.0] + [p.duration for p in plan.phases])
    labels, configs = [], []
    last = len(plan.phases) - 1
    for tau in times:
        k = int(np.searchsorted(starts, tau, side="right")) - 1
        k = min(max(k, 0), last)
        phase = plan.phases[k]
        u = (tau - starts[k]) / phase.step_duration
        n = len(phase.waypoints) - 1
        if u >= n:
            q = phase.waypoints[-1].copy()
        else:
            i = int(np.floor(u))
            frac = u - i
            q = (1 - frac) * phase.waypoints[i] + frac * phase.waypoints[i + 1]
        labels.append(phase.label)
        configs.append(q)
    configs[-1] = plan.end.copy()
    return np.array(times), labels, np.array(configs)


def sample_plan(plan, dt):
    """List of ``(time, configuration)`` pairs every ``dt`` seconds."""
    times, _, configs = sample_plan_labeled(plan, dt)
    return list(zip(times.tolist(), configs))
