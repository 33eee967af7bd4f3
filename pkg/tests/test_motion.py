import numpy as np
import pytest

from conftest import THREE_R as CHAIN, ee_fixed_attempt
from expressive_attempt.collision import Circle, CollisionModel, Obstacle
from expressive_attempt.exceptions import ApproachCollisionError
from expressive_attempt.kinematics import Pose, joint_positions
from expressive_attempt.motion import (
    MotionPlan,
    Phase,
    Task,
    TimingProfile,
    compose_baseline,
    compose_expressive,
    sample_plan,
    sample_plan_labeled,
)
from expressive_attempt.optimizer import SolveResult



@pytest.fixture
def setup():
    xi = ee_fixed_attempt()
    task = Task("demo", (1.0, -1.0, 0.0), Pose((0.7, 0.2)), Pose((0.7, 0.5)))
    result = SolveResult(xi, 0.0, 0.0, 0, True)
    return task, result


def test_expressive_structure(setup):
    task, result = setup
    plan = compose_expressive(CHAIN, task, result)
    assert plan.labels() == ["approach"] + ["attempt", "rewind"] * 3
    np.testing.assert_array_equal(plan.start, task.q_s)
    attempts = [p for p in plan.phases if p.label == "attempt"]
    rewinds = [p for p in plan.phases if p.label == "rewind"]
    for a, r in zip(attempts, rewinds):
        np.testing.assert_array_equal(a.waypoints, result.trajectory)
        np.testing.assert_array_equal(r.waypoints, a.waypoints[::-1])
        assert a.duration < r.duration
    for a, b in zip(plan.phases, plan.phases[1:]):
        np.testing.assert_array_equal(a.waypoints[-1], b.waypoints[0])
    assert len(plan.phases[0].waypoints) == 21


def test_single_repetition_has_three_phases(setup):
    task, result = setup
    plan = compose_expressive(CHAIN, task, result, TimingProfile(repetitions=1))
    assert plan.labels() == ["approach", "attempt", "rewind"]


def test_total_duration_is_sum_of_phase_durations(setup):
    task, result = setup
    plan = compose_expressive(CHAIN, task, result)
    expected = 20 * 0.10 + 3 * (10 * 0.05 + 10 * 0.10)
    assert plan.total_duration == sum((len(p.waypoints) - 1) * p.step_duration for p in plan.phases)
    assert plan.total_duration == pytest.approx(expected, abs=1e-12)


def test_baseline_construction(setup):
    task, result = setup
    plan = compose_expressive(CHAIN, task, result)
    base = compose_baseline(CHAIN, task, result)
    assert base.labels() == ["approach"] + ["rewind", "attempt"] * 3
    np.testing.assert_array_equal(base.phases[0].waypoints, plan.phases[0].waypoints)
    tail = plan.phases[0].waypoints[-11:]
    for p in base.phases[1:]:
        expected = tail[::-1] if p.label == "rewind" else tail
        np.testing.assert_array_equal(p.waypoints, expected)
    speeds = {p.label: p.step_duration for p in plan.phases[1:]}
    assert {p.label: p.step_duration for p in base.phases[1:]} == speeds


def test_baseline_full_rewind_returns_to_start(setup):
    task, result = setup
    base = compose_baseline(CHAIN, task, result, rewind_steps=20)
    for p in base.phases[1:]:
        if p.label == "rewind":
            np.testing.assert_array_equal(p.waypoints[-1], task.q_s)


def test_baseline_rejects_short_approach(setup):
    task, result = setup
    with pytest.raises(ValueError, match="fewer"):
        compose_baseline(CHAIN, task, result, approach_steps=5)


def test_colliding_approach_reports_index(setup):
    task, result = setup
    mid = 0.5 * (task.q_s + result.trajectory[0])
    blocker = joint_positions(CHAIN, mid)[0][2]
    blocked = Task("blocked", task.q_s, task.x_f, task.x_d,
                   obstacles=CollisionModel((Obstacle("rock", Circle(tuple(blocker), 0.02)),)))
    with pytest.raises(ApproachCollisionError) as err:
        compose_expressive(CHAIN, blocked, result)
    assert 0 < err.value.index < 20


def test_constant_attempt_keeps_full_dwell():
    q = np.array([0.6, -1.0, 0.4])
    result = SolveResult(np.tile(q, (11, 1)), 0.3, 0.0, 0, True)
    task = Task("still", (0.7, -1.0, 0.4), Pose((0.7, 0.2)), Pose((0.7, 0.2)))
    plan = compose_expressive(CHAIN, task, result)
    for p in plan.phases[1:]:
        assert np.ptp(p.waypoints, axis=0).max() == 0
        assert p.duration == pytest.approx(10 * (0.05 if p.label == "attempt" else 0.10))


def test_timing_invariants():
    with pytest.raises(ValueError):
        TimingProfile(fast=0.2, moderate=0.1)
    with pytest.raises(ValueError):
        TimingProfile(repetitions=0)
    t = TimingProfile()
    assert (t.fast, t.moderate, t.slow) == (0.05, 0.10, 0.20)
    assert (t.attempt_speed, t.rewind_speed, t.approach_speed, t.repetitions) == ("fast", "moderate", "moderate", 3)
    assert t.approach_steps == 20


def test_plan_rejects_broken_chaining():
    a = Phase("attempt", [[0.0], [1.0]], 0.1)
    b = Phase("rewind", [[0.5], [0.0]], 0.1)
    with pytest.raises(ValueError, match="does not end"):
        MotionPlan([a, b])


def test_sampling_endpoints_and_counts(setup):
    task, result = setup
    plan = compose_expressive(CHAIN, task, result)
    samples = sample_plan(plan, plan.total_duration)
    assert len(samples) == 2
    np.testing.assert_array_equal(samples[0][1], task.q_s)
    np.testing.assert_array_equal(samples[-1][1], plan.end)
    for dt in (0.02, 0.05, 0.07):
        n1, n2 = len(sample_plan(plan, dt)), len(sample_plan(plan, dt / 2))
        assert abs(n2 - 2 * n1) <= 1
    times = [t for t, _ in sample_plan(plan, 0.03)]
    assert np.all(np.diff(times) > 0)
    with pytest.raises(ValueError):
        sample_plan(plan, 0.0)


def test_sampled_attempt_stays_near_failure_point(setup):
    task, result = setup
    plan = compose_expressive(CHAIN, task, result)
    _, labels, Q = sample_plan_labeled(plan, 0.01)
    ee = joint_positions(CHAIN, Q)[0][:, -1]
    mask = np.array([lab != "approach" for lab in labels])
    step = np.max(np.abs(np.diff(result.trajectory, axis=0)))
    slack = 1e-4 + step * sum(CHAIN.link_lengths)
    assert np.max(np.linalg.norm(ee[mask] - task.x_f.position, axis=1)) <= slack
