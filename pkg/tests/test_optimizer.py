import numpy as np
import pytest

from conftest import THREE_R
from expressive_attempt.costs import CostContext, CostSpec, DistanceMetric, similarity_cost, total_objective
from expressive_attempt.exceptions import UnreachableTargetError
from expressive_attempt.kinematics import KinematicChain, Pose, ik_solutions, joint_positions
from expressive_attempt.motion import Task
from expressive_attempt.optimizer import SolveOptions, desired_configuration, solve_attempt, solve_from_start
from expressive_attempt.taskfile import load_task


@pytest.fixture(scope="module")
def lift():
    return load_task("lift")


def test_degenerate_task_keeps_constant_trajectory():
    task = Task("still", (0.6, -1.0, 0.4), Pose((0.7, 0.2)), Pose((0.7, 0.2)))
    for metric in ("l2", "dot", "proj"):
        spec = CostSpec("cee", DistanceMetric(metric, 3), ("sh", "el"), 20.0, 0.3)
        result = solve_attempt(THREE_R, task, spec, SolveOptions(T=5))
        assert result.converged
        np.testing.assert_allclose(result.trajectory, np.tile(result.trajectory[0], (6, 1)), atol=1e-9)
        assert result.objective == pytest.approx(0.3, abs=1e-12)


def test_result_is_feasible_and_reports_its_objective(lift):
    result = solve_attempt(lift.chain, lift.task, lift.spec, lift.options)
    assert result.converged
    xi = result.trajectory
    assert xi.shape == (lift.options.T + 1, lift.chain.dof)
    ee = joint_positions(lift.chain, xi)[0][:, -1]
    assert np.max(np.linalg.norm(ee - lift.task.x_f.position, axis=1)) <= 1e-4
    assert result.constraint_residual <= 1e-4
    assert result.min_clearance >= -1e-6
    ctx = CostContext(lift.task.x_f, lift.task.x_d, None, lift.options.fixed_base_fk)
    assert result.objective == pytest.approx(total_objective(lift.spec, lift.chain, xi, ctx), rel=1e-12)
    assert np.all(xi >= lift.chain.lower) and np.all(xi <= lift.chain.upper)


def test_solve_is_deterministic(lift):
    a = solve_attempt(lift.chain, lift.task, lift.spec, lift.options)
    b = solve_attempt(lift.chain, lift.task, lift.spec, lift.options)
    assert a.trajectory.tobytes() == b.trajectory.tobytes()
    assert (a.objective, a.constraint_residual, a.seed_index) == (b.objective, b.constraint_residual, b.seed_index)


@pytest.mark.parametrize("solver", ["lbfgs", "gd"])
def test_inner_iterations_never_increase_penalized_objective(lift, solver):
    options = SolveOptions(T=4, inner_solver=solver, max_inner_iterations=100, outer_iterations=3)
    xi0 = ik_solutions(lift.chain, lift.task.x_f)[0]
    trace = []
    solve_from_start(lift.chain, lift.task, lift.spec, options, xi0, trace=trace)
    assert len(trace) == 3
    for history in trace:
        assert np.all(np.diff(history) <= 1e-12 * np.maximum(1.0, np.abs(history[:-1])))


def test_similarity_non_increasing_in_lambda(lift):
    sims = []
    for lam in (10.0, 20.0, 40.0, 80.0, 160.0):
        spec = CostSpec("cee", DistanceMetric("l2"), None, lam, 0.3)
        result = solve_attempt(lift.chain, lift.task, spec, lift.options)
        assert result.converged
        sims.append(result.similarity)
    assert np.all(np.diff(sims) <= 1e-6), sims


def test_desired_configuration_cases(two_link):
    task = Task("t", (0.0, 0.5), Pose((1.5, 0.5)), Pose((1.0, 1.0)), q_d=(0.2, 0.3))
    np.testing.assert_array_equal(desired_configuration(two_link, task, (0.0, 0.5)), (0.2, 0.3))

    edge = Task("t", (0.0, 0.5), Pose((1.5, 0.5)), Pose((2.0, 0.0)))
    np.testing.assert_allclose(desired_configuration(two_link, edge, (0.3, 0.5)), (0, 0), atol=1e-7)

    both = Task("t", (0.0, 0.5), Pose((1.5, 0.5)), Pose((1.0, 1.0)))
    branches = ik_solutions(two_link, both.x_d)
    for ref in ((0.0, 1.0), (1.5, -1.0), (0.8, 0.0)):
        dist = [float(np.sum((b - ref) ** 2)) for b in branches]
        np.testing.assert_array_equal(desired_configuration(two_link, both, ref), branches[int(np.argmin(dist))])


def test_unreachable_failure_pose_raises(two_link):
    task = Task("far", (0.0, 0.0), Pose((3.0, 0.0)), Pose((3.0, 1.0)))
    with pytest.raises(UnreachableTargetError, match="x_f"):
        solve_attempt(two_link, task, CostSpec("cee", body_points=("el",)))


def test_unreachable_desired_pose_raises_for_configuration_costs(two_link):
    task = Task("far", (0.0, 0.5), Pose((1.5, 0.5)), Pose((3.0, 0.0)))
    with pytest.raises(UnreachableTargetError, match="x_d"):
        solve_attempt(two_link, task, CostSpec("cq"), SolveOptions(T=3))


def test_two_link_attempt_cannot_move():
    # a fixed-base 2-link arm has no null space; the only feasible attempt is to stay put
    chain = KinematicChain(False, (1.0, 1.0), ((-np.pi, np.pi),) * 2)
    task = Task("rigid", (0.0, 0.5), Pose((1.5, 0.5)), Pose((1.5, 1.0)))
    result = solve_attempt(chain, task, CostSpec("cee", DistanceMetric("l2"), ("el",)), SolveOptions(T=3))
    assert result.converged
    np.testing.assert_allclose(result.trajectory - result.trajectory[0], 0, atol=1e-6)
    ctx = CostContext(task.x_f, task.x_d)
    assert result.similarity == pytest.approx(
        similarity_cost(CostSpec("cee", DistanceMetric("l2"), ("el",)), chain,
                        result.trajectory[0], result.trajectory[-1], ctx), rel=1e-12)


def test_solve_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(T=1)
    with pytest.raises(ValueError):
        SolveOptions(constraint_tolerance=0)
    with pytest.raises(ValueError):
        SolveOptions(inner_solver="newton")
    opts = SolveOptions()
    assert (opts.T, opts.penalty_init, opts.penalty_growth, opts.outer_iterations) == (10, 10.0, 10.0, 6)
    assert (opts.max_inner_iterations, opts.gtol, opts.constraint_tolerance) == (500, 1e-6, 1e-4)
    assert (opts.collision_margin, opts.rng_seed) == (0.0, 0)
