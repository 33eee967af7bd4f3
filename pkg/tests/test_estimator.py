import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from expressive_attempt.estimator import DEFAULT_ALPHAS, DEFAULT_LAMBDAS, AttemptOptimizer, grid_search
from expressive_attempt.optimizer import SolveOptions, solve_attempt
from expressive_attempt.taskfile import load_task

FAST = SolveOptions(T=5)


@pytest.fixture(scope="module")
def lift():
    return load_task("lift")


def test_default_grids():
    assert DEFAULT_LAMBDAS == (10, 20, 40, 80, 160)
    assert DEFAULT_ALPHAS == (0, 0.3, 0.6, 1.0, 2.0)


def test_estimator_defaults_and_params(lift):
    est = AttemptOptimizer(lift.chain)
    params = est.get_params()
    assert (params["k"], params["lam"], params["alpha"], params["metric"]) == (3, 20.0, 0.3, "proj")
    other = clone(est).set_params(lam=40.0)
    assert other.lam == 40.0 and est.lam == 20.0
    with pytest.raises(NotFittedError):
        est.score()


def test_fit_matches_direct_solve(lift):
    est = AttemptOptimizer(lift.chain, "cee", "l2", options=FAST).fit(lift.task)
    direct = solve_attempt(lift.chain, lift.task, est.cost_spec(), FAST)
    np.testing.assert_array_equal(est.trajectory_, direct.trajectory)
    assert est.score() == -direct.objective
    assert est.converged_
    assert est.similarity(lift.task) == pytest.approx(direct.similarity, rel=1e-12)


def test_fit_rejects_bad_inputs(lift):
    with pytest.raises(TypeError):
        AttemptOptimizer(None).fit(lift.task)
    with pytest.raises(TypeError):
        AttemptOptimizer(lift.chain).fit("lift")


def test_singleton_grid_is_one_solve(lift):
    best, result, rows = grid_search(lift.chain, lift.task, "cee", "l2", 3, [40.0], [0.6], FAST)
    assert best == {"lam": 40.0, "alpha": 0.6}
    assert len(rows) == 1 and rows[0]["rank"] == 1
    direct = AttemptOptimizer(lift.chain, "cee", "l2", lam=40.0, alpha=0.6, options=FAST).fit(lift.task)
    np.testing.assert_array_equal(result.trajectory, direct.trajectory_)


def test_grid_ranking_is_deterministic(lift):
    a = grid_search(lift.chain, lift.task, "cee", "dot", 3, [10.0, 40.0], [0.0, 1.0], FAST)[2]
    b = grid_search(lift.chain, lift.task, "cee", "dot", 3, [10.0, 40.0], [0.0, 1.0], FAST)[2]
    assert a == b
    assert [r["rank"] for r in a] == [1, 2, 3, 4]
    keys = [(not r["converged"], r["objective"], r["lam"], r["alpha"]) for r in a]
    assert keys == sorted(keys)
    # alpha is an additive constant, so the smallest alpha always wins
    assert a[0]["alpha"] == 0.0


def test_empty_grid_rejected(lift):
    with pytest.raises(ValueError):
        grid_search(lift.chain, lift.task, lambdas=[], options=FAST)
