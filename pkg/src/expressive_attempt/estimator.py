"""Estimator-style wrapper around the attempt solver and the (lambda, alpha) grid search."""

from __future__ import annotations

from sklearn.base import BaseEstimator, clone
from sklearn.model_selection import ParameterGrid
from sklearn.utils.validation import check_is_fitted

from .costs import CostContext, CostSpec, DistanceMetric, similarity_cost
from .kinematics import KinematicChain
from .motion import Task
from .optimizer import SolveOptions, solve_attempt

DEFAULT_LAMBDAS = (10.0, 20.0, 40.0, 80.0, 160.0)
DEFAULT_ALPHAS = (0.0, 0.3, 0.6, 1.0, 2.0)


class AttemptOptimizer(BaseEstimator):
    """Finds the expressive attempt trajectory for a task.

    Hyperparameters mirror :class:`~expressive_attempt.costs.CostSpec`;
    ``fit(task)`` runs the multi-start solve and stores ``result_``.

    Examples
    --------
    >>> est = AttemptOptimizer(chain, cost_kind="cee", metric="proj", k=3)
    >>> est.fit(task).trajectory_.shape
    (11, 5)
    """

    def __init__(self, chain=None, cost_kind="cee", metric="proj", k=3, lam=20.0, alpha=0.3,
                 body_points=None, options=None):
        self.chain = chain
        self.cost_kind = cost_kind
        self.metric = metric
        self.k = k
        self.lam = lam
        self.alpha = alpha
        self.body_points = body_points
        self.options = options

    def cost_spec(self):
        return CostSpec(self.cost_kind, DistanceMetric(self.metric, self.k), self.body_points, self.lam, self.alpha)

    def _validate(self, task):
        if not isinstance(self.chain, KinematicChain):
            raise TypeError(f"chain must be a KinematicChain, got {type(self.chain).__name__}")
        if not isinstance(task, Task):
            raise TypeError(f"fit expects a Task, got {type(task).__name__}")
        if self.options is not None and not isinstance(self.options, SolveOptions):
            raise TypeError("options must be a SolveOptions or None")
        task.validate(self.chain)
        return self.cost_spec(), self.options or SolveOptions()

    def fit(self, task, y=None):
        spec, options = self._validate(task)
        self.spec_ = spec
        self.result_ = solve_attempt(self.chain, task, spec, options)
        self.trajectory_ = self.result_.trajectory
        self.objective_ = self.result_.objective
        self.converged_ = self.result_.converged
        return self

    def score(self, task=None, y=None):
        """Negated objective of the fitted solve (higher is better)."""
        check_is_fitted(self, "result_")
        return -self.result_.objective

    def similarity(self, task):
        """Unbiased similarity cost of the fitted trajectory on ``task``."""
        check_is_fitted(self, "result_")
        options = self.options or SolveOptions()
        ctx = CostContext(task.x_f, task.x_d, self.result_.q_d, options.fixed_base_fk)
        xi = self.result_.trajectory
        return similarity_cost(self.spec_, self.chain, xi[0], xi[-1], ctx)


def _rank_key(row):
    return (not row["converged"], row["objective"], row["lam"], row["alpha"])


def grid_search(chain, task, cost_kind="cee", metric="proj", k=3, lambdas=DEFAULT_LAMBDAS,
                alphas=DEFAULT_ALPHAS, options=None, body_points=None):
    """Solve every (lambda, alpha) pair and pick the best.

    Cells are ranked by lowest objective among converged ones, ties going to
    the smaller lambda, then the smaller alpha. Returns
    ``(best_params, best_result, table)`` where ``table`` lists one dict per
    cell in rank order.
    """
    lambdas, alphas = list(lambdas), list(alphas)
    if not lambdas or not alphas:
        raise ValueError("lambda and alpha grids must be non-empty")
    base = AttemptOptimizer(chain, cost_kind, metric, k, body_points=body_points, options=options)
    rows, results = [], {}
    for params in ParameterGrid({"lam": lambdas, "alpha": alphas}):
        est = clone(base).set_params(**params).fit(task)
        r = est.result_
        key = (float(params["lam"]), float(params["alpha"]))
        results[key] = r
        rows.append({
            "lam": key[0],
            "alpha": key[1],
            "objective": float(r.objective),
            "similarity": float(r.similarity),
            "constraint_residual": float(r.constraint_residual),
            "min_clearance": float(r.min_clearance),
            "seed_index": int(r.seed_index),
            "converged": bool(r.converged),
        })
    rows.sort(key=_rank_key)
    for rank, row in enumerate(rows, 1):
        row["rank"] = rank
    best = rows[0]
    return {"lam": best["lam"], "alpha": best["alpha"]}, results[(best["lam"], best["alpha"])], rows
