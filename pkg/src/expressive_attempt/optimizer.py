"""Attempt-trajectory optimization.

Minimizes ``c(xi) + alpha + smoothness(xi) / lambda`` over waypoints
``xi_1..xi_T`` while the end-effector stays at the failure pose and the links
stay clear of obstacles. Constraints are handled by a quadratic penalty whose
weight ramps up over a few outer iterations; the inner problem is solved by
projected gradient descent (joint-limit clamping) with a backtracking line
search. Every waypoint is finally projected back onto the end-effector
constraint with damped least squares. One solve is run per IK solution at the
failure pose and the best feasible one wins.
"""

from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from scipy.optimize import minimize

from .collision import NO_OBSTACLE_DISTANCE, CollisionModel, pair_terms, signed_distances
from .costs import CostContext, DistanceMetric, similarity_cost, similarity_cost_and_gradient, total_objective
from .exceptions import UnreachableTargetError
from .kinematics import (
    Pose,
    check_configuration,
    closest_ik,
    dls_solve,
    ik_solutions,
    joint_jacobians,
    joint_positions,
    normalize_angle,
)

logger = logging.getLogger(__name__)

ARMIJO_C = 1e-4
MIN_STEP = 1e-20
FEASIBILITY_SLACK = 1e-6
# penalized clearance target sits this far above the margin so the penalty
# optimum (which undershoots by O(1 / weight)) still clears it
COLLISION_BUFFER = 1e-5


@dataclass(frozen=True)
class SolveOptions:
    """Knobs of the penalty solver.

    ``T`` is the number of waypoint transitions, so trajectories hold ``T + 1``
    configurations. ``fixed_base_fk`` evaluates costs of non-base body points as
    if the base had not moved. ``ftol`` stops an inner loop once the relative
    objective decrease of an accepted step falls below it.
    """

    T: int = 10
    penalty_init: float = 10.0
    penalty_growth: float = 10.0
    outer_iterations: int = 6
    max_inner_iterations: int = 500
    gtol: float = 1e-6
    ftol: float = 1e-10
    constraint_tolerance: float = 1e-4
    collision_margin: float = 0.0
    fixed_base_fk: bool = True
    inner_solver: str = "lbfgs"
    rng_seed: int = 0

    def __post_init__(self):
        if isinstance(self.T, bool) or int(self.T) != self.T or self.T < 2:
            raise ValueError(f"T must be an integer >= 2, got {self.T!r}")
        for name in ("penalty_init", "gtol", "constraint_tolerance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not self.ftol >= 0:
            raise ValueError(f"ftol must be >= 0, got {self.ftol}")
        if not self.penalty_growth > 1:
            raise ValueError(f"penalty_growth must be > 1, got {self.penalty_growth}")
        for name in ("outer_iterations", "max_inner_iterations"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.collision_margin >= 0:
            raise ValueError(f"collision_margin must be >= 0, got {self.collision_margin}")
        if self.inner_solver not in ("gd", "lbfgs"):
            raise ValueError(f"inner_solver must be 'gd' or 'lbfgs', got {self.inner_solver!r}")
        object.__setattr__(self, "T", int(self.T))

    def to_dict(self):
        return {
            "T": self.T,
            "penalty_init": self.penalty_init,
            "penalty_growth": self.penalty_growth,
            "outer_iterations": self.outer_iterations,
            "max_inner_iterations": self.max_inner_iterations,
            "gtol": self.gtol,
            "ftol": self.ftol,
            "constraint_tolerance": self.constraint_tolerance,
            "collision_margin": self.collision_margin,
            "fixed_base_fk": self.fixed_base_fk,
            "inner_solver": self.inner_solver,
            "rng_seed": self.rng_seed,
        }


@dataclass(frozen=True, eq=False)
class SolveResult:
    trajectory: np.ndarray
    objective: float
    constraint_residual: float
    seed_index: int
    converged: bool
    similarity: float = float("nan")
    min_clearance: float = NO_OBSTACLE_DISTANCE
    q_d: np.ndarray = None
    seed_objectives: tuple = field(default=())

    @property
    def T(self):
        return len(self.trajectory) - 1


# small bounded memo for IK calls shared across grid cells
_CACHE = OrderedDict()
_CACHE_SIZE = 512


def _memo(key, fn):
    try:
        return _CACHE[key]
    except KeyError:
        pass
    value = fn()
    _CACHE[key] = value
    if len(_CACHE) > _CACHE_SIZE:
        _CACHE.popitem(last=False)
    return value


def _chain_key(chain):
    d = chain.to_dict()
    return (d["base_mobile"], tuple(d["link_lengths"]), tuple(map(tuple, d["joint_limits"])),
            tuple(sorted(d["body_points"].items())))


def _pose_key(p):
    return (tuple(p.position.tolist()), p.orientation)


def attempt_starts(chain, task):
    """IK solutions at the failure pose; each is a candidate ``xi_0``."""
    key = ("xf", _chain_key(chain), _pose_key(task.x_f), bool(task.constrain_orientation))
    sols = _memo(key, lambda: ik_solutions(chain, task.x_f, task.constrain_orientation))
    return [s.copy() for s in sols]


def desired_configuration(chain, task, xi0):
    """``q_d`` supplied by the task, else the IK solution at ``x_d`` closest to ``xi0``."""
    if task.q_d is not None:
        return np.array(task.q_d, dtype=float)
    xi0 = check_configuration(chain, xi0, name="xi0")
    key = ("xd", _chain_key(chain), _pose_key(task.x_d), bool(task.constrain_orientation), tuple(xi0.tolist()))
    try:
        return _memo(key, lambda: closest_ik(chain, task.x_d, xi0, task.constrain_orientation)).copy()
    except UnreachableTargetError as err:
        raise UnreachableTargetError(task.x_d, what="desired pose x_d") from err


class _PenaltyProblem:
    """Penalized objective over the free waypoints ``xi_1..xi_T`` (flattened)."""

    def __init__(self, chain, task, spec, options, xi0, context):
        self.chain = chain
        self.spec = spec
        self.xi0 = xi0
        self.context = context
        self.T = options.T
        self.dof = chain.dof
        self.target = task.x_f.position
        self.orient = task.constrain_orientation
        self.target_angle = task.x_f.orientation
        self.model = task.obstacles if task.obstacles is not None else CollisionModel()
        self.has_obstacles = bool(self.model.obstacles)
        self.margin = options.collision_margin + COLLISION_BUFFER
        self.lower = np.tile(chain.lower, self.T)
        self.upper = np.tile(chain.upper, self.T)
        self.mu = options.penalty_init

    def waypoints(self, x):
        return np.vstack([self.xi0, x.reshape(self.T, self.dof)])

    def _constraint_terms(self, W, with_grad):
        pts, theta = joint_positions(self.chain, W)
        r = pts[:, -1, :] - self.target
        if self.orient:
            r = np.concatenate([r, normalize_angle(theta[:, -1] - self.target_angle)[:, None]], axis=1)
        penalty = float(np.sum(r * r))
        grad = None
        if with_grad:
            Jj = joint_jacobians(self.chain, W, points=pts)
            J = Jj[:, -1]
            if self.orient:
                rows = np.zeros((len(W), 1, self.dof))
                rows[:, 0, self.chain.n_base:] = 1.0
                J = np.concatenate([J, rows], axis=1)
            grad = 2.0 * np.einsum("tij,ti->tj", J, r)
        if self.has_obstacles:
            d, dA, dB, labels = pair_terms(self.model, pts)
            k = np.argmin(d, axis=1)
            rows = np.arange(len(W))
            h = np.maximum(0.0, self.margin - d[rows, k])
            penalty += float(np.sum(h * h))
            active = np.flatnonzero(h > 0)
            if with_grad and active.size:
                links = np.array([lab[0] for lab in labels])[k[active]]
                ka = k[active]
                # d(h^2)/dq = -2 h (dA^T J_link + dB^T J_link+1)
                dsd = (np.einsum("ti,tij->tj", dA[active, ka], Jj[active, links])
                       + np.einsum("ti,tij->tj", dB[active, ka], Jj[active, links + 1]))
                grad[active] += -2.0 * h[active, None] * dsd
        return penalty, grad

    def parts(self, x):
        """``(similarity, smoothness, penalty)`` at ``x``."""
        xi = self.waypoints(x)
        c = similarity_cost(self.spec, self.chain, self.xi0, xi[-1], self.context)
        steps = np.diff(xi, axis=0)
        penalty, _ = self._constraint_terms(xi[1:], False)
        return c, float(np.sum(steps * steps)), penalty

    def value(self, x):
        c, smooth, penalty = self.parts(x)
        return c + self.spec.alpha + smooth / self.spec.lam + self.mu * penalty

    def value_and_grad(self, x, metric=None):
        xi = self.waypoints(x)
        c, gc = similarity_cost_and_gradient(self.spec, self.chain, self.xi0, xi[-1], self.context, metric)
        steps = np.diff(xi, axis=0)
        penalty, pgrad = self._constraint_terms(xi[1:], True)
        f = c + self.spec.alpha + float(np.sum(steps * steps)) / self.spec.lam + self.mu * penalty

        g = self.mu * pgrad
        g[-1] += gc
        g += 2.0 * steps / self.spec.lam
        g[:-1] -= 2.0 * steps[1:] / self.spec.lam
        return f, g.reshape(-1)

    def gradient(self, x, metric=None):
        return self.value_and_grad(x, metric)[1]

    def clip(self, x):
        return np.clip(x, self.lower, self.upper)


def _kick(problem, x, f, options):
    """Leave the constant start when proj has no gradient there.

    At zero displacement proj is not differentiable, but its steepest-descent
    direction coincides with the dot metric's, so one decreasing step is taken
    along the dot-metric gradient.
    """
    _, gk = problem.value_and_grad(x, metric=DistanceMetric("dot"))
    if not np.any(gk):
        return x, f
    t = 1e-3 / np.max(np.abs(gk))
    while t > MIN_STEP:
        x_new = problem.clip(x - t * gk)
        f_new = problem.value(x_new)
        if f_new < f:
            return x_new, f_new
        t *= 0.5
    return x, f


def _gradient_descent(problem, x, options):
    """Projected gradient descent with Barzilai-Borwein trial steps and Armijo backtracking."""
    f, g = problem.value_and_grad(x)
    history = [f]
    gmax = np.max(np.abs(g)) if g.size else 0.0
    t = 0.1 / gmax if gmax > 0 else 1.0
    for _ in range(options.max_inner_iterations):
        if np.linalg.norm(x - problem.clip(x - g)) <= options.gtol:
            break
        step = t
        while True:
            x_new = problem.clip(x - step * g)
            f_new = problem.value(x_new)
            if f_new <= f - ARMIJO_C * (g @ (x - x_new)):
                break
            step *= 0.5
            if step < MIN_STEP:
                return x, history
        f_new, g_new = problem.value_and_grad(x_new)
        s = x_new - x
        sy = s @ (g_new - g)
        t = (s @ s) / sy if sy > 0 else 2.0 * step
        decrease = f - f_new
        x, f, g = x_new, f_new, g_new
        history.append(f)
        if decrease <= options.ftol * max(1.0, abs(f)):
            break
    return x, history


def _lbfgs(problem, x, options):
    """Bound-constrained L-BFGS on the penalized objective."""
    history = [problem.value(x)]
    res = minimize(
        problem.value_and_grad, x, jac=True, method="L-BFGS-B",
        bounds=list(zip(problem.lower, problem.upper)),
        callback=lambda intermediate_result: history.append(float(intermediate_result.fun)),
        options={"maxiter": options.max_inner_iterations, "gtol": options.gtol, "ftol": options.ftol},
    )
    x_new = problem.clip(res.x)
    # keep the start point if the solver returned something worse
    if problem.value(x_new) > history[0]:
        return x, history
    return x_new, history


INNER_SOLVERS = {"gd": _gradient_descent, "lbfgs": _lbfgs}


def _project(chain, task, W):
    out = np.empty_like(W)
    for t, q in enumerate(W):
        out[t], _ = dls_solve(chain, q, task.x_f, task.constrain_orientation, tol=1e-12)
    return out


def _residuals(chain, task, xi):
    pts, theta = joint_positions(chain, xi)
    res = np.linalg.norm(pts[:, -1, :] - task.x_f.position, axis=1)
    if task.constrain_orientation:
        res = np.maximum(res, np.abs(normalize_angle(theta[:, -1] - task.x_f.orientation)))
    return res


def _clearance(task, chain, xi):
    model = task.obstacles if task.obstacles is not None else CollisionModel()
    return float(np.min(signed_distances(model, chain, xi)))


def solve_from_start(chain, task, spec, options, xi0, q_d=None, trace=None):
    """Optimize one attempt from a fixed start configuration ``xi0``.

    Returns ``(trajectory, objective, residual, clearance, similarity)``. When
    ``trace`` is a list it receives the accepted objective values of every
    inner iteration, one list per outer iteration.
    """
    xi0 = check_configuration(chain, xi0, name="xi0")
    context = CostContext(task.x_f, task.x_d, q_d, options.fixed_base_fk)
    problem = _PenaltyProblem(chain, task, spec, options, xi0, context)
    x = np.tile(xi0, options.T)
    inner = INNER_SOLVERS[options.inner_solver]
    if spec.metric.kind == "proj":
        f, g = problem.value_and_grad(x)
        if np.linalg.norm(g) <= options.gtol:
            x, _ = _kick(problem, x, f, options)
    for _ in range(options.outer_iterations):
        x, history = inner(problem, x, options)
        if trace is not None:
            trace.append(history)
        problem.mu *= options.penalty_growth
    xi = problem.waypoints(x)
    xi[1:] = _project(chain, task, xi[1:])
    objective = total_objective(spec, chain, xi, context)
    similarity = similarity_cost(spec, chain, xi[0], xi[-1], context)
    return xi, objective, float(np.max(_residuals(chain, task, xi))), _clearance(task, chain, xi), similarity


def solve_attempt(chain, task, spec, options=None):
    """Best attempt trajectory over all IK starts at the failure pose.

    Raises
    ------
    UnreachableTargetError
        If the failure pose has no IK solution, or a cost needs ``q_d`` and the
        desired pose is unreachable.
    """
    options = options or SolveOptions()
    starts = attempt_starts(chain, task)
    if not starts:
        raise UnreachableTargetError(task.x_f, what="failure pose x_f")
    model = task.obstacles if task.obstacles is not None else CollisionModel()
    free = [i for i, s in enumerate(starts)
            if float(signed_distances(model, chain, s)) >= options.collision_margin - FEASIBILITY_SLACK]
    candidates = free or list(range(len(starts)))
    needs_qd = spec.cost_kind in ("cq", "cb")

    best = None
    seed_objectives = []
    for i in candidates:
        xi0 = starts[i]
        q_d = desired_configuration(chain, task, xi0) if needs_qd else None
        xi, obj, res, clear, sim = solve_from_start(chain, task, spec, options, xi0, q_d)
        feasible = res <= options.constraint_tolerance and clear >= options.collision_margin - FEASIBILITY_SLACK
        seed_objectives.append((i, obj, feasible))
        logger.debug("seed %d: objective %.6g residual %.3g clearance %.3g", i, obj, res, clear)
        key = (not feasible, obj, i)
        if best is None or key < best[0]:
            best = (key, SolveResult(
                trajectory=xi, objective=obj, constraint_residual=res, seed_index=i,
                converged=feasible, similarity=sim, min_clearance=clear, q_d=q_d,
            ))
    result = best[1]
    return SolveResult(**{**result.__dict__, "seed_objectives": tuple(seed_objectives)})
