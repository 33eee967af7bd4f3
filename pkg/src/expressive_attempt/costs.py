"""Similarity costs between an attempt and the motion it imitates.

Three vector distances (squared l2, negative dot product and a projection
distance with exponent ``k``), three costs built from them (configuration,
body-point workspace and emulate-end-effector), and the smoothness term. Every
cost has an analytic gradient with respect to the final waypoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError
from .kinematics import Pose, point_jacobians, point_positions

METRIC_KINDS = ("l2", "dot", "proj")
COST_KINDS = ("cq", "cb", "cee")
ZERO_NORM = 1e-12

DEFAULT_BODY_POINTS = {
    "cq": (),
    "cb": ("el", "sh"),
    "cee": ("ba", "el", "sh"),
}
DEFAULT_K = 3
DEFAULT_LAMBDA = 20.0
DEFAULT_ALPHA = 0.3


@dataclass(frozen=True)
class DistanceMetric:
    kind: str = "proj"
    k: int = DEFAULT_K

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise ValueError(f"metric kind must be one of {METRIC_KINDS}, got {self.kind!r}")
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))
        if self.kind == "proj" and self.k % 2 == 0:
            raise ValueError(
                f"k must be odd for the proj metric (got {self.k}); an even power "
                "would reward motion opposite to the target direction"
            )


@dataclass(frozen=True)
class CostSpec:
    """Which similarity cost to use and how to weigh it.

    ``lam`` divides the smoothness term; ``alpha`` is a constant bias added
    to the similarity cost. ``body_points=None`` picks the per-cost default.
    """

    cost_kind: str = "cee"
    metric: DistanceMetric = field(default_factory=DistanceMetric)
    body_points: tuple = None
    lam: float = DEFAULT_LAMBDA
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if self.cost_kind not in COST_KINDS:
            raise ValueError(f"cost kind must be one of {COST_KINDS}, got {self.cost_kind!r}")
        if not isinstance(self.metric, DistanceMetric):
            raise TypeError("metric must be a DistanceMetric")
        if self.body_points is None:
            object.__setattr__(self, "body_points", DEFAULT_BODY_POINTS[self.cost_kind])
        bp = tuple(self.body_points)
        if any(b not in ("ba", "sh", "el") for b in bp):
            raise ValueError(f"cost body points must be drawn from ('ba', 'sh', 'el'), got {bp}")
        if len(set(bp)) != len(bp):
            raise ValueError(f"duplicate cost body points {bp}")
        if self.cost_kind in ("cb", "cee") and not bp:
            raise ValueError(f"{self.cost_kind} needs at least one body point")
        object.__setattr__(self, "body_points", bp)
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if not (np.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "alpha", float(self.alpha))

    def resolved_body_points(self, chain):
        """Body points actually present on ``chain`` (``ba`` drops out for a fixed base)."""
        return tuple(b for b in self.body_points if b in chain.body_points)

    def to_dict(self):
        return {
            "cost_kind": self.cost_kind,
            "metric": self.metric.kind,
            "k": self.metric.k,
            "body_points": list(self.body_points),
            "lambda": self.lam,
            "alpha": self.alpha,
        }


@dataclass(frozen=True)
class CostContext:
    """Task data a cost needs besides the trajectory."""

    x_f: Pose
    x_d: Pose
    q_d: np.ndarray = None
    fixed_base: bool = False


def _pair(v1, v2):
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if v1.shape != v2.shape:
        raise DimensionError(v1.shape, v2.shape, what="vector pair")
    return v1, v2


def _signed_power(c, k):
    return c * np.abs(c) ** (k - 1)


def distance(metric, v1, v2):
    """Distance between displacement ``v1`` and reference ``v2``."""
    v1, v2 = _pair(v1, v2)
    if metric.kind == "l2":
        diff = v1 - v2
        return float(diff @ diff)
    n1, n2 = np.linalg.norm(v1), np.linalg.norm(v2)
    if n1 <= ZERO_NORM or n2 <= ZERO_NORM:
        return 0.0
    if metric.kind == "dot":
        return float(-(v1 @ v2))
    cos = (v1 @ v2) / (n1 * n2)
    return float(-n1 * n2 * _signed_power(cos, metric.k))


def distance_gradient(metric, v1, v2):
    """``(dd/dv1, dd/dv2)``.

    The dot gradient is exact everywhere. proj is not differentiable when
    either vector vanishes; its gradient is taken as zero there.
    """
    v1, v2 = _pair(v1, v2)
    if metric.kind == "l2":
        g = 2.0 * (v1 - v2)
        return g, -g
    if metric.kind == "dot":
        return -v2.copy(), -v1.copy()
    n1, n2 = np.linalg.norm(v1), np.linalg.norm(v2)
    if n1 <= ZERO_NORM or n2 <= ZERO_NORM:
        return np.zeros_like(v1), np.zeros_like(v2)
    k = metric.k
    p = v1 @ v2
    w = np.abs(p / (n1 * n2)) ** (k - 1)
    g1 = -w * (k * v2 - (k - 1) * (p / n1**2) * v1)
    g2 = -w * (k * v1 - (k - 1) * (p / n2**2) * v2)
    return g1, g2


def _check_same_dof(chain, *qs):
    for q in qs:
        if np.shape(q) != (chain.dof,):
            raise DimensionError(chain.dof, np.shape(q))


def cost_cq(chain, xi0, xiT, qd, metric):
    """Configuration-space cost: compare ``xiT - xi0`` to ``qd - xi0``."""
    xi0, xiT, qd = (np.asarray(v, dtype=float) for v in (xi0, xiT, qd))
    _check_same_dof(chain, xi0, xiT, qd)
    return distance(metric, xiT - xi0, qd - xi0)


def cost_cq_gradient(chain, xi0, xiT, qd, metric):
    xi0, xiT, qd = (np.asarray(v, dtype=float) for v in (xi0, xiT, qd))
    _check_same_dof(chain, xi0, xiT, qd)
    return distance_gradient(metric, xiT - xi0, qd - xi0)[0]


def _displacements(chain, xi0, xiT, body_points, fixed_base):
    P = point_positions(chain, np.stack([xi0, xiT]), body_points, fixed_base=fixed_base)
    return P[1] - P[0], P[0]


def cost_cb(chain, xi0, xiT, qd, metric, body_points=DEFAULT_BODY_POINTS["cb"], fixed_base=False):
    """Sum over body points of d(actual displacement, displacement under ``qd``)."""
    xi0, xiT, qd = (np.asarray(v, dtype=float) for v in (xi0, xiT, qd))
    _check_same_dof(chain, xi0, xiT, qd)
    body_points = tuple(body_points)
    disp, p0 = _displacements(chain, xi0, xiT, body_points, fixed_base)
    ideal = point_positions(chain, qd, body_points, fixed_base=fixed_base) - p0
    return float(sum(distance(metric, disp[i], ideal[i]) for i in range(len(body_points))))


def cost_cb_gradient(chain, xi0, xiT, qd, metric, body_points=DEFAULT_BODY_POINTS["cb"], fixed_base=False):
    xi0, xiT, qd = (np.asarray(v, dtype=float) for v in (xi0, xiT, qd))
    _check_same_dof(chain, xi0, xiT, qd)
    body_points = tuple(body_points)
    disp, p0 = _displacements(chain, xi0, xiT, body_points, fixed_base)
    ideal = point_positions(chain, qd, body_points, fixed_base=fixed_base) - p0
    J = point_jacobians(chain, xiT, body_points, fixed_base=fixed_base)
    g = np.zeros(chain.dof)
    for i in range(len(body_points)):
        g += J[i].T @ distance_gradient(metric, disp[i], ideal[i])[0]
    return g


def cost_cee(chain, xi0, xiT, xf, xd, metric, body_points=DEFAULT_BODY_POINTS["cee"], fixed_base=False):
    """Sum over body points of d(actual displacement, ``xd - xf``)."""
    xi0, xiT = (np.asarray(v, dtype=float) for v in (xi0, xiT))
    _check_same_dof(chain, xi0, xiT)
    body_points = tuple(body_points)
    target = _position(xd) - _position(xf)
    disp, _ = _displacements(chain, xi0, xiT, body_points, fixed_base)
    return float(sum(distance(metric, disp[i], target) for i in range(len(body_points))))


def cost_cee_gradient(chain, xi0, xiT, xf, xd, metric, body_points=DEFAULT_BODY_POINTS["cee"], fixed_base=False):
    xi0, xiT = (np.asarray(v, dtype=float) for v in (xi0, xiT))
    _check_same_dof(chain, xi0, xiT)
    body_points = tuple(body_points)
    target = _position(xd) - _position(xf)
    disp, _ = _displacements(chain, xi0, xiT, body_points, fixed_base)
    J = point_jacobians(chain, xiT, body_points, fixed_base=fixed_base)
    g = np.zeros(chain.dof)
    for i in range(len(body_points)):
        g += J[i].T @ distance_gradient(metric, disp[i], target)[0]
    return g


def _position(x):
    return x.position if isinstance(x, Pose) else np.asarray(x, dtype=float)


def smoothness(trajectory):
    """Sum of squared waypoint-to-waypoint steps."""
    xi = np.asarray(trajectory, dtype=float)
    if xi.ndim != 2 or len(xi) < 2:
        raise ValueError("smoothness needs a trajectory of at least 2 waypoints")
    steps = np.diff(xi, axis=0)
    return float(np.sum(steps * steps))


def smoothness_gradient(trajectory):
    xi = np.asarray(trajectory, dtype=float)
    if xi.ndim != 2 or len(xi) < 2:
        raise ValueError("smoothness needs a trajectory of at least 2 waypoints")
    steps = np.diff(xi, axis=0)
    g = np.zeros_like(xi)
    g[:-1] -= 2 * steps
    g[1:] += 2 * steps
    return g


def similarity_cost(spec, chain, xi0, xiT, context):
    """The unbiased similarity cost selected by ``spec.cost_kind``."""
    metric = spec.metric
    if spec.cost_kind == "cq":
        return cost_cq(chain, xi0, xiT, _require_qd(context), metric)
    bp = spec.resolved_body_points(chain)
    if spec.cost_kind == "cb":
        return cost_cb(chain, xi0, xiT, _require_qd(context), metric, bp, context.fixed_base)
    return cost_cee(chain, xi0, xiT, context.x_f, context.x_d, metric, bp, context.fixed_base)


def similarity_cost_gradient(spec, chain, xi0, xiT, context, metric=None):
    """Gradient of :func:`similarity_cost` with respect to ``xiT``.

    ``metric`` overrides ``spec.metric`` (used to pick a descent direction at a
    zero displacement, where proj has no gradient).
    """
    metric = metric or spec.metric
    if spec.cost_kind == "cq":
        return cost_cq_gradient(chain, xi0, xiT, _require_qd(context), metric)
    bp = spec.resolved_body_points(chain)
    if spec.cost_kind == "cb":
        return cost_cb_gradient(chain, xi0, xiT, _require_qd(context), metric, bp, context.fixed_base)
    return cost_cee_gradient(chain, xi0, xiT, context.x_f, context.x_d, metric, bp, context.fixed_base)


def similarity_cost_and_gradient(spec, chain, xi0, xiT, context, metric=None):
    """``(similarity_cost, gradient)`` sharing one kinematics pass.

    The value always uses ``spec.metric``; ``metric`` only overrides the
    gradient, as in :func:`similarity_cost_gradient`.
    """
    grad_metric = metric or spec.metric
    xi0 = np.asarray(xi0, dtype=float)
    xiT = np.asarray(xiT, dtype=float)
    if spec.cost_kind == "cq":
        qd = _require_qd(context)
        v1, v2 = xiT - xi0, qd - xi0
        return distance(spec.metric, v1, v2), distance_gradient(grad_metric, v1, v2)[0]
    bp = spec.resolved_body_points(chain)
    disp, p0 = _displacements(chain, xi0, xiT, bp, context.fixed_base)
    if spec.cost_kind == "cb":
        refs = point_positions(chain, _require_qd(context), bp, fixed_base=context.fixed_base) - p0
    else:
        refs = np.broadcast_to(_position(context.x_d) - _position(context.x_f), disp.shape)
    J = point_jacobians(chain, xiT, bp, fixed_base=context.fixed_base)
    value = 0.0
    g = np.zeros(chain.dof)
    for i in range(len(bp)):
        value += distance(spec.metric, disp[i], refs[i])
        g += J[i].T @ distance_gradient(grad_metric, disp[i], refs[i])[0]
    return float(value), g


def _require_qd(context):
    if context.q_d is None:
        raise ValueError("this cost needs a desired configuration q_d")
    return context.q_d


def total_objective(spec, chain, trajectory, context):
    """Biased similarity cost of the final waypoint plus smoothness / lambda."""
    xi = np.asarray(trajectory, dtype=float)
    if xi.ndim != 2 or xi.shape[1] != chain.dof:
        raise DimensionError(chain.dof, xi.shape, what="trajectory")
    c = similarity_cost(spec, chain, xi[0], xi[-1], context)
    return (c + spec.alpha) + smoothness(xi) / spec.lam
