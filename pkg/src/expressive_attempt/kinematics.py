"""Planar serial chain on an optionally translating base.

Configurations are plain float arrays laid out as ``[base_x, base_y, q_1, ..., q_n]``
for a mobile base and ``[q_1, ..., q_n]`` otherwise. Body points are addressed
by name (``ba``, ``sh``, ``el``, ``ee``) and mapped to either ``"base"`` or a joint
index ``j`` in ``0..n``: joint ``j`` is the proximal end of link ``j`` and joint
``n`` is the distal tip of the last link.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy.stats import qmc

from .exceptions import DimensionError, UnknownBodyPointError, UnreachableTargetError

BODY_POINT_NAMES = ("ba", "sh", "el", "ee")

IK_SEEDS = 16
IK_MAX_ITER = 200
IK_DAMPING = 1e-3
IK_TOL = 1e-6
IK_DEDUP_TOL = 1e-5


def normalize_angle(a):
    """Wrap angles into ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - np.asarray(a, dtype=float), 2.0 * np.pi)


@dataclass(frozen=True)
class Pose:
    """Planar pose: a 2-vector position and an orientation angle."""

    position: np.ndarray
    orientation: float = 0.0

    def __post_init__(self):
        p = np.array(self.position, dtype=float).reshape(-1)
        if p.shape != (2,) or not np.all(np.isfinite(p)):
            raise ValueError(f"pose position must be a finite 2-vector, got {self.position!r}")
        p.setflags(write=False)
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", float(normalize_angle(self.orientation)))

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return bool(np.array_equal(self.position, other.position)) and self.orientation == other.orientation

    def __hash__(self):
        return hash((tuple(self.position), self.orientation))

    def __repr__(self):
        x, y = self.position
        return f"Pose(position=({x:.6g}, {y:.6g}), orientation={self.orientation:.6g})"


@dataclass(frozen=True, eq=False)
class KinematicChain:
    """Planar revolute arm, optionally mounted on an x/y prismatic base.

    Parameters
    ----------
    base_mobile : bool
        Whether two prismatic base coordinates precede the joint angles.
    link_lengths : sequence of float
        Strictly positive link lengths in meters, one per revolute joint.
    joint_limits : sequence of (lower, upper)
        One closed interval per degree of freedom (base first).
    body_points : dict, optional
        Map from body-point name to ``"base"`` or a joint index. Defaults to
        ``ba`` at the base (mobile only), ``sh`` at joint 0, ``el`` at joint 1
        and ``ee`` at the tip.
    """

    base_mobile: bool
    link_lengths: tuple
    joint_limits: tuple
    body_points: dict = field(default=None)

    def __post_init__(self):
        lengths = tuple(float(v) for v in self.link_lengths)
        if len(lengths) == 0:
            raise ValueError("chain needs at least one link")
        if not all(np.isfinite(v) and v > 0 for v in lengths):
            raise ValueError(f"link_lengths must all be strictly positive, got {list(lengths)}")
        object.__setattr__(self, "link_lengths", lengths)
        object.__setattr__(self, "base_mobile", bool(self.base_mobile))

        limits = tuple((float(lo), float(hi)) for lo, hi in self.joint_limits)
        if len(limits) != self.dof:
            raise DimensionError(self.dof, len(limits), what="joint_limits")
        for i, (lo, hi) in enumerate(limits):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"joint {i} limits must satisfy lower < upper, got ({lo}, {hi})")
        object.__setattr__(self, "joint_limits", limits)

        n = len(lengths)
        if self.body_points is None:
            bp = {}
            if self.base_mobile:
                bp["ba"] = "base"
            bp["sh"] = 0
            if n >= 2:
                bp["el"] = 1
            bp["ee"] = n
        else:
            bp = dict(self.body_points)
        for name, loc in bp.items():
            if name not in BODY_POINT_NAMES:
                raise ValueError(f"body point name must be one of {BODY_POINT_NAMES}, got {name!r}")
            if loc == "base":
                continue
            if isinstance(loc, bool) or not isinstance(loc, (int, np.integer)) or not 0 <= loc <= n:
                raise ValueError(f"body point {name!r} location must be 'base' or a joint index in 0..{n}, got {loc!r}")
        if bp.get("ee") != n:
            raise ValueError(f"body point 'ee' must be present at the distal tip (joint {n})")
        if ("ba" in bp) != self.base_mobile:
            raise ValueError("body point 'ba' must be declared iff the base is mobile")
        if "ba" in bp and bp["ba"] != "base":
            raise ValueError("body point 'ba' must be located at 'base'")
        if "sh" in bp and bp["sh"] != 0:
            raise ValueError("body point 'sh' must be the arm mount (joint 0)")
        if "el" in bp and not (isinstance(bp["el"], (int, np.integer)) and 0 < bp["el"] < n):
            raise ValueError(f"body point 'el' must be an interior joint in 1..{n - 1}")
        for name, loc in bp.items():
            if loc == "base" and name != "ba":
                raise ValueError(f"only 'ba' may be located at the base, not {name!r}")
        object.__setattr__(self, "body_points", {k: (v if v == "base" else int(v)) for k, v in bp.items()})

    @property
    def n_links(self):
        return len(self.link_lengths)

    @property
    def n_base(self):
        return 2 if self.base_mobile else 0

    @property
    def dof(self):
        return self.n_base + len(self.link_lengths)

    @cached_property
    def lower(self):
        a = np.array([lo for lo, _ in self.joint_limits])
        a.setflags(write=False)
        return a

    @cached_property
    def upper(self):
        a = np.array([hi for _, hi in self.joint_limits])
        a.setflags(write=False)
        return a

    @property
    def reach(self):
        return float(sum(self.link_lengths))

    def clip(self, q):
        return np.clip(q, self.lower, self.upper)

    def location(self, b):
        try:
            return self.body_points[b]
        except KeyError:
            raise UnknownBodyPointError(b, self.body_points) from None

    def to_dict(self):
        return {
            "base_mobile": self.base_mobile,
            "link_lengths": list(self.link_lengths),
            "joint_limits": [list(p) for p in self.joint_limits],
            "body_points": dict(self.body_points),
        }

    def __eq__(self, other):
        if not isinstance(other, KinematicChain):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None


def default_chain():
    """Mobile x/y base carrying a three-link arm."""
    return KinematicChain(
        base_mobile=True,
        link_lengths=(0.5, 0.4, 0.15),
        joint_limits=(
            (-0.3, 0.3),
            (-0.2, 0.2),
            (-np.pi, np.pi),
            (-2.6, 2.6),
            (-2.0, 2.0),
        ),
    )


def check_configuration(chain, q, *, limits=False, name="configuration"):
    """Return ``q`` as a float vector of the chain's DOF, optionally limit-checked."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.shape[0] != chain.dof:
        raise DimensionError(chain.dof, q.size if q.ndim == 1 else q.shape, what=name)
    if not np.all(np.isfinite(q)):
        raise ValueError(f"{name} has non-finite entries")
    if limits:
        bad = np.flatnonzero((q < chain.lower - 1e-12) | (q > chain.upper + 1e-12))
        if bad.size:
            i = int(bad[0])
            raise ValueError(
                f"{name}[{i}] = {q[i]:.6g} outside joint limits [{chain.lower[i]:.6g}, {chain.upper[i]:.6g}]"
            )
    return q


def _check_batch(chain, Q):
    Q = np.asarray(Q, dtype=float)
    if Q.shape[-1] != chain.dof:
        raise DimensionError(chain.dof, Q.shape[-1])
    return Q


def joint_positions(chain, Q, fixed_base=False):
    """Positions of joints ``0..n`` and cumulative link angles.

    Works on batches: ``Q`` of shape ``(..., dof)`` gives points of shape
    ``(..., n + 1, 2)`` and angles of shape ``(..., n)``. With ``fixed_base`` the
    base translation is ignored (arm-relative positions).
    """
    Q = _check_batch(chain, Q)
    nb = chain.n_base
    theta = np.cumsum(Q[..., nb:], axis=-1)
    lengths = np.asarray(chain.link_lengths)
    steps = np.stack([lengths * np.cos(theta), lengths * np.sin(theta)], axis=-1)
    pts = np.concatenate([np.zeros(Q.shape[:-1] + (1, 2)), np.cumsum(steps, axis=-2)], axis=-2)
    if nb and not fixed_base:
        pts = pts + Q[..., None, :2]
    return pts, theta


def point_positions(chain, Q, names, fixed_base=False):
    """Batched positions of several body points, shape ``(..., len(names), 2)``.

    ``fixed_base`` applies to every point except ``ba``.
    """
    Q = _check_batch(chain, Q)
    locs = [chain.location(b) for b in names]
    pts, _ = joint_positions(chain, Q, fixed_base=fixed_base)
    out = np.empty(Q.shape[:-1] + (len(names), 2))
    for i, loc in enumerate(locs):
        out[..., i, :] = Q[..., :2] if loc == "base" else pts[..., loc, :]
    return out


@lru_cache(maxsize=None)
def _proximal_mask(n):
    return np.tril(np.ones((n + 1, n)), -1)


def joint_jacobians(chain, Q, fixed_base=False, points=None):
    """Batched translational Jacobians of joints ``0..n``, shape ``(..., n + 1, 2, dof)``.

    ``points`` may pass already computed joint positions of ``Q`` (base offset
    included or not; only differences are used).
    """
    Q = _check_batch(chain, Q)
    nb = chain.n_base
    n = chain.n_links
    pts = joint_positions(chain, Q, fixed_base=True)[0] if points is None else points
    J = np.zeros(Q.shape[:-1] + (n + 1, 2, chain.dof))
    if nb and not fixed_base:
        J[..., 0, 0] = 1.0
        J[..., 1, 1] = 1.0
    # column m is the perpendicular of (p_j - p_m) for joints m proximal to j
    rel = pts[..., :, None, :] - pts[..., None, :n, :]
    mask = _proximal_mask(n)
    J[..., 0, nb:] = -rel[..., 1] * mask
    J[..., 1, nb:] = rel[..., 0] * mask
    return J


def point_jacobians(chain, Q, names, fixed_base=False):
    """Batched translational Jacobians of body points, shape ``(..., len(names), 2, dof)``.

    ``fixed_base`` drops the base columns for every point except ``ba``.
    """
    Q = _check_batch(chain, Q)
    locs = [chain.location(b) for b in names]
    Jj = joint_jacobians(chain, Q, fixed_base=fixed_base)
    J = np.zeros(Q.shape[:-1] + (len(names), 2, chain.dof))
    for i, loc in enumerate(locs):
        if loc == "base":
            J[..., i, 0, 0] = 1.0
            J[..., i, 1, 1] = 1.0
        else:
            J[..., i, :, :] = Jj[..., loc, :, :]
    return J


def forward_kinematics(chain, q, b):
    """Planar pose of body point ``b`` at configuration ``q``."""
    loc = chain.location(b)
    q = check_configuration(chain, q)
    if loc == "base":
        return Pose(q[:2], 0.0)
    pts, theta = joint_positions(chain, q)
    orientation = float(theta[loc - 1]) if loc > 0 else 0.0
    return Pose(pts[loc], orientation)


def body_position(chain, q, b):
    """Translation of body point ``b``; same as ``forward_kinematics(...).position``."""
    return np.array(forward_kinematics(chain, q, b).position)


def _task_error(chain, q, target, constrain_orientation):
    pts, theta = joint_positions(chain, q)
    err = target.position - pts[..., -1, :]
    if constrain_orientation:
        turn = normalize_angle(target.orientation - theta[..., -1])
        err = np.concatenate([err, np.asarray(turn)[..., None]], axis=-1)
    return err


def _task_jacobian(chain, q, constrain_orientation):
    J = point_jacobians(chain, q, ["ee"])[..., 0, :, :]
    if constrain_orientation:
        row = np.zeros(J.shape[:-2] + (1, chain.dof))
        row[..., 0, chain.n_base :] = 1.0
        J = np.concatenate([J, row], axis=-2)
    return J


def _dls_step(J, err, damping, m):
    A = J @ np.swapaxes(J, -1, -2) + damping**2 * np.eye(m)
    return np.einsum("kij,ki->kj", J, np.linalg.solve(A, err[..., None])[..., 0])


def dls_solve_batch(chain, seeds, target, constrain_orientation=False, max_iter=IK_MAX_ITER,
                    damping=IK_DAMPING, tol=1e-10):
    """Damped least-squares IK run independently from every row of ``seeds``.

    Returns ``(Q, residual_norms)``. Each row iterates until its own residual
    drops to ``tol`` or ``max_iter`` is reached. Iterates are clamped to the
    joint limits, and a joint sitting at a limit whose step points outward is
    frozen for that step so the remaining joints take up the motion.
    """
    Q = chain.clip(np.array(np.atleast_2d(seeds), dtype=float))
    err = _task_error(chain, Q, target, constrain_orientation)
    m = err.shape[-1]
    for _ in range(max_iter):
        active = np.flatnonzero(np.linalg.norm(err, axis=-1) > tol)
        if not active.size:
            break
        q, e = Q[active], err[active]
        J = _task_jacobian(chain, q, constrain_orientation)
        step = _dls_step(J, e, damping, m)
        # joints pinned at a limit and pushed outward are dropped from the step
        pinned = ((q <= chain.lower) & (step < 0)) | ((q >= chain.upper) & (step > 0))
        redo = np.flatnonzero(pinned.any(axis=1))
        if redo.size:
            Jr = J[redo] * ~pinned[redo][:, None, :]
            step[redo] = _dls_step(Jr, e[redo], damping, m)
        Q[active] = chain.clip(q + step)
        err[active] = _task_error(chain, Q[active], target, constrain_orientation)
    return Q, np.linalg.norm(err, axis=-1)


def dls_solve(chain, seed, target, constrain_orientation=False, max_iter=IK_MAX_ITER,
              damping=IK_DAMPING, tol=1e-10):
    """Damped least-squares IK from ``seed``; returns ``(q, residual_norm)``.

    Each iterate is clamped to the joint limits.
    """
    Q, res = dls_solve_batch(chain, seed, target, constrain_orientation, max_iter, damping, tol)
    return Q[0], float(res[0])


def ik_seeds(chain, n=IK_SEEDS):
    """Deterministic low-discrepancy seeds spread over the joint limits."""
    pts = qmc.Halton(d=chain.dof, scramble=False).random(n)
    return chain.lower + pts * (chain.upper - chain.lower)


def _wrap_into_limits(value, lo, hi):
    for shift in (0.0, -2 * np.pi, 2 * np.pi):
        v = value + shift
        if lo - 1e-12 <= v <= hi + 1e-12:
            return min(max(v, lo), hi)
    return None


def _analytic_two_link(chain, target):
    l1, l2 = chain.link_lengths
    x, y = target.position
    c2 = (x * x + y * y - l1 * l1 - l2 * l2) / (2 * l1 * l2)
    if abs(c2) > 1 + 1e-12:
        return []
    c2 = min(1.0, max(-1.0, c2))
    out = []
    for q2 in (np.arccos(c2), -np.arccos(c2)):
        q1 = np.arctan2(y, x) - np.arctan2(l2 * np.sin(q2), l1 + l2 * np.cos(q2))
        q1 = _wrap_into_limits(float(normalize_angle(q1)), *chain.joint_limits[0])
        q2 = _wrap_into_limits(float(q2), *chain.joint_limits[1])
        if q1 is not None and q2 is not None:
            out.append(np.array([q1, q2]))
    return out


def _dedup_sorted(solutions):
    solutions = sorted(solutions, key=lambda q: tuple(q))
    kept = []
    for q in solutions:
        if all(np.linalg.norm(q - k) > IK_DEDUP_TOL for k in kept):
            kept.append(q)
    return kept


def ik_solutions(chain, target, constrain_orientation=False, seeds=None):
    """All distinct IK solutions found for ``target``.

    A fixed-base two-link arm is solved in closed form (elbow-up and
    elbow-down). Every other chain runs damped least squares from the
    deterministic seed grid of :func:`ik_seeds`, plus any extra ``seeds``
    supplied; seeds that fail to converge are dropped. The result is sorted
    lexicographically and deduplicated. An unreachable target yields ``[]``.
    """
    if not isinstance(target, Pose):
        target = Pose(target)
    candidates = []
    if not chain.base_mobile and chain.n_links == 2:
        candidates = _analytic_two_link(chain, target)
    else:
        starts = list(np.atleast_2d(seeds)) if seeds is not None and len(seeds) else []
        starts += list(ik_seeds(chain))
        starts = [check_configuration(chain, s) for s in starts]
        candidates = list(dls_solve_batch(chain, np.array(starts), target, constrain_orientation)[0])
    good = []
    for q in candidates:
        err = _task_error(chain, q, target, constrain_orientation)
        if np.linalg.norm(err[:2]) <= IK_TOL and (not constrain_orientation or abs(err[2]) <= IK_TOL):
            good.append(q)
    return _dedup_sorted(good)


def closest_ik(chain, target, reference, constrain_orientation=False):
    """IK solution nearest (squared distance) to ``reference``.

    For numerically solved chains ``reference`` is also used as an extra seed,
    so the result is a member of ``ik_solutions(chain, target, seeds=[reference])``.
    """
    reference = check_configuration(chain, reference, name="reference")
    if not isinstance(target, Pose):
        target = Pose(target)
    sols = ik_solutions(chain, target, constrain_orientation, seeds=[reference])
    if not sols:
        raise UnreachableTargetError(target)
    d = [float(np.sum((s - reference) ** 2)) for s in sols]
    return sols[int(np.argmin(d))].copy()
