"""Signed distance between chain link segments and circle/box obstacles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .kinematics import check_configuration, joint_positions

NO_OBSTACLE_DISTANCE = 1e9


@dataclass(frozen=True)
class Circle:
    center: tuple
    radius: float

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        if len(c) != 2:
            raise ValueError("circle center must be a 2-vector")
        if not self.radius > 0:
            raise ValueError(f"circle radius must be > 0, got {self.radius}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by its min and max corners."""

    min_corner: tuple
    max_corner: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.min_corner)
        hi = tuple(float(v) for v in self.max_corner)
        if len(lo) != 2 or len(hi) != 2:
            raise ValueError("box corners must be 2-vectors")
        if not (lo[0] < hi[0] and lo[1] < hi[1]):
            raise ValueError(f"box min corner {lo} must be below max corner {hi} component-wise")
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    @property
    def corners(self):
        (x0, y0), (x1, y1) = self.min_corner, self.max_corner
        return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])


@dataclass(frozen=True)
class Obstacle:
    name: str
    shape: object

    def __post_init__(self):
        if not isinstance(self.shape, (Circle, Box)):
            raise TypeError(f"obstacle shape must be Circle or Box, got {type(self.shape).__name__}")


@dataclass(frozen=True)
class CollisionModel:
    """Obstacles plus link inflation radius.

    ``ignore_pairs`` holds ``(link_index, obstacle_name)`` pairs that are never
    checked, e.g. the hand against the object it holds.
    """

    obstacles: tuple = ()
    link_clearance: float = 0.0
    ignore_pairs: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "ignore_pairs", frozenset((int(i), str(n)) for i, n in self.ignore_pairs))
        if not self.link_clearance >= 0:
            raise ValueError(f"link_clearance must be >= 0, got {self.link_clearance}")
        names = [o.name for o in self.obstacles]
        if len(set(names)) != len(names):
            raise ValueError(f"obstacle names must be unique, got {names}")
        unknown = {n for _, n in self.ignore_pairs} - set(names)
        if unknown:
            raise ValueError(f"ignore_pairs reference unknown obstacles {sorted(unknown)}")


def _closest_on_segment(P, A, B):
    AB = B - A
    denom = np.sum(AB * AB, axis=-1)
    safe = np.where(denom > 0, denom, 1.0)
    s = np.clip(np.sum((P - A) * AB, axis=-1) / safe, 0.0, 1.0)
    s = np.where(denom > 0, s, 0.0)
    return s, A + s[..., None] * AB


def point_segment_distance(p, a, b):
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    _, c = _closest_on_segment(p, a, b)
    return float(np.linalg.norm(p - c))


def _unit(v):
    n = np.linalg.norm(v, axis=-1)
    return n, v / np.where(n > 0, n, 1.0)[..., None]


_PAIRS = [(i, j) for i in range(4) for j in range(i + 1, 4)]
# gradient of each face's inside-distance with respect to the point
_FACE_DIRS = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


def _take(a, idx):
    return np.take_along_axis(a, idx[..., None], -1)[..., 0]


def _box_terms_reference(A, B, lo, hi):
    """Vectorized numpy form of the box terms; the compiled kernel is the one in use."""
    D = B - A
    # inside-depth of the point at parameter s along face f is c_f + g_f * s;
    # the minimum over faces is concave in s, so its maximum is at an endpoint
    # or where two face lines cross
    c = np.stack([A[..., 0] - lo[0], hi[0] - A[..., 0], A[..., 1] - lo[1], hi[1] - A[..., 1]], axis=-1)
    g = np.stack([D[..., 0], -D[..., 0], D[..., 1], -D[..., 1]], axis=-1)
    cands = [np.zeros(A.shape[:-1]), np.ones(A.shape[:-1])]
    for i, j in _PAIRS:
        dg = g[..., i] - g[..., j]
        safe = np.where(dg != 0, dg, 1.0)
        cands.append(np.clip(np.where(dg != 0, (c[..., j] - c[..., i]) / safe, 0.0), 0.0, 1.0))
    S = np.stack(cands, axis=-1)
    faces = c[..., None, :] + g[..., None, :] * S[..., :, None]
    per_cand = np.min(faces, axis=-1)
    best = np.argmax(per_cand, axis=-1)
    depth = _take(per_cand, best)
    s_in = _take(S, best)
    at_best = np.take_along_axis(faces, best[..., None, None], -2)[..., 0, :]
    order = np.argsort(at_best, axis=-1, kind="stable")
    face, other = order[..., 0], order[..., 1]

    # single active face: depth = c_f + g_f * s
    dir_f = _FACE_DIRS[face]
    dA_in = -(1 - s_in)[..., None] * dir_f
    dB_in = -s_in[..., None] * dir_f
    # two crossing faces: depth = (c_j g_i - c_i g_j) / (g_i - g_j)
    fi, fj = face, other
    ci, cj, gi, gj = _take(c, fi), _take(c, fj), _take(g, fi), _take(g, fj)
    di, dj = _FACE_DIRS[fi], _FACE_DIRS[fj]
    u = gi - gj
    tie = _take(at_best, other) - _take(at_best, face) <= 1e-12 * (1 + np.abs(depth))
    cross = tie & (s_in > 0) & (s_in < 1) & (u != 0)
    us = np.where(u != 0, u, 1.0)[..., None]
    N = (cj * gi - ci * gj)[..., None]
    dN_A = dj * gi[..., None] - cj[..., None] * di - di * gj[..., None] + ci[..., None] * dj
    du_A = dj - di
    dN_B = cj[..., None] * di - ci[..., None] * dj
    du_B = di - dj
    dA_cross = -(dN_A * us - N * du_A) / us**2
    dB_cross = -(dN_B * us - N * du_B) / us**2
    dA_in = np.where(cross[..., None], dA_cross, dA_in)
    dB_in = np.where(cross[..., None], dB_cross, dB_in)

    # separated: nearest pair is an endpoint vs the box or a corner vs the segment
    dists, params, diffs = [], [], []
    for s0, P in ((0.0, A), (1.0, B)):
        diff = P - np.clip(P, lo, hi)
        dists.append(np.linalg.norm(diff, axis=-1))
        params.append(np.full(A.shape[:-1], s0))
        diffs.append(diff)
    for corner in (lo, np.array([hi[0], lo[1]]), hi, np.array([lo[0], hi[1]])):
        s, p = _closest_on_segment(corner, A, B)
        diff = p - corner
        dists.append(np.linalg.norm(diff, axis=-1))
        params.append(s)
        diffs.append(diff)
    dists = np.stack(dists, axis=-1)
    k = np.argmin(dists, axis=-1)
    dist = _take(dists, k)
    s_out = _take(np.stack(params, axis=-1), k)
    diff = np.take_along_axis(np.stack(diffs, axis=-2), k[..., None, None], -2)[..., 0, :]
    _, n = _unit(diff)

    inside = (depth > 0)[..., None]
    d = np.where(depth > 0, -depth, dist)
    dA = np.where(inside, dA_in, (1 - s_out)[..., None] * n)
    dB = np.where(inside, dB_in, s_out[..., None] * n)
    return d, dA, dB


def segment_obstacle_terms(A, B, shape):
    """Batched signed distance from segments ``AB`` to a shape, with gradients.

    Returns ``(d, dA, dB)``: the distance (negative = penetrating) and its
    gradients with respect to the endpoints ``A`` and ``B``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    shape_prefix = np.broadcast_shapes(A.shape, B.shape)[:-1]
    A2 = np.ascontiguousarray(np.broadcast_to(A, shape_prefix + (2,)).reshape(-1, 2))
    B2 = np.ascontiguousarray(np.broadcast_to(B, shape_prefix + (2,)).reshape(-1, 2))
    if isinstance(shape, Circle):
        d, dA, dB = _kernels.circle_terms(A2, B2, shape.center[0], shape.center[1], shape.radius)
    else:
        d, dA, dB = _kernels.box_terms(A2, B2, np.asarray(shape.min_corner, float), np.asarray(shape.max_corner, float))
    return d.reshape(shape_prefix), dA.reshape(shape_prefix + (2,)), dB.reshape(shape_prefix + (2,))


def segment_obstacle_distances(A, B, shape):
    """Batched signed distance from segments ``AB`` to a shape (negative = penetrating)."""
    return segment_obstacle_terms(A, B, shape)[0]


def segment_obstacle_distance(a, b, shape):
    """Signed distance from one segment ``ab`` to a shape."""
    return float(segment_obstacle_distances(a, b, shape))


def pair_terms(model, pts):
    """Clearance terms of every checked (link, obstacle) pair.

    ``pts`` holds joint positions of shape ``(..., n + 1, 2)``. Returns
    ``(d, dA, dB, labels)``: distances of shape ``(..., n_pairs)``, their
    gradients with respect to each link's proximal and distal joint, of shape
    ``(..., n_pairs, 2)``, and the matching list of ``(link, obstacle_name)``.
    """
    n_links = pts.shape[-2] - 1
    A, B = pts[..., :-1, :], pts[..., 1:, :]
    ds, dAs, dBs, labels = [], [], [], []
    for obs in model.obstacles:
        links = [i for i in range(n_links) if (i, obs.name) not in model.ignore_pairs]
        if not links:
            continue
        d, dA, dB = segment_obstacle_terms(A[..., links, :], B[..., links, :], obs.shape)
        ds.append(d - model.link_clearance)
        dAs.append(dA)
        dBs.append(dB)
        labels.extend((i, obs.name) for i in links)
    if not labels:
        shape = pts.shape[:-2]
        return np.zeros(shape + (0,)), np.zeros(shape + (0, 2)), np.zeros(shape + (0, 2)), labels
    return np.concatenate(ds, axis=-1), np.concatenate(dAs, axis=-2), np.concatenate(dBs, axis=-2), labels


def pair_distances(model, pts):
    d, _, _, labels = pair_terms(model, pts)
    return d, labels


def signed_distances(model, chain, Q):
    """Batched :func:`signed_distance` over configurations ``Q`` of shape ``(..., dof)``."""
    pts, _ = joint_positions(chain, Q)
    d, labels = pair_distances(model, pts)
    if not labels:
        return np.full(pts.shape[:-2], NO_OBSTACLE_DISTANCE)
    return np.min(d, axis=-1)


def signed_distance(model, chain, q):
    """Minimum clearance between any checked link and obstacle.

    Returns ``NO_OBSTACLE_DISTANCE`` when nothing is checked.
    """
    q = check_configuration(chain, q)
    return float(signed_distances(model, chain, q))


def closest_pair(model, chain, q):
    """``(distance, link_index, obstacle_name)`` of the nearest checked pair, or ``None``."""
    pts, _ = joint_positions(chain, check_configuration(chain, q))
    d, labels = pair_distances(model, pts)
    if not labels:
        return None
    i = int(np.argmin(d))
    return float(d[i]), labels[i][0], labels[i][1]


def is_collision_free(model, chain, trajectory, tolerance=0.0):
    """Waypoint-wise check that signed distance stays ``>= tolerance``.

    Returns ``(True, None, None)`` or ``(False, index, distance)`` for the first
    violating waypoint.
    """
    trajectory = np.atleast_2d(np.asarray(trajectory, dtype=float))
    if len(trajectory) == 0:
        raise ValueError("trajectory must be non-empty")
    sd = signed_distances(model, chain, trajectory)
    bad = np.flatnonzero(sd < tolerance)
    if bad.size:
        t = int(bad[0])
        return False, t, float(sd[t])
    return True, None, None
