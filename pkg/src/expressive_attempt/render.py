"""SVG frames of a motion plan and a side-by-side contact sheet of attempts."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .collision import Circle, CollisionModel
from .kinematics import joint_positions
from .motion import sample_plan_labeled

FRAME_DT = 0.02
WIDTH, HEIGHT = 480, 360
PAD = 0.15
BODY_COLORS = {"ba": "#7b3294", "sh": "#008837", "el": "#e66101", "ee": "#2166ac"}


class _View:
    """World-to-pixel map with y pointing up, fitted once so every frame shares it."""

    def __init__(self, points, width=WIDTH, height=HEIGHT):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        span = np.maximum(hi - lo, 1e-3)
        lo, hi = lo - PAD * span, hi + PAD * span
        self.scale = min(width / (hi[0] - lo[0]), height / (hi[1] - lo[1]))
        self.lo, self.width, self.height = lo, width, height

    def xy(self, p):
        return (p[0] - self.lo[0]) * self.scale, self.height - (p[1] - self.lo[1]) * self.scale

    def length(self, d):
        return d * self.scale


def _n(v):
    return f"{v:.2f}"


def _body_points(chain, q):
    pts, _ = joint_positions(chain, q)
    named = {}
    for name, loc in chain.body_points.items():
        named[name] = np.asarray(q[:2]) if loc == "base" else pts[loc]
    return pts, named


def _arm(chain, view, q, opacity=1.0, labels=True):
    pts, named = _body_points(chain, q)
    out = [f'<g opacity="{opacity:g}">']
    if chain.base_mobile:
        bx, by = view.xy(q[:2])
        s = view.length(0.06)
        out.append(f'<rect x="{_n(bx - s)}" y="{_n(by - s / 2)}" width="{_n(2 * s)}" height="{_n(s)}" '
                   f'fill="#bbbbbb" stroke="#555555"/>')
    path = " ".join(f"{_n(x)},{_n(y)}" for x, y in (view.xy(p) for p in pts))
    out.append(f'<polyline points="{path}" fill="none" stroke="#333333" stroke-width="4" stroke-linecap="round"/>')
    for name in sorted(named):
        x, y = view.xy(named[name])
        out.append(f'<circle cx="{_n(x)}" cy="{_n(y)}" r="5" fill="{BODY_COLORS[name]}"/>')
        if labels:
            out.append(f'<text x="{_n(x + 7)}" y="{_n(y - 7)}" font-size="11">{name}</text>')
    out.append("</g>")
    return out


def _obstacles(model, view):
    out = []
    for obs in model.obstacles:
        if isinstance(obs.shape, Circle):
            x, y = view.xy(obs.shape.center)
            out.append(f'<circle cx="{_n(x)}" cy="{_n(y)}" r="{_n(view.length(obs.shape.radius))}" '
                       f'fill="#f4a582" stroke="#b2182b"/>')
        else:
            x0, y1 = view.xy(obs.shape.min_corner)
            x1, y0 = view.xy(obs.shape.max_corner)
            out.append(f'<rect x="{_n(x0)}" y="{_n(y0)}" width="{_n(x1 - x0)}" height="{_n(y1 - y0)}" '
                       f'fill="#d1e5f0" stroke="#4393c3"/>')
    return out


def _markers(task, view):
    if task is None:
        return []
    out = []
    for label, pose, color in (("x_f", task.x_f, "#b2182b"), ("x_d", task.x_d, "#1a9850")):
        x, y = view.xy(pose.position)
        out.append(f'<path d="M{_n(x - 6)},{_n(y - 6)} L{_n(x + 6)},{_n(y + 6)} M{_n(x - 6)},{_n(y + 6)} '
                   f'L{_n(x + 6)},{_n(y - 6)}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_n(x + 8)}" y="{_n(y + 14)}" font-size="11" fill="{color}">{label}</text>')
    return out


def _scene_points(chain, configs, model, task):
    pts = [joint_positions(chain, configs)[0].reshape(-1, 2)]
    for obs in model.obstacles:
        if isinstance(obs.shape, Circle):
            c, r = np.asarray(obs.shape.center), obs.shape.radius
            pts.append(np.array([c - r, c + r]))
        else:
            pts.append(np.array([obs.shape.min_corner, obs.shape.max_corner]))
    if task is not None:
        pts.append(np.array([task.x_f.position, task.x_d.position]))
    return np.vstack(pts)


def _svg(width, height, body):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n<rect width="100%" height="100%" fill="white"/>\n'
            + "\n".join(body) + "\n</svg>\n")


def frame_indices(n_samples, stride):
    """Sample indices drawn as frames: every ``stride``-th, ``max(1, n // stride)`` of them."""
    if int(stride) != stride or stride < 1:
        raise ValueError(f"stride must be a positive integer, got {stride!r}")
    count = max(1, n_samples // int(stride))
    return list(range(0, count * int(stride), int(stride)))


def render_svg(plan, chain, obstacles=None, frame_stride=1, task=None, dt=FRAME_DT):
    """One SVG document per rendered frame of ``plan``.

    Frames show the links, labeled body points, obstacles, the failure and
    desired markers (when ``task`` is given), a faded copy of the attempt's
    start configuration, and the phase label with the clock.
    """
    if obstacles is None:
        obstacles = task.obstacles if task is not None else CollisionModel()
    times, labels, configs = sample_plan_labeled(plan, dt)
    view = _View(_scene_points(chain, np.vstack([configs, plan.phases[0].waypoints]), obstacles, task))
    xi0 = plan.phases[0].waypoints[-1]
    static = _obstacles(obstacles, view) + _markers(task, view) + _arm(chain, view, xi0, opacity=0.25, labels=False)
    frames = []
    for i in frame_indices(len(times), frame_stride):
        body = list(static)
        body += _arm(chain, view, configs[i])
        body.append(f'<text x="10" y="20" font-size="14">{escape(labels[i])}</text>')
        body.append(f'<text x="10" y="38" font-size="12">t = {times[i]:.2f} s</text>')
        frames.append(_svg(WIDTH, HEIGHT, body))
    return frames


def render_contact_sheet(items, chain, task=None, columns=3, cell=(320, 240)):
    """Grid of attempts, each drawn as its start (faded) and final configuration.

    ``items`` is a sequence of ``(title, trajectory)`` pairs.
    """
    items = list(items)
    if not items:
        raise ValueError("contact sheet needs at least one trajectory")
    model = task.obstacles if task is not None else CollisionModel()
    allq = np.vstack([np.asarray(xi, float) for _, xi in items])
    view = _View(_scene_points(chain, allq, model, task), *cell)
    rows = -(-len(items) // columns)
    w, h = cell[0] * columns, cell[1] * rows
    body = []
    for k, (title, xi) in enumerate(items):
        xi = np.asarray(xi, float)
        ox, oy = (k % columns) * cell[0], (k // columns) * cell[1]
        body.append(f'<g transform="translate({ox},{oy})">')
        body.append(f'<rect width="{cell[0]}" height="{cell[1]}" fill="none" stroke="#cccccc"/>')
        body += _obstacles(model, view) + _markers(task, view)
        body += _arm(chain, view, xi[0], opacity=0.25, labels=False)
        body += _arm(chain, view, xi[-1])
        body.append(f'<text x="8" y="18" font-size="13">{escape(str(title))}</text>')
        body.append("</g>")
    return _svg(w, h, body)
