"""Compiled scalar kernels for segment-obstacle signed distance.

The vectorized numpy forms in :mod:`collision` are exact but dominated by
per-call overhead on the small batches the optimizer evaluates; these loops
compute the same quantities one segment at a time.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_FACE_DIRS = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


@njit(cache=True)
def _closest(px, py, ax, ay, bx, by):
    dx, dy = bx - ax, by - ay
    den = dx * dx + dy * dy
    s = 0.0
    if den > 0:
        s = ((px - ax) * dx + (py - ay) * dy) / den
        s = min(max(s, 0.0), 1.0)
    return s, ax + s * dx, ay + s * dy


@njit(cache=True)
def circle_terms(A, B, cx, cy, radius):
    n = A.shape[0]
    d = np.empty(n)
    dA = np.zeros((n, 2))
    dB = np.zeros((n, 2))
    for m in range(n):
        s, qx, qy = _closest(cx, cy, A[m, 0], A[m, 1], B[m, 0], B[m, 1])
        ux, uy = qx - cx, qy - cy
        dist = np.sqrt(ux * ux + uy * uy)
        if dist > 0:
            ux /= dist
            uy /= dist
        d[m] = dist - radius
        dA[m, 0], dA[m, 1] = (1 - s) * ux, (1 - s) * uy
        dB[m, 0], dB[m, 1] = s * ux, s * uy
    return d, dA, dB


@njit(cache=True)
def box_terms(A, B, lo, hi):
    n = A.shape[0]
    d = np.empty(n)
    dA = np.zeros((n, 2))
    dB = np.zeros((n, 2))
    c = np.empty(4)
    g = np.empty(4)
    cands = np.empty(8)
    faces = np.empty(4)
    corners = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    for m in range(n):
        ax, ay, bx, by = A[m, 0], A[m, 1], B[m, 0], B[m, 1]
        Dx, Dy = bx - ax, by - ay
        c[0], c[1], c[2], c[3] = ax - lo[0], hi[0] - ax, ay - lo[1], hi[1] - ay
        g[0], g[1], g[2], g[3] = Dx, -Dx, Dy, -Dy
        # inside-depth min_f(c_f + g_f s) is concave in s: best at an endpoint or a face crossing
        cands[0], cands[1] = 0.0, 1.0
        k = 2
        for i in range(4):
            for j in range(i + 1, 4):
                dg = g[i] - g[j]
                s = (c[j] - c[i]) / dg if dg != 0 else 0.0
                cands[k] = min(max(s, 0.0), 1.0)
                k += 1
        depth = -np.inf
        s_in = 0.0
        for k in range(8):
            v = np.inf
            for f in range(4):
                v = min(v, c[f] + g[f] * cands[k])
            if v > depth:
                depth, s_in = v, cands[k]

        if depth > 0:
            for f in range(4):
                faces[f] = c[f] + g[f] * s_in
            fi = 0
            for f in range(1, 4):
                if faces[f] < faces[fi]:
                    fi = f
            fj = -1
            for f in range(4):
                if f != fi and (fj < 0 or faces[f] < faces[fj]):
                    fj = f
            ux, uy = _FACE_DIRS[fi, 0], _FACE_DIRS[fi, 1]
            u = g[fi] - g[fj]
            tie = faces[fj] - faces[fi] <= 1e-12 * (1 + abs(depth))
            d[m] = -depth
            if tie and 0 < s_in < 1 and u != 0:
                # depth = (c_j g_i - c_i g_j) / (g_i - g_j) at the crossing of faces i and j
                vx, vy = _FACE_DIRS[fj, 0], _FACE_DIRS[fj, 1]
                N = c[fj] * g[fi] - c[fi] * g[fj]
                for ax_ in range(2):
                    di = ux if ax_ == 0 else uy
                    dj = vx if ax_ == 0 else vy
                    dN_A = dj * g[fi] - c[fj] * di - di * g[fj] + c[fi] * dj
                    dN_B = c[fj] * di - c[fi] * dj
                    dA[m, ax_] = -(dN_A * u - N * (dj - di)) / (u * u)
                    dB[m, ax_] = -(dN_B * u - N * (di - dj)) / (u * u)
            else:
                dA[m, 0], dA[m, 1] = -(1 - s_in) * ux, -(1 - s_in) * uy
                dB[m, 0], dB[m, 1] = -s_in * ux, -s_in * uy
            continue

        # separated: nearest pair is an endpoint vs the box or a corner vs the segment
        best = np.inf
        s_out = 0.0
        nx = ny = 0.0
        for e in range(2):
            px, py = (ax, ay) if e == 0 else (bx, by)
            ex = px - min(max(px, lo[0]), hi[0])
            ey = py - min(max(py, lo[1]), hi[1])
            dist = np.sqrt(ex * ex + ey * ey)
            if dist < best:
                best, s_out, nx, ny = dist, float(e), ex, ey
        for q in range(4):
            s, qx, qy = _closest(corners[q, 0], corners[q, 1], ax, ay, bx, by)
            ex, ey = qx - corners[q, 0], qy - corners[q, 1]
            dist = np.sqrt(ex * ex + ey * ey)
            if dist < best:
                best, s_out, nx, ny = dist, s, ex, ey
        if best > 0:
            nx /= best
            ny /= best
        d[m] = best
        dA[m, 0], dA[m, 1] = (1 - s_out) * nx, (1 - s_out) * ny
        dB[m, 0], dB[m, 1] = s_out * nx, s_out * ny
    return d, dA, dB
