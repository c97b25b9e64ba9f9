"""Planar geometry: polygon validation and segment/footprint occlusion tests.

Everything operates on plain numpy arrays so it stays independent of the
scenario types.
"""
from __future__ import annotations

import numpy as np

# Crossings closer than this (as a fraction of segment length) to either
# endpoint are ignored, so a source sitting exactly on a wall does not
# occlude itself.
_ENDPOINT_TOL = 1e-9


def _cross2(ax, ay, bx, by):
    return ax * by - ay * bx


def polygon_is_simple(vertices: np.ndarray) -> bool:
    """True if the closed polygon has no self-intersections.

    Adjacent edges sharing a vertex are allowed; any other contact
    (crossing or touching) makes the polygon non-simple.
    """
    v = np.asarray(vertices, dtype=float)
    n = len(v)
    if n < 3:
        return False
    edges = [(v[i], v[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        a1, a2 = edges[i]
        if np.allclose(a1, a2):
            return False  # degenerate edge
        for j in range(i + 1, n):
            adjacent = j == i + 1 or (i == 0 and j == n - 1)
            if adjacent:
                continue
            b1, b2 = edges[j]
            if _segments_touch(a1, a2, b1, b2):
                return False
    return True


def _segments_touch(p1, p2, q1, q2) -> bool:
    r = p2 - p1
    s = q2 - q1
    den = _cross2(r[0], r[1], s[0], s[1])
    qp = q1 - p1
    if abs(den) < 1e-15:
        # Parallel: overlap only if collinear and the 1D projections meet.
        if abs(_cross2(qp[0], qp[1], r[0], r[1])) > 1e-12:
            return False
        t0 = np.dot(qp, r) / np.dot(r, r)
        t1 = np.dot(q2 - p1, r) / np.dot(r, r)
        lo, hi = min(t0, t1), max(t0, t1)
        return hi >= 0.0 and lo <= 1.0
    t = _cross2(qp[0], qp[1], s[0], s[1]) / den
    u = _cross2(qp[0], qp[1], r[0], r[1]) / den
    return 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0


def segment_edge_params(origin_xy: np.ndarray, targets_xy: np.ndarray,
                        edge_a: np.ndarray, edge_b: np.ndarray):
    """Intersection parameters of origin->target segments with one edge.

    Returns (hit, t): boolean mask over targets and the segment parameter
    t in (0, 1) at the crossing point.  Endpoint grazes are excluded.
    """
    r = targets_xy - origin_xy  # (M, 2)
    s = edge_b - edge_a
    den = r[:, 0] * s[1] - r[:, 1] * s[0]
    qp = edge_a - origin_xy
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (qp[0] * s[1] - qp[1] * s[0]) / den
        u = (qp[0] * r[:, 1] - qp[1] * r[:, 0]) / den
    hit = (np.abs(den) > 1e-15) \
        & (t > _ENDPOINT_TOL) & (t < 1.0 - _ENDPOINT_TOL) \
        & (u >= -1e-12) & (u <= 1.0 + 1e-12)
    return hit, t


def count_blocking_footprints(origin: np.ndarray, targets: np.ndarray,
                              footprints: list[tuple[np.ndarray, float]]) -> np.ndarray:
    """Number of footprints occluding each origin->target 3D segment.

    A footprint (polygon, height) blocks a segment when the segment
    crosses one of its edges in plan view at a point where the linearly
    interpolated segment height is below the footprint height.
    """
    origin = np.asarray(origin, dtype=float)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    m = len(targets)
    counts = np.zeros(m, dtype=np.int64)
    o_xy = origin[:2]
    o_z = origin[2]
    dz = targets[:, 2] - o_z
    for polygon, height in footprints:
        blocked = np.zeros(m, dtype=bool)
        nv = len(polygon)
        for i in range(nv):
            a = polygon[i]
            b = polygon[(i + 1) % nv]
            hit, t = segment_edge_params(o_xy, targets[:, :2], a, b)
            if not hit.any():
                continue
            z_at = o_z + t * dz
            blocked |= hit & (z_at < height)
        counts += blocked
    return counts
