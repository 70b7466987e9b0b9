"""Exact planar predicates and small geometric utilities.

Vertices are (x, y) pairs of floats.  Predicates that decide topology
(orientation, crossing counts, segment intersection) are evaluated in
exact rational arithmetic: every float is a dyadic rational, so
converting through fractions.Fraction loses nothing and the returned
signs are exact for the given coordinates.  Metric quantities
(distances, angles) are plain float.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Optional, Sequence

from .errors import DegenerateInput

Point = tuple[float, float]


def _fr(p: Sequence[float]) -> tuple[Fraction, Fraction]:
    return (Fraction(float(p[0])), Fraction(float(p[1])))


def orient(a: Sequence[float], b: Sequence[float], c: Sequence[float]) -> int:
    """Sign of the cross product (b-a) x (c-a): +1 left turn, -1 right, 0 collinear."""
    ax, ay = _fr(a)
    bx, by = _fr(b)
    cx, cy = _fr(c)
    d = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (d > 0) - (d < 0)


def winding_number(vertices: Sequence[Point], q: Sequence[float]) -> int:
    """Winding number of the closed polygon around q via exact crossing counts.

    Uses the half-open vertical rule (an edge covers [min_y, max_y) of its
    span), which resolves vertices lying exactly on the horizontal ray
    deterministically; together with exact orientation signs this is the
    rational-perturbation scheme.  The caller must ensure q is off the curve.
    """
    if len(vertices) < 3:
        raise DegenerateInput("polygon needs at least 3 vertices")
    qx, qy = _fr(q)
    total = 0
    n = len(vertices)
    for i in range(n):
        ax, ay = _fr(vertices[i])
        bx, by = _fr(vertices[(i + 1) % n])
        if ay <= qy < by:
            side = (bx - ax) * (qy - ay) - (by - ay) * (qx - ax)
            if side > 0:
                total += 1
        elif by <= qy < ay:
            side = (bx - ax) * (qy - ay) - (by - ay) * (qx - ax)
            if side < 0:
                total -= 1
    return total


def segment_point_distance(a: Point, b: Point, p: Sequence[float]) -> float:
    """Euclidean distance from p to the closed segment [a, b]."""
    ax, ay = a
    bx, by = b
    px, py = float(p[0]), float(p[1])
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / L2
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def polyline_point_distance(vertices: Sequence[Point], p: Sequence[float], closed: bool = True) -> float:
    """Min distance from p to the polygonal curve through vertices."""
    n = len(vertices)
    if n == 0:
        raise DegenerateInput("empty polyline")
    if n == 1:
        return math.hypot(float(p[0]) - vertices[0][0], float(p[1]) - vertices[0][1])
    last = n if closed else n - 1
    return min(
        segment_point_distance(vertices[i], vertices[(i + 1) % n], p)
        for i in range(last)
    )


def segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    """True if [p1,p2] and [q1,q2] share at least one point (exact test)."""
    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True

    def on_seg(a: Point, b: Point, c: Point) -> bool:
        if orient(a, b, c) != 0:
            return False
        ax, ay = _fr(a)
        bx, by = _fr(b)
        cx, cy = _fr(c)
        return min(ax, bx) <= cx <= max(ax, bx) and min(ay, by) <= cy <= max(ay, by)

    return on_seg(q1, q2, p1) or on_seg(q1, q2, p2) or on_seg(p1, p2, q1) or on_seg(p1, p2, q2)


def segment_intersection(
    p1: Point, p2: Point, q1: Point, q2: Point
) -> Optional[tuple[Fraction, Fraction, Fraction]]:
    """First proper crossing of [p1,p2] with [q1,q2].

    Returns (t, x, y) with t the exact parameter along p1->p2, or None when
    the segments do not cross transversally in their interiors or at an
    endpoint of exactly one of them.  Collinear overlap returns None; the
    loop-extraction caller treats that case through the proper-intersection
    test and refuses such degenerate input.
    """
    p1x, p1y = _fr(p1)
    p2x, p2y = _fr(p2)
    q1x, q1y = _fr(q1)
    q2x, q2y = _fr(q2)
    rx, ry = p2x - p1x, p2y - p1y
    sx, sy = q2x - q1x, q2y - q1y
    denom = rx * sy - ry * sx
    if denom == 0:
        return None
    t = ((q1x - p1x) * sy - (q1y - p1y) * sx) / denom
    u = ((q1x - p1x) * ry - (q1y - p1y) * rx) / denom
    if 0 <= t <= 1 and 0 <= u <= 1:
        return (t, p1x + t * rx, p1y + t * ry)
    return None


def segment_segment_distance(p1: Point, p2: Point, q1: Point, q2: Point) -> float:
    """Euclidean distance between two closed segments."""
    if segments_intersect(p1, p2, q1, q2):
        return 0.0
    return min(
        segment_point_distance(q1, q2, p1),
        segment_point_distance(q1, q2, p2),
        segment_point_distance(p1, p2, q1),
        segment_point_distance(p1, p2, q2),
    )


def convex_hull(points: Sequence[Point]) -> list[Point]:
    """Convex hull in counterclockwise order (monotone chain, exact turns).

    Collinear input returns the two extreme points; a single distinct point
    returns a singleton.  Strictly collinear interior points are dropped.
    """
    pts = sorted(set((float(x), float(y)) for x, y in points))
    if not pts:
        raise DegenerateInput("no points")
    if len(pts) <= 2:
        return pts

    def half(seq: Sequence[Point]) -> list[Point]:
        out: list[Point] = []
        for p in seq:
            while len(out) >= 2 and orient(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(list(reversed(pts)))
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        return [pts[0], pts[-1]]
    return hull


def point_in_convex_polygon(hull: Sequence[Point], p: Sequence[float], strict: bool = True) -> bool:
    """Exact membership of p in a counterclockwise convex polygon.

    Degenerate hulls (point or segment) contain nothing strictly; with
    strict=False they contain exactly their own points.
    """
    n = len(hull)
    if n == 0:
        return False
    if n < 3:
        if strict:
            return False
        return polyline_point_distance(list(hull), p, closed=False) == 0.0
    lo = 1 if strict else 0
    for i in range(n):
        if orient(hull[i], hull[(i + 1) % n], p) < lo:
            return False
    return True


def distance_to_convex_polygon(hull: Sequence[Point], p: Sequence[float]) -> float:
    """Distance from p to the convex region (0 inside); handles degenerate hulls."""
    if len(hull) >= 3 and point_in_convex_polygon(hull, p, strict=False):
        return 0.0
    return polyline_point_distance(list(hull), p, closed=len(hull) >= 3)


def angle_between(u: Sequence[float], v: Sequence[float]) -> float:
    """Unsigned angle between two nonzero vectors, in [0, pi].

    atan2 of (|cross|, dot) stays accurate near 0 and pi, where the
    arccos-of-dot form loses half the significant digits.
    """
    ux, uy = float(u[0]), float(u[1])
    vx, vy = float(v[0]), float(v[1])
    if (ux == 0.0 and uy == 0.0) or (vx == 0.0 and vy == 0.0):
        raise DegenerateInput("angle of zero vector")
    return math.atan2(abs(ux * vy - uy * vx), ux * vx + uy * vy)


def signed_turn(u: Sequence[float], v: Sequence[float]) -> float:
    """Signed angle from u to v in (-pi, pi]."""
    ux, uy = float(u[0]), float(u[1])
    vx, vy = float(v[0]), float(v[1])
    return math.atan2(ux * vy - uy * vx, ux * vx + uy * vy)
