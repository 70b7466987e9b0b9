"""Exact planar predicates against float oracles and brute force."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilfix import geom


def winding_by_angle_sum(vertices, q):
    """Float oracle: total signed turn of vertex angles around q over 2pi."""
    total = 0.0
    n = len(vertices)
    for i in range(n):
        ax, ay = vertices[i][0] - q[0], vertices[i][1] - q[1]
        bx, by = vertices[(i + 1) % n][0] - q[0], vertices[(i + 1) % n][1] - q[1]
        total += math.atan2(ax * by - ay * bx, ax * bx + ay * by)
    return total / (2.0 * math.pi)


coord = st.integers(-8, 8)
point = st.tuples(coord, coord)


@given(st.lists(point, min_size=3, max_size=10), point)
@settings(max_examples=200, deadline=None)
def test_winding_matches_angle_sum(vertices, q):
    # keep q off the polygon so both routes are well defined
    if geom.polyline_point_distance(vertices, q, closed=True) < 1e-9:
        return
    expect = winding_by_angle_sum(vertices, q)
    got = geom.winding_number(vertices, q)
    assert got == round(expect)
    assert abs(expect - round(expect)) < 0.49


def test_winding_known_square():
    sq = [(1, 1), (-1, 1), (-1, -1), (1, -1)]
    assert geom.winding_number(sq, (0, 0)) == 1
    assert geom.winding_number(list(reversed(sq)), (0, 0)) == -1
    assert geom.winding_number(sq, (3, 0)) == 0


def test_orient_is_exact_for_tiny_slivers():
    # doubles would round this determinant to zero
    a, b = (0.0, 0.0), (1e-9, 1e-9)
    c = (2e-9, 3e-9 + 1e-24)
    assert geom.orient(a, b, c) == 1
    assert geom.orient(a, b, (2e-9, 2e-9)) == 0


@given(st.lists(point, min_size=1, max_size=30))
@settings(max_examples=150, deadline=None)
def test_convex_hull_contains_all_points(points):
    hull = geom.convex_hull(points)
    assert all(geom.point_in_convex_polygon(hull, p, strict=False) for p in points)
    # hull vertices are a subset of the input
    assert all(tuple(v) in {tuple(p) for p in points} for v in hull)


@given(st.lists(point, min_size=3, max_size=20))
@settings(max_examples=100, deadline=None)
def test_convex_hull_is_convex(points):
    hull = geom.convex_hull(points)
    n = len(hull)
    if n < 3:
        return
    for i in range(n):
        a, b, c = hull[i], hull[(i + 1) % n], hull[(i + 2) % n]
        assert geom.orient(a, b, c) >= 0


def test_segment_point_distance_matches_numpy():
    rng = np.random.default_rng(3)
    for _ in range(200):
        a, b, p = rng.normal(size=(3, 2))
        ts = np.linspace(0.0, 1.0, 2001)
        pts = a[None, :] + ts[:, None] * (b - a)[None, :]
        brute = float(np.min(np.linalg.norm(pts - p, axis=1)))
        got = geom.segment_point_distance(tuple(a), tuple(b), tuple(p))
        assert got == pytest.approx(brute, abs=1e-5)
        assert got <= brute + 1e-12


def test_closed_segment_intersection_predicate():
    assert geom.segments_intersect((0, 0), (2, 2), (0, 2), (2, 0))
    # closed-segment semantics: endpoint touching and collinear overlap count
    assert geom.segments_intersect((0, 0), (1, 1), (1, 1), (2, 0))
    assert geom.segments_intersect((0, 0), (2, 0), (1, 0), (3, 0))
    assert not geom.segments_intersect((0, 0), (1, 0), (0, 1), (1, 1))


def test_segment_intersection_parameter_is_exact():
    hit = geom.segment_intersection((0, 0), (2, 0), (1, -1), (1, 1))
    assert hit is not None
    t, x, y = hit
    assert (t, x, y) == (Fraction(1, 2), Fraction(1), Fraction(0))
    # parallel disjoint segments have no crossing
    assert geom.segment_intersection((0, 0), (1, 0), (0, 1), (1, 1)) is None


def test_angle_between_and_signed_turn():
    assert geom.angle_between((1, 0), (0, 1)) == pytest.approx(math.pi / 2)
    assert geom.signed_turn((1, 0), (0, 1)) == pytest.approx(math.pi / 2)
    assert geom.signed_turn((1, 0), (0, -1)) == pytest.approx(-math.pi / 2)
    assert geom.angle_between((1, 1), (1, 1)) == 0.0


def test_distance_to_convex_polygon():
    hull = [(1, 1), (-1, 1), (-1, -1), (1, -1)]
    assert geom.distance_to_convex_polygon(hull, (0.0, 0.0)) == 0.0
    assert geom.distance_to_convex_polygon(hull, (2.0, 0.0)) == pytest.approx(1.0)
    assert geom.distance_to_convex_polygon(hull, (2.0, 2.0)) == pytest.approx(math.sqrt(2))
