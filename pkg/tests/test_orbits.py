"""Orbit loops, winding indices, and the fixed-point location pipelines.

Two independent routes back every index claim: an analytic formula
(sign(det(A - I)) for affine maps, chord geometry for rotations) and a
dense float angle-sum oracle over the displacement field.  The adaptive
implementation must agree with both.
"""

import dataclasses
import math
import warnings

import numpy as np
import pytest

from nilfix import geom, lipcalc, orbits
from nilfix.errors import (
    AlreadySimple,
    DegenerateInput,
    EmptyFixSetWarning,
    FixedPointOnCurve,
    OnCurve,
    PreconditionViolated,
    RefinementCap,
    SearchFailed,
    UnboundedOrbit,
)


def regular_loop(n, radius=1.0, center=(0.0, 0.0)):
    return orbits.PolyLoop(
        vertices=tuple(
            (
                center[0] + radius * math.cos(2.0 * math.pi * k / n),
                center[1] + radius * math.sin(2.0 * math.pi * k / n),
            )
            for k in range(n)
        )
    )


def displacement_winding_oracle(f, loop, per_edge=400):
    """Dense angle-sum winding of x -> f(x) - x along the loop.

    No adaptivity: every edge is sampled uniformly and the signed turns
    of consecutive displacement vectors are accumulated.  Valid as long
    as per_edge is dense enough that no single turn exceeds pi.
    """
    pts = []
    verts = list(loop.vertices)
    m = len(verts)
    for i in range(m):
        a = np.array(verts[i])
        b = np.array(verts[(i + 1) % m])
        for t in np.linspace(0.0, 1.0, per_edge, endpoint=False):
            pts.append(a + t * (b - a))
    pts = np.array(pts)
    d = lipcalc.displacement_batch(f, pts, 1e-12)
    ang = np.arctan2(d[:, 1], d[:, 0])
    inc = np.diff(np.concatenate([ang, ang[:1]]))
    inc = (inc + math.pi) % (2.0 * math.pi) - math.pi
    assert float(np.max(np.abs(inc))) < math.pi / 2
    total = float(np.sum(inc)) / (2.0 * math.pi)
    assert abs(total - round(total)) < 1e-6
    return int(round(total))


# -- orbits and recurrence ----------------------------------------------------


def test_iterate_orbit_rotation_stays_on_circle():
    f = lipcalc.rotation_map(0.12)
    rec = orbits.iterate_orbit(f, (1.0, 0.0), 40)
    assert rec.steps == 40
    assert not rec.escaped
    assert rec.base == (1.0, 0.0)
    radii = np.linalg.norm(rec.points, axis=1)
    assert float(np.max(np.abs(radii - 1.0))) < 1e-12


def test_iterate_orbit_escape_flag():
    f = lipcalc.linear_map([[1.4, 0.0], [0.0, 1.4]])
    rec = orbits.iterate_orbit(f, (1.0, 0.0), 100, escape_radius=1e4)
    assert rec.escaped
    assert rec.steps < 100
    with pytest.raises(UnboundedOrbit):
        orbits.detect_recurrence(rec, 0.1)


def test_recurrence_times_match_chord_oracle():
    # chord between p and f^n(p) on the unit circle is 2 |sin(n theta / 2)|
    theta, tol, budget = 0.12, 0.05, 500
    f = lipcalc.rotation_map(theta)
    rec = orbits.iterate_orbit(f, (1.0, 0.0), budget)
    events = orbits.detect_recurrence(rec, tol)
    got = [e.n for e in events]
    want = [
        n
        for n in range(1, budget + 1)
        if 2.0 * abs(math.sin(n * theta / 2.0)) <= tol
    ]
    assert got == want
    assert got[0] == 52
    for e in events:
        assert e.distance == pytest.approx(
            2.0 * abs(math.sin(e.n * theta / 2.0)), abs=1e-10
        )


def test_build_gamma_starts_at_first_image():
    f = lipcalc.rotation_map(0.12)
    loop = orbits.build_gamma(f, (1.0, 0.0), 5)
    assert len(loop.vertices) == 5
    assert loop.vertices[0] == pytest.approx((math.cos(0.12), math.sin(0.12)))


def test_build_gamma_rejects_fixed_base():
    f = lipcalc.rotation_map(0.12)
    with pytest.raises(DegenerateInput):
        orbits.build_gamma(f, (0.0, 0.0), 10)


def test_poly_loop_validation():
    with pytest.raises(DegenerateInput):
        orbits.PolyLoop(vertices=((1.0, 1.0),))
    with pytest.raises(DegenerateInput):
        orbits.PolyLoop(vertices=((0.0, 0.0), (1.0, 0.0), (1.0, 0.0)))
    with pytest.raises(DegenerateInput):
        # closing edge collapses
        orbits.PolyLoop(vertices=((0.0, 0.0), (1.0, 0.0), (0.0, 0.0)))
    square = orbits.PolyLoop(
        vertices=((1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0))
    )
    assert square.diameter() == 2.0
    assert len(square.edges()) == 4


# -- winding and loop surgery -------------------------------------------------


def test_winding_number_square():
    square = orbits.PolyLoop(
        vertices=((1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0))
    )
    assert orbits.winding_number(square, (0.0, 0.0)) == 1
    assert orbits.winding_number(square, (3.0, 0.0)) == 0
    with pytest.raises(OnCurve):
        orbits.winding_number(square, (1.0, 0.0))
    with pytest.raises(OnCurve):
        # inside the default guard band around the curve
        orbits.winding_number(square, (1.0 + 5e-10, 0.0))
    assert orbits.winding_number(square, (1.0 + 1e-6, 0.0)) == 0


def test_max_consecutive_angle_square():
    square = orbits.PolyLoop(
        vertices=((1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0))
    )
    assert orbits.max_consecutive_angle(square) == pytest.approx(math.pi / 2)


def test_extract_simple_loop_bowtie():
    bowtie = orbits.PolyLoop(
        vertices=((0.0, 0.0), (2.0, 2.0), (2.0, 0.0), (0.0, 2.0))
    )
    assert not orbits.is_simple(bowtie)
    with pytest.warns(orbits.AngleConditionWarning):
        cut = orbits.extract_simple_loop(bowtie)
    assert cut.vertices == ((1.0, 1.0), (2.0, 2.0), (2.0, 0.0))
    assert orbits.is_simple(cut)


def test_extract_simple_loop_rotation_gamma():
    # 105 steps of 0.12 wrap past one full turn, so the curve crosses
    # itself once; consecutive chords turn gently, so no angle warning
    f = lipcalc.rotation_map(0.12)
    loop = orbits.build_gamma(f, (1.0, 0.0), 105)
    assert not orbits.is_simple(loop)
    assert orbits.max_consecutive_angle(loop) < math.pi / 2
    with warnings.catch_warnings():
        warnings.simplefilter("error", orbits.AngleConditionWarning)
        cut = orbits.extract_simple_loop(loop)
    assert orbits.is_simple(cut)
    assert orbits.winding_number(cut, (0.0, 0.0)) == 1
    assert orbits.displacement_index(f, cut) == 1


def test_extract_simple_loop_raises_when_simple():
    f = lipcalc.rotation_map(0.12)
    # 52 steps stay short of a full turn: a convex, already simple loop
    loop = orbits.build_gamma(f, (1.0, 0.0), 52)
    assert orbits.is_simple(loop)
    with pytest.raises(AlreadySimple):
        orbits.extract_simple_loop(loop)
    with pytest.raises(AlreadySimple):
        orbits.extract_simple_loop(orbits.PolyLoop(vertices=((0.0, 0.0), (1.0, 0.0))))


# -- displacement index -------------------------------------------------------


def test_displacement_index_affine_matches_determinant_sign():
    loop = regular_loop(16, radius=2.0)
    cases = [
        (lipcalc.rotation_map(0.12), 1),  # det(R - I) = 2 - 2 cos > 0
        (lipcalc.linear_map([[1.2, 0.0], [0.0, 1.1]]), 1),
        (lipcalc.linear_map([[1.1, 0.0], [0.0, 0.9]]), -1),
    ]
    for f, want in cases:
        assert orbits.displacement_index(f, loop) == want
        assert displacement_winding_oracle(f, loop) == want


def test_displacement_index_zero_when_fixed_point_outside():
    f = lipcalc.poly_field_map(0.01, [(-1.0, 0.0), (1.0, 0.0)], (-3.0, 3.0, -3.0, 3.0))
    around_one = regular_loop(16, radius=0.5, center=(1.0, 0.0))
    around_none = regular_loop(16, radius=0.5, center=(0.0, 2.0))
    around_both = regular_loop(16, radius=2.0)
    assert orbits.displacement_index(f, around_one) == 1
    assert orbits.displacement_index(f, around_none) == 0
    assert orbits.displacement_index(f, around_both) == 2
    assert displacement_winding_oracle(f, around_both) == 2


def test_displacement_index_rejects_fixed_point_on_curve():
    f = lipcalc.rotation_map(0.12)
    through_origin = orbits.PolyLoop(vertices=((0.0, 0.0), (1.0, 0.0), (0.0, 1.0)))
    with pytest.raises(FixedPointOnCurve):
        orbits.displacement_index(f, through_origin)
    with pytest.raises(PreconditionViolated):
        orbits.displacement_index(f, regular_loop(8), samples=2)


# -- quadtree fixed-point candidates ------------------------------------------


def test_fixed_point_candidates_rotation_finds_center():
    f = lipcalc.rotation_map(0.12)
    found = orbits.fixed_point_candidates(f, (-2.0, 2.0, -2.0, 2.0), tol=1e-4)
    assert len(found) == 1
    assert math.hypot(*found[0]) < 1e-3


def test_fixed_point_candidates_translation_empty():
    f = lipcalc.translation_map((0.5, 0.0))
    assert orbits.fixed_point_candidates(f, (-2.0, 2.0, -2.0, 2.0), tol=1e-3) == []


def test_fixed_point_candidates_poly_roots():
    # steep enough that the certified keep-rule prunes to two clusters
    # within the default cell budget
    box = (-1.0, 1.0, -1.0, 1.0)
    f = lipcalc.poly_field_map(0.1, [(-0.5, 0.0), (0.5, 0.0)], box)
    found = orbits.fixed_point_candidates(f, box, tol=1e-3)
    assert len(found) == 2
    assert math.hypot(found[0][0] + 0.5, found[0][1]) < 2e-2
    assert math.hypot(found[1][0] - 0.5, found[1][1]) < 2e-2


def test_fixed_point_candidates_cell_cap():
    f = lipcalc.rotation_map(0.12)
    with pytest.raises(RefinementCap):
        orbits.fixed_point_candidates(f, (-2.0, 2.0, -2.0, 2.0), tol=1e-6, cell_cap=10)


def test_fixed_point_candidates_rejects_large_eps():
    near_flip = lipcalc.linear_map([[-1.1, 0.0], [0.0, -1.1]])
    assert near_flip.eps > 1.0
    with pytest.raises(PreconditionViolated):
        orbits.fixed_point_candidates(near_flip, (-1.0, 1.0, -1.0, 1.0))


# -- capital points -----------------------------------------------------------


def test_capital_point_check_rotation():
    # the curve through n steps of 0.12 winds round(n * 0.12 / 2 pi) times
    f = lipcalc.rotation_map(0.12)
    rec = orbits.iterate_orbit(f, (1.0, 0.0), 200)
    events = orbits.detect_recurrence(rec, 0.05)
    report = orbits.capital_point_check(f, (1.0, 0.0), (0.0, 0.0), events)
    assert report.capital
    assert report.tested == (52, 105, 157)
    for n, ind in report.indices.items():
        assert ind == round(n * 0.12 / (2.0 * math.pi))
    record = report.to_json_dict()
    assert record["pass"] is True
    assert record["measured"]["52"] == 1


def test_capital_point_check_detects_outside_point():
    f = lipcalc.rotation_map(0.12)
    report = orbits.capital_point_check(
        f, (1.0, 0.0), (5.0, 5.0), [], m_list=[52, 105]
    )
    assert not report.capital
    assert report.indices == {52: 0, 105: 0}
    with pytest.raises(PreconditionViolated):
        orbits.capital_point_check(f, (1.0, 0.0), (0.0, 0.0), [])


# -- attainment sets ----------------------------------------------------------


def test_sample_group_orbit_commuting_rotations():
    maps = [lipcalc.rotation_map(0.12), lipcalc.rotation_map(0.07)]
    pts = orbits.sample_group_orbit(maps, (1.0, 0.0), 128)
    assert len(pts) <= 129
    radii = np.linalg.norm(pts, axis=1)
    assert float(np.max(np.abs(radii - 1.0))) < 1e-9
    with pytest.raises(PreconditionViolated):
        orbits.sample_group_orbit([], (1.0, 0.0), 16)
    with pytest.raises(UnboundedOrbit):
        expanding = lipcalc.linear_map([[1.4, 0.0], [0.0, 1.4]])
        orbits.sample_group_orbit([expanding], (1.0, 0.0), 256, escape_radius=10.0)


def test_attainment_sets_rotation():
    f = lipcalc.rotation_map(0.12)
    sets = orbits.attainment_sets([f], f, (1.0, 0.0))
    # chords of the unit circle under a 0.12 step pass within cos(0.06)
    # of the center, the only fixed point
    assert sets.eps_g == pytest.approx(math.cos(0.06), abs=1e-3)
    assert len(sets.fix_points) == 1
    assert math.hypot(*sets.fix_points[0]) < 1e-3
    assert sets.b_contains((0.0, 0.0))
    assert sets.b_contains((1.0, 0.0))
    assert not sets.b_contains((5.0, 5.0))


def test_attainment_sets_empty_fix_set_warns():
    f = lipcalc.translation_map((0.3, 0.0))
    with pytest.warns(EmptyFixSetWarning):
        sets = orbits.attainment_sets([f], f, (0.0, 0.0), word_budget=64)
    assert sets.eps_g == float("inf")
    assert sets.fix_points == ()


# -- fixed-point location -----------------------------------------------------


def test_locate_closure_certificate_contraction():
    f = lipcalc.linear_map([[0.9, 0.0], [0.0, 0.9]])
    res = orbits.locate_fixed_point(f, (1.0, 0.0))
    assert res.certificate == "closure"
    assert math.hypot(*res.q) < 2e-5
    assert res.displacement <= 1e-6


def test_locate_enclosed_certificate_rotation():
    f = lipcalc.rotation_map(0.12)
    res = orbits.locate_fixed_point(f, (1.0, 0.0))
    assert res.certificate == "enclosed"
    assert math.hypot(*res.q) < 1e-6
    assert all(ind != 0 for ind in res.details["indices"].values())
    payload = res.to_json_dict()
    assert "orbit" not in payload["details"]


def test_locate_requires_certified_bound():
    wide = lipcalc.rotation_map(0.9)
    assert wide.eps > lipcalc.EPS_U
    with pytest.raises(PreconditionViolated):
        orbits.locate_fixed_point(wide, (1.0, 0.0))
    sampled = dataclasses.replace(lipcalc.rotation_map(0.12), provenance="estimated")
    with pytest.raises(PreconditionViolated):
        orbits.locate_fixed_point(sampled, (1.0, 0.0))
    cfg = orbits.LocateConfig(allow_uncertified=True)
    res = orbits.locate_fixed_point(sampled, (1.0, 0.0), cfg)
    assert res.certificate == "enclosed"


def test_locate_fails_on_degenerate_hull():
    f = lipcalc.translation_map((0.1, 0.0))
    cfg = orbits.LocateConfig(orbit_budget=50)
    with pytest.raises(SearchFailed):
        orbits.locate_fixed_point(f, (0.0, 0.0), cfg)


def test_locate_unbounded_orbit():
    f = lipcalc.linear_map([[1.1, 0.0], [0.0, 1.1]])
    assert f.eps <= lipcalc.EPS_U
    cfg = orbits.LocateConfig(orbit_budget=500, escape_radius=100.0)
    with pytest.raises(UnboundedOrbit):
        orbits.locate_fixed_point(f, (1.0, 0.0), cfg)


def test_locate_global_commuting_rotations():
    center = (0.3, 0.2)
    maps = [
        lipcalc.rotation_map(0.12, center=center),
        lipcalc.rotation_map(0.07, center=center),
    ]
    result = orbits.locate_global_fixed_point(maps, (1.0, 0.0))
    assert math.hypot(result.q[0] - center[0], result.q[1] - center[1]) < 1e-6
    assert len(result.stages) == 2
    for stage in result.stages:
        assert stage.inclusion_ok
        assert max(stage.displacements) <= 1e-6
    payload = result.to_json_dict()
    assert payload["stages"][0]["stage"] == 1
    with pytest.raises(PreconditionViolated):
        orbits.locate_global_fixed_point([], (1.0, 0.0))


def test_curve_separation():
    inner = regular_loop(8, radius=1.0)
    outer = regular_loop(8, radius=3.0)
    sep = orbits.curve_separation(inner, outer)
    # distance from the outer polygon to the inner one is attained
    # between a vertex of the inner loop and an edge of the outer
    assert 3.0 * math.cos(math.pi / 8) - 1.0 <= sep + 1e-9
    assert sep <= 2.0
