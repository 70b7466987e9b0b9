"""Bound calculus, the level table, and the sampled displacement checks.

The frozen rationals below were derived by hand from the propagation rules
compose a+b+ab, inverse a/(1-a), commutator min(2(ab+a+b)/((1-a)(1-b)),
6 max(a,b) when both <= 1/9), isotopy t*a, before the implementation ran.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilfix import lipcalc
from nilfix.errors import (
    BoundDiverges,
    DegenerateInput,
    PreconditionViolated,
)


def leaf(eps):
    """Synthetic analytic leaf carrying an exact rational bound."""
    return lipcalc.certify(
        lipcalc.MapExpr("rotation", {"theta": 0.0, "center": (0.0, 0.0), "eps": eps})
    )


# -- level table -------------------------------------------------------------


def test_epsilon_table_frozen_values():
    expect = [
        Fraction(1, 8),
        Fraction(1, 9),
        Fraction(1, 54),
        Fraction(1, 1944),
        Fraction(1, 419904),
        Fraction(1, 544195584),
    ]
    for sigma, want in enumerate(expect):
        eps, delta = lipcalc.epsilon_sigma(sigma)
        assert eps == want
        if sigma + 1 < len(expect):
            assert delta == expect[sigma + 1]
    assert expect[5] == Fraction(1, 9 * 6**10)


def test_epsilon_table_nesting_and_delta():
    table = lipcalc.LipClassTable()
    for sigma in range(12):
        assert table.eps(sigma + 1) < table.eps(sigma)
        assert table.delta(sigma) == table.eps(sigma + 1)


def test_level_of_classifies():
    table = lipcalc.LipClassTable()
    assert table.level_of(Fraction(1, 5)) is None
    assert table.level_of(Fraction(1, 8)) == 0
    assert table.level_of(Fraction(1, 9)) == 1
    assert table.level_of(Fraction(1, 60)) == 2
    # a zero bound is in every class: no deepest level to report
    with pytest.raises(PreconditionViolated):
        table.level_of(0.0)


def test_epsilon_sigma_rejects_bad_levels():
    with pytest.raises(PreconditionViolated):
        lipcalc.epsilon_sigma(-1)


# -- bound propagation: frozen exact values ----------------------------------


def test_compose_bound_frozen():
    f = leaf(Fraction(1, 9))
    assert lipcalc.compose_maps(f, f).eps == Fraction(19, 81)


def test_inverse_bound_frozen():
    assert lipcalc.inverse_map(leaf(Fraction(1, 9))).eps == Fraction(1, 8)


def test_commutator_bound_frozen_tight_wins_at_ninth():
    f = leaf(Fraction(1, 9))
    # tight form 19/32 beats 6*max = 2/3
    assert lipcalc.commutator_map(f, f).eps == Fraction(19, 32)


def test_commutator_bound_frozen_above_ninth():
    f = leaf(Fraction(1, 8))
    # 6*max is only available under the 1/9 hypothesis
    assert lipcalc.commutator_map(f, f).eps == Fraction(34, 49)


def test_isotopy_bound_frozen():
    f = leaf(Fraction(1, 9))
    assert lipcalc.isotopy_stage(f, Fraction(1, 2)).eps == Fraction(1, 18)
    # a float parameter degrades gracefully to a float bound
    assert lipcalc.isotopy_stage(f, 0.5).eps == pytest.approx(1.0 / 18.0)


def test_inverse_bound_diverges_at_one():
    with pytest.raises(BoundDiverges):
        lipcalc.inverse_map(leaf(Fraction(1)))


small = st.fractions(min_value=0, max_value=Fraction(1, 9), max_denominator=200)


@given(small, small)
@settings(max_examples=100, deadline=None)
def test_commutator_bound_never_exceeds_six_max(a, b):
    got = lipcalc.commutator_map(leaf(a), leaf(b)).eps
    assert got <= 6 * max(a, b)
    tight = 2 * (a * b + a + b) / ((1 - a) * (1 - b)) if a < 1 and b < 1 else None
    assert got <= tight


@given(small, small, small)
@settings(max_examples=60, deadline=None)
def test_compose_bound_monotone(a, b, c):
    f, g = leaf(a), leaf(b)
    assert lipcalc.compose_maps(f, g).eps == lipcalc.compose_maps(g, f).eps
    if c >= b:
        assert (
            lipcalc.compose_maps(f, leaf(c)).eps >= lipcalc.compose_maps(f, g).eps
        )


# -- constructors ------------------------------------------------------------


def test_rotation_map_eps_and_evaluation():
    theta = 0.12
    rot = lipcalc.rotation_map(theta)
    assert rot.eps == pytest.approx(2.0 * math.sin(theta / 2.0))
    assert rot.provenance == "analytic"
    got = lipcalc.evaluate(rot, (1.0, 0.0))
    assert got[0] == pytest.approx(math.cos(theta))
    assert got[1] == pytest.approx(math.sin(theta))


def test_translation_and_identity():
    tr = lipcalc.translation_map((0.3, -0.1))
    assert tr.eps == 0
    got = lipcalc.evaluate(tr, (1.0, 2.0))
    assert got == (pytest.approx(1.3), pytest.approx(1.9))
    ident = lipcalc.identity_map()
    assert ident.eps == 0
    assert lipcalc.evaluate(ident, (0.5, 0.5)) == (0.5, 0.5)


def test_linear_map_eps_is_operator_norm():
    # A - I has singular values 0.2 and 0.1
    A = [[1.2, 0.0], [0.0, 1.1]]
    m = lipcalc.linear_map(A)
    assert m.eps == pytest.approx(0.2)


def test_sin_shear_eps_exact():
    m = lipcalc.sin_shear_map(0.05, axis="x", freq=2.0)
    assert m.eps == pytest.approx(0.1)
    got = lipcalc.evaluate(m, (1.0, 0.25))
    assert got[0] == pytest.approx(1.0 + 0.05 * math.sin(0.5))


def test_poly_field_map_bound_and_roots_fixed():
    box = (-2.0, 2.0, -2.0, 2.0)
    m = lipcalc.poly_field_map(0.01, [(1.0, 0.0), (-1.0, 0.0)], box)
    # analytic bound: |c| * (R_1 + R_2), R_i = max corner distance
    R = math.hypot(3.0, 2.0)
    assert m.eps == pytest.approx(0.01 * 2 * R)
    for root in ((1.0, 0.0), (-1.0, 0.0)):
        got = lipcalc.evaluate(m, root)
        assert got == (pytest.approx(root[0]), pytest.approx(root[1]))


# -- soundness of the propagated bound against sampled quotients -------------


def sampled_quotient(cmap, rng, pairs=400, span=3.0):
    z = rng.uniform(-span, span, size=(pairs, 2))
    w = rng.uniform(-span, span, size=(pairs, 2))
    dz = lipcalc.displacement_batch(cmap, z, 1e-12)
    dw = lipcalc.displacement_batch(cmap, w, 1e-12)
    num = np.linalg.norm(dz - dw, axis=1)
    den = np.linalg.norm(z - w, axis=1)
    ok = den > 1e-9
    return float(np.max(num[ok] / den[ok]))


def test_propagated_bounds_dominate_sampled_quotients():
    rng = np.random.default_rng(7)
    rot = lipcalc.rotation_map(0.11)
    shear = lipcalc.sin_shear_map(0.03, freq=1.5)
    cases = [
        lipcalc.compose_maps(rot, shear),
        lipcalc.inverse_map(rot),
        lipcalc.commutator_map(rot, shear),
        lipcalc.isotopy_stage(lipcalc.compose_maps(rot, rot), 0.7),
        lipcalc.inverse_map(lipcalc.commutator_map(rot, shear)),
    ]
    for cmap in cases:
        q = sampled_quotient(cmap, rng)
        assert q <= float(cmap.eps) + 1e-9, cmap.expr.kind


def test_inverse_evaluation_residual():
    rot = lipcalc.rotation_map(0.2)
    inv = lipcalc.inverse_map(rot)
    rng = np.random.default_rng(5)
    pts = rng.uniform(-5, 5, size=(50, 2))
    back = lipcalc.evaluate_batch(rot, lipcalc.evaluate_batch(inv, pts, 1e-12), 1e-12)
    assert float(np.max(np.linalg.norm(back - pts, axis=1))) < 1e-10


def test_commutator_of_commuting_rotations_is_identity():
    a = lipcalc.rotation_map(0.07)
    b = lipcalc.rotation_map(0.05)
    comm = lipcalc.commutator_map(a, b)
    pts = np.array([[1.0, 2.0], [-0.5, 0.25], [3.0, -4.0]])
    out = lipcalc.evaluate_batch(comm, pts, 1e-12)
    assert float(np.max(np.linalg.norm(out - pts, axis=1))) < 1e-9


# -- displacement geometry checks --------------------------------------------


def test_displacement_floor_on_rotation():
    rec = lipcalc.displacement_floor_check(lipcalc.rotation_map(0.12), (1.0, 0.0))
    assert rec.passed
    assert rec.measured >= rec.bound
    assert rec.to_json_dict()["pass"] is True


def test_displacement_floor_requires_base_class():
    big = lipcalc.rotation_map(1.0)  # eps ~ 0.96 > 1/8
    with pytest.raises(PreconditionViolated):
        lipcalc.displacement_floor_check(big, (1.0, 0.0))


def test_displacement_floor_rejects_fixed_base():
    with pytest.raises(DegenerateInput):
        lipcalc.displacement_floor_check(lipcalc.rotation_map(0.1), (0.0, 0.0))


def test_displacement_angle_on_rotation():
    rot = lipcalc.rotation_map(0.12)
    rec = lipcalc.displacement_angle_check(rot, (1.0, 0.0), (1.1, 0.1), (0.9, -0.1))
    assert rec.passed
    assert rec.measured <= math.pi / 3.0 + 1e-9
    with pytest.raises(PreconditionViolated):
        lipcalc.displacement_angle_check(rot, (1.0, 0.0), (9.0, 9.0), (1.0, 0.1))


def test_segment_image_cone_and_ball():
    rot = lipcalc.rotation_map(0.12)
    rec = lipcalc.segment_image_checks(rot, (1.0, 0.0), (2.0, 1.0))
    assert rec.passed
    assert rec.details["cone_half_angle"] == pytest.approx(
        2.0 * math.atan(float(rot.eps) / (1.0 - float(rot.eps)))
    )
    # ball containment needs eps < 1/(1+sqrt(3)) ~ 0.366
    mid = lipcalc.rotation_map(0.8)  # eps ~ 0.779
    with pytest.raises(PreconditionViolated):
        lipcalc.segment_image_checks(mid, (1.0, 0.0), (2.0, 1.0))


def test_cone_spec_contains():
    cone = lipcalc.ConeSpec((0.0, 0.0), (1.0, 0.0), math.pi / 6)
    assert cone.contains((2.0, 0.5))
    assert not cone.contains((0.0, 1.0))
    with pytest.raises(PreconditionViolated):
        lipcalc.ConeSpec((0.0, 0.0), (2.0, 0.0), math.pi / 6)


# -- estimation and serialization ---------------------------------------------


def test_estimate_lip_identity_close_to_exact():
    rot = lipcalc.rotation_map(0.3)
    est = lipcalc.estimate_lip_identity(rot, (-2.0, 2.0, -2.0, 2.0), pairs=2000, rng_seed=1)
    exact = 2.0 * math.sin(0.15)
    assert est <= exact + 1e-12
    assert est >= 0.9 * exact


def test_map_json_roundtrip_all_kinds():
    rot = lipcalc.rotation_map(0.12, center=(0.5, -0.5))
    shear = lipcalc.sin_shear_map(0.02, axis="y")
    poly = lipcalc.poly_field_map(0.001, [(0.5, 0.5)], (-1, 1, -1, 1))
    tree = lipcalc.isotopy_stage(
        lipcalc.commutator_map(lipcalc.compose_maps(rot, shear), poly), 0.6
    )
    doc = lipcalc.cert_to_json(tree)
    back = lipcalc.map_from_json(doc["expr"])
    assert back.eps == pytest.approx(float(tree.eps))
    pts = np.array([[0.3, 0.7], [-0.2, 0.1]])
    a = lipcalc.evaluate_batch(tree, pts, 1e-12)
    b = lipcalc.evaluate_batch(back, pts, 1e-12)
    assert np.allclose(a, b, atol=1e-12)


def test_rational_encoding_in_certificates():
    f = leaf(Fraction(1, 9))
    doc = lipcalc.cert_to_json(lipcalc.commutator_map(f, f))
    assert doc["eps"] == "19/32"
    # analytic leaves recompute their bound on rebuild instead of trusting
    # the wire, so exactness is asserted on the encoder side
    iso = lipcalc.isotopy_stage(lipcalc.rotation_map(0.12), Fraction(1, 2))
    idoc = lipcalc.expr_to_json(iso.expr)
    assert idoc["params"]["t"] == "1/2"
    back = lipcalc.map_from_json(idoc)
    assert back.expr.params["t"] == Fraction(1, 2)
    assert back.eps == iso.eps


def test_in_class_membership():
    assert leaf(Fraction(1, 9)).in_class(1)
    assert not leaf(Fraction(1, 8)).in_class(1)
    assert leaf(Fraction(1, 8)).in_class(0)
