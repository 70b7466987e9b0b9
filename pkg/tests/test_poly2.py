"""Exact bivariate polynomial arithmetic against a sympy oracle."""

from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from nilfix.errors import PreconditionViolated
from nilfix.poly2 import Poly2

X, Y = sympy.symbols("x y")


def to_sympy(p: Poly2):
    return sympy.expand(
        sum(sympy.Rational(c.numerator, c.denominator) * X**i * Y**j
            for (i, j), c in p.coeffs.items())
    )


def from_sympy(expr):
    poly = sympy.Poly(sympy.expand(expr), X, Y)
    coeffs = {}
    for (i, j), c in zip(poly.monoms(), poly.coeffs()):
        coeffs[(i, j)] = Fraction(int(sympy.numer(c)), int(sympy.denom(c)))
    return Poly2(coeffs)


coeff = st.fractions(
    min_value=-5, max_value=5, max_denominator=6
).filter(lambda f: f != 0)
monomial = st.tuples(st.integers(0, 4), st.integers(0, 4))
poly = st.dictionaries(monomial, coeff, max_size=5).map(Poly2)


@given(poly, poly)
@settings(max_examples=60, deadline=None)
def test_product_matches_sympy(a, b):
    assert to_sympy(a * b) == sympy.expand(to_sympy(a) * to_sympy(b))


@given(poly, poly)
@settings(max_examples=60, deadline=None)
def test_sum_and_difference_match_sympy(a, b):
    assert to_sympy(a + b) == sympy.expand(to_sympy(a) + to_sympy(b))
    assert to_sympy(a - b) == sympy.expand(to_sympy(a) - to_sympy(b))


@given(poly)
@settings(max_examples=40, deadline=None)
def test_diff_matches_sympy(a):
    assert to_sympy(a.diff(0)) == sympy.expand(sympy.diff(to_sympy(a), X))
    assert to_sympy(a.diff(1)) == sympy.expand(sympy.diff(to_sympy(a), Y))


@given(poly, st.integers(0, 6))
@settings(max_examples=40, deadline=None)
def test_truncate_drops_high_degrees(a, K):
    t = a.truncate(K)
    assert all(i + j <= K for (i, j) in t.coeffs)
    kept = {m: c for m, c in a.coeffs.items() if m[0] + m[1] <= K}
    assert t == Poly2(kept)


def test_substitute_matches_sympy():
    p = Poly2.x() + Poly2.y() ** 2
    u = Poly2.x() + Poly2.monomial(2, 0)
    v = Poly2.y() - Poly2.monomial(1, 1)
    K = 5
    got = p.substitute(u, v, K)
    want = sympy.expand(
        to_sympy(p).subs({X: to_sympy(u), Y: to_sympy(v)}, simultaneous=True)
    )
    want_tr = sum(
        t for t in sympy.Add.make_args(want)
        if sympy.Poly(t, X, Y).total_degree() <= K
    )
    assert to_sympy(got) == sympy.expand(want_tr)


def test_eval_exact_and_float_agree():
    p = Poly2({(2, 1): Fraction(3, 4), (0, 3): Fraction(-1, 2)})
    assert p.eval_exact(Fraction(2), Fraction(-1)) == Fraction(3, 4) * 4 * (-1) + Fraction(-1, 2) * (-1) ** 3
    assert p.eval_float(2.0, -1.0) == pytest.approx(-2.5)


def test_divexact_recovers_factor():
    a = Poly2.x() ** 2 + Poly2.y() ** 2
    b = Poly2({(1, 1): Fraction(7, 3)})
    assert (a * b).divexact(a) == b
    with pytest.raises(PreconditionViolated):
        (a * b + Poly2.const(1)).divexact(a)


def test_min_degree_and_zero():
    assert Poly2.zero().is_zero()
    assert Poly2.zero().min_degree() > 10**8
    assert (Poly2.x() ** 3 + Poly2.monomial(0, 5)).min_degree() == 3


def test_json_roundtrip():
    p = Poly2({(2, 1): Fraction(3, 4), (0, 0): Fraction(-2)})
    assert Poly2.from_json(p.to_json()) == p
