"""Exact bivariate polynomials over the rationals.

Sparse representation: {(i, j): Fraction} for the monomial x^i y^j.
Implements the handful of exact operations the field and jet modules
need: ring arithmetic, partial derivatives, truncation by total degree,
substitution with truncation, and exact single-divisor division (used
for the alpha^j multipliers, exact precisely when polynomiality holds).
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Union

from .errors import PreconditionViolated

Monomial = tuple[int, int]
Coeffs = dict[Monomial, Fraction]
Rat = Union[int, Fraction]


class Poly2:
    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Mapping[Monomial, Rat] | None = None):
        clean: Coeffs = {}
        if coeffs:
            for (i, j), c in coeffs.items():
                c = Fraction(c)
                if c != 0:
                    if i < 0 or j < 0:
                        raise PreconditionViolated("negative exponent")
                    clean[(int(i), int(j))] = c
        self.coeffs = clean

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls) -> "Poly2":
        return cls()

    @classmethod
    def const(cls, c: Rat) -> "Poly2":
        return cls({(0, 0): Fraction(c)})

    @classmethod
    def x(cls) -> "Poly2":
        return cls({(1, 0): Fraction(1)})

    @classmethod
    def y(cls) -> "Poly2":
        return cls({(0, 1): Fraction(1)})

    @classmethod
    def monomial(cls, i: int, j: int, c: Rat = 1) -> "Poly2":
        return cls({(i, j): Fraction(c)})

    # -- ring operations ---------------------------------------------------

    def __add__(self, other: "Poly2") -> "Poly2":
        out = dict(self.coeffs)
        for m, c in other.coeffs.items():
            out[m] = out.get(m, Fraction(0)) + c
        return Poly2(out)

    def __sub__(self, other: "Poly2") -> "Poly2":
        out = dict(self.coeffs)
        for m, c in other.coeffs.items():
            out[m] = out.get(m, Fraction(0)) - c
        return Poly2(out)

    def __neg__(self) -> "Poly2":
        return Poly2({m: -c for m, c in self.coeffs.items()})

    def __mul__(self, other: "Poly2") -> "Poly2":
        out: Coeffs = {}
        for (i1, j1), c1 in self.coeffs.items():
            for (i2, j2), c2 in other.coeffs.items():
                m = (i1 + i2, j1 + j2)
                out[m] = out.get(m, Fraction(0)) + c1 * c2
        return Poly2(out)

    def scale(self, c: Rat) -> "Poly2":
        c = Fraction(c)
        return Poly2({m: v * c for m, v in self.coeffs.items()})

    def __pow__(self, n: int) -> "Poly2":
        if n < 0:
            raise PreconditionViolated("negative power")
        out = Poly2.const(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Poly2) and self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash(frozenset(self.coeffs.items()))

    def is_zero(self) -> bool:
        return not self.coeffs

    # -- structure ---------------------------------------------------------

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self.coeffs:
            return -1
        return max(i + j for i, j in self.coeffs)

    def min_degree(self) -> int:
        """Vanishing order at the origin; a large sentinel (10^9) for zero."""
        if not self.coeffs:
            return 10**9
        return min(i + j for i, j in self.coeffs)

    def truncate(self, K: int) -> "Poly2":
        """Drop all monomials of total degree > K."""
        return Poly2({m: c for m, c in self.coeffs.items() if m[0] + m[1] <= K})

    def diff(self, axis: int) -> "Poly2":
        """Partial derivative, axis 0 = d/dx, 1 = d/dy."""
        out: Coeffs = {}
        for (i, j), c in self.coeffs.items():
            if axis == 0 and i > 0:
                out[(i - 1, j)] = c * i
            elif axis == 1 and j > 0:
                out[(i, j - 1)] = c * j
        return Poly2(out)

    # -- evaluation ---------------------------------------------------------

    def eval_exact(self, x: Rat, y: Rat) -> Fraction:
        x, y = Fraction(x), Fraction(y)
        return sum((c * x**i * y**j for (i, j), c in self.coeffs.items()), Fraction(0))

    def compiled(self) -> list[tuple[int, int, float]]:
        """Float-coefficient term list for fast numeric evaluation."""
        return [(i, j, float(c)) for (i, j), c in sorted(self.coeffs.items())]

    def eval_float(self, x: float, y: float) -> float:
        return float(
            sum(float(c) * x**i * y**j for (i, j), c in self.coeffs.items())
        )

    # -- division and substitution ------------------------------------------

    def divexact(self, divisor: "Poly2") -> "Poly2":
        """Exact quotient self / divisor; raises if the division leaves a remainder."""
        if divisor.is_zero():
            raise PreconditionViolated("division by the zero polynomial")
        quotient: Coeffs = {}
        rem = dict(self.coeffs)
        dlead = max(divisor.coeffs)  # lex order on (i, j)
        dc = divisor.coeffs[dlead]
        while rem:
            (ri, rj) = max(rem)
            qi, qj = ri - dlead[0], rj - dlead[1]
            if qi < 0 or qj < 0:
                raise PreconditionViolated("division is not exact")
            qc = rem[(ri, rj)] / dc
            quotient[(qi, qj)] = quotient.get((qi, qj), Fraction(0)) + qc
            for (di, dj), c in divisor.coeffs.items():
                m = (qi + di, qj + dj)
                nv = rem.get(m, Fraction(0)) - qc * c
                if nv == 0:
                    rem.pop(m, None)
                else:
                    rem[m] = nv
        return Poly2(quotient)

    def substitute(self, u: "Poly2", v: "Poly2", K: int | None = None) -> "Poly2":
        """self(u, v), truncated at total degree K when K is given.

        Powers of u and v are cached and themselves truncated, which is
        exact modulo the degree-(K+1) ideal.
        """
        max_i = max((i for i, _ in self.coeffs), default=0)
        max_j = max((j for _, j in self.coeffs), default=0)
        pu: list[Poly2] = [Poly2.const(1)]
        for _ in range(max_i):
            nxt = pu[-1] * u
            pu.append(nxt.truncate(K) if K is not None else nxt)
        pv: list[Poly2] = [Poly2.const(1)]
        for _ in range(max_j):
            nxt = pv[-1] * v
            pv.append(nxt.truncate(K) if K is not None else nxt)
        out = Poly2.zero()
        for (i, j), c in self.coeffs.items():
            term = (pu[i] * pv[j]).scale(c)
            out = out + (term.truncate(K) if K is not None else term)
        return out

    # -- misc ----------------------------------------------------------------

    def __repr__(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for (i, j), c in sorted(self.coeffs.items(), key=lambda kv: (kv[0][0] + kv[0][1], kv[0])):
            mono = "".join(
                (f"x^{i}" if i > 1 else "x" if i == 1 else "",
                 f"y^{j}" if j > 1 else "y" if j == 1 else "")
            )
            parts.append(f"{c}{'*' if mono else ''}{mono}")
        return " + ".join(parts)

    def to_json(self) -> list[list]:
        """Sparse monomial list [[i, j, "num/den"], ...] sorted for determinism."""
        return [
            [i, j, f"{c.numerator}/{c.denominator}"]
            for (i, j), c in sorted(self.coeffs.items())
        ]

    @classmethod
    def from_json(cls, items: Iterable[Iterable]) -> "Poly2":
        out: Coeffs = {}
        for i, j, c in items:
            num, den = str(c).split("/")
            out[(int(i), int(j))] = Fraction(int(num), int(den))
        return cls(out)
