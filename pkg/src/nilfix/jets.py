"""Jets of tangent-to-identity maps and their Lie-algebra side.

Everything is exact: coefficients are rationals, truncation is by total
degree, and equality of jets is coefficient equality.  The exp and log
constructions terminate because the fields vanish to order two, so each
application of the derivation raises the vanishing order.

Composition convention: jet_compose(phi, psi) is phi after psi.  For
flows this makes log(jet_compose(jet_exp(Z), jet_exp(W))) equal to the
combination series of (W, Z) in the vector-field bracket, the right
factor acting first; the independent series cross-check in bch uses that
orientation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from . import groups
from .errors import (
    DegreeMismatch,
    DynkinMismatch,
    NotTangentToIdentity,
    OrderTooLow,
    PreconditionViolated,
    SizeCap,
)
from .poly2 import Poly2

__all__ = [
    "Jet2",
    "JetVF",
    "jet_compose",
    "jet_inverse",
    "nu_order",
    "vf_order",
    "jet_exp",
    "jet_log",
    "vf_bracket",
    "bch",
    "jet_commutator",
    "AlgebraLCS",
    "algebra_lcs",
    "span_dim",
    "group_class_check",
]

_NO_DEGREE = 10**9  # min_degree sentinel of the zero polynomial


def _homog(p: Poly2, d: int) -> Poly2:
    return Poly2({m: c for m, c in p.coeffs.items() if m[0] + m[1] == d})


@dataclass(frozen=True)
class Jet2:
    """Degree-K jet of a planar map tangent to the identity."""

    u: Poly2
    v: Poly2
    K: int

    def __post_init__(self) -> None:
        if self.K < 1:
            raise PreconditionViolated("truncation order must be >= 1")
        object.__setattr__(self, "u", self.u.truncate(self.K))
        object.__setattr__(self, "v", self.v.truncate(self.K))
        cu = self.u.coeffs
        cv = self.v.coeffs
        lin_ok = (
            cu.get((0, 0), 0) == 0
            and cu.get((1, 0), 0) == 1
            and cu.get((0, 1), 0) == 0
            and cv.get((0, 0), 0) == 0
            and cv.get((0, 1), 0) == 1
            and cv.get((1, 0), 0) == 0
        )
        if not lin_ok:
            raise NotTangentToIdentity(
                "jet must fix the origin with identity linear part"
            )

    @classmethod
    def identity(cls, K: int) -> "Jet2":
        return cls(Poly2.x(), Poly2.y(), K)

    def is_identity(self) -> bool:
        return self.u == Poly2.x() and self.v == Poly2.y()

    def to_json(self) -> dict:
        return {"u": self.u.to_json(), "v": self.v.to_json(), "K": self.K}

    @staticmethod
    def from_json(doc: dict) -> "Jet2":
        return Jet2(Poly2.from_json(doc["u"]), Poly2.from_json(doc["v"]), int(doc["K"]))


@dataclass(frozen=True)
class JetVF:
    """Degree-K jet of a planar vector field vanishing to order >= 2."""

    P: Poly2
    Q: Poly2
    K: int

    def __post_init__(self) -> None:
        if self.K < 1:
            raise PreconditionViolated("truncation order must be >= 1")
        object.__setattr__(self, "P", self.P.truncate(self.K))
        object.__setattr__(self, "Q", self.Q.truncate(self.K))
        order = min(self.P.min_degree(), self.Q.min_degree())
        if order < 2:
            raise OrderTooLow(f"field jet has vanishing order {order}, need >= 2")

    @classmethod
    def zero(cls, K: int) -> "JetVF":
        return cls(Poly2.zero(), Poly2.zero(), K)

    def is_zero(self) -> bool:
        return self.P.is_zero() and self.Q.is_zero()

    def apply(self, g: Poly2) -> Poly2:
        """The derivation P g_x + Q g_y, truncated."""
        return (self.P * g.diff(0) + self.Q * g.diff(1)).truncate(self.K)

    def scale(self, c) -> "JetVF":
        return JetVF(self.P.scale(c), self.Q.scale(c), self.K)

    def __add__(self, other: "JetVF") -> "JetVF":
        _same_K(self, other)
        return JetVF(self.P + other.P, self.Q + other.Q, self.K)

    def __sub__(self, other: "JetVF") -> "JetVF":
        _same_K(self, other)
        return JetVF(self.P - other.P, self.Q - other.Q, self.K)

    def to_json(self) -> dict:
        return {"P": self.P.to_json(), "Q": self.Q.to_json(), "K": self.K}

    @staticmethod
    def from_json(doc: dict) -> "JetVF":
        return JetVF(Poly2.from_json(doc["P"]), Poly2.from_json(doc["Q"]), int(doc["K"]))


def _same_K(a, b) -> None:
    if a.K != b.K:
        raise DegreeMismatch(f"mixed truncation orders {a.K} and {b.K}")


# ---------------------------------------------------------------------------
# group operations on jets


def jet_compose(phi: Jet2, psi: Jet2) -> Jet2:
    """phi after psi, truncated at the shared order."""
    _same_K(phi, psi)
    K = phi.K
    return Jet2(
        phi.u.substitute(psi.u, psi.v, K),
        phi.v.substitute(psi.u, psi.v, K),
        K,
    )


def jet_inverse(phi: Jet2) -> Jet2:
    """Compositional inverse, built order by order.

    With h = phi - Id the iteration psi <- Id - h(psi) fixes one more
    degree per pass, so K - 1 passes give the exact inverse jet.
    """
    K = phi.K
    hu = phi.u - Poly2.x()
    hv = phi.v - Poly2.y()
    pu, pv = Poly2.x(), Poly2.y()
    for _ in range(max(1, K - 1)):
        pu_next = Poly2.x() - hu.substitute(pu, pv, K)
        pv_next = Poly2.y() - hv.substitute(pu, pv, K)
        if pu_next == pu and pv_next == pv:
            break
        pu, pv = pu_next, pv_next
    return Jet2(pu, pv, K)


def jet_commutator(phi: Jet2, psi: Jet2) -> Jet2:
    """phi psi phi^-1 psi^-1 as jets."""
    return jet_compose(
        jet_compose(phi, psi), jet_compose(jet_inverse(phi), jet_inverse(psi))
    )


def nu_order(phi: Jet2) -> int:
    """Vanishing order of phi - Id; K + 1 means at least K + 1 (identity jet)."""
    du = (phi.u - Poly2.x()).min_degree()
    dv = (phi.v - Poly2.y()).min_degree()
    order = min(du, dv)
    return phi.K + 1 if order >= _NO_DEGREE else order


def vf_order(Z: JetVF) -> int:
    """Vanishing order of the field jet; K + 1 means at least K + 1 (zero jet)."""
    order = min(Z.P.min_degree(), Z.Q.min_degree())
    return Z.K + 1 if order >= _NO_DEGREE else order


# ---------------------------------------------------------------------------
# exp, log, and the combination series


def jet_exp(Z: JetVF) -> Jet2:
    """Time-one flow of the field jet, summed as a terminating series.

    Each application of the derivation raises vanishing order by at least
    one, so the series for the coordinate functions stops within K terms.
    """
    K = Z.K
    acc_u, acc_v = Poly2.x(), Poly2.y()
    cur_u, cur_v = Z.P, Z.Q
    fact = 1
    j = 1
    while not (cur_u.is_zero() and cur_v.is_zero()):
        acc_u = acc_u + cur_u.scale(Fraction(1, fact))
        acc_v = acc_v + cur_v.scale(Fraction(1, fact))
        j += 1
        fact *= j
        cur_u = Z.apply(cur_u)
        cur_v = Z.apply(cur_v)
        if j > K + 2:
            break
    return Jet2(acc_u, acc_v, K)


def jet_log(phi: Jet2) -> JetVF:
    """The field jet whose time-one flow is phi, solved degree by degree."""
    K = phi.K
    zp, zq = Poly2.zero(), Poly2.zero()
    for d in range(2, K + 1):
        e = jet_exp(JetVF(zp, zq, K))
        zp = zp + _homog(phi.u - e.u, d)
        zq = zq + _homog(phi.v - e.v, d)
    out = JetVF(zp, zq, K)
    if jet_exp(out) != phi:
        raise PreconditionViolated("log reconstruction failed; input is not a jet "
                                   "of a tangent-to-identity map")
    return out


def vf_bracket(Z: JetVF, W: JetVF) -> JetVF:
    """Vector-field bracket [Z, W] = Z(W) - W(Z), truncated."""
    _same_K(Z, W)
    return JetVF(
        Z.apply(W.P) - W.apply(Z.P),
        Z.apply(W.Q) - W.apply(Z.Q),
        Z.K,
    )


def _block_sequences(budget: int):
    """All nonempty sequences of letter blocks (r, s) with total <= budget."""
    stack: list[tuple[int, tuple]] = [(budget, ())]
    while stack:
        remaining, seq = stack.pop()
        if seq:
            yield seq
        for r in range(remaining + 1):
            for s in range(remaining - r + 1):
                if r + s == 0:
                    continue
                stack.append((remaining - r - s, seq + ((r, s),)))


def _dynkin_series(first: JetVF, second: JetVF) -> JetVF:
    """Double-sum combination series for log(exp(first) exp(second)).

    Right-nested bracket words with up to K - 1 letters suffice: every
    letter vanishes to order two, so an m-letter bracket vanishes to
    order m + 1.
    """
    K = first.K
    acc = JetVF.zero(K)
    for seq in _block_sequences(K - 1):
        letters: list[JetVF] = []
        denom = 1
        for r, s in seq:
            letters.extend([first] * r)
            letters.extend([second] * s)
            denom *= math.factorial(r) * math.factorial(s)
        m = len(letters)
        word = letters[-1]
        for letter in reversed(letters[:-1]):
            word = vf_bracket(letter, word)
            if word.is_zero():
                break
        if word.is_zero():
            continue
        n = len(seq)
        coeff = Fraction((-1) ** (n - 1), n * m * denom)
        acc = acc + word.scale(coeff)
    return acc


def bch(Z: JetVF, W: JetVF, verify: bool = True) -> JetVF:
    """Field jet generating jet_compose(jet_exp(Z), jet_exp(W)).

    Computed as log of the composed flows; with verify on, the result is
    cross-checked against the truncated double-sum series of (W, Z) in
    the vector-field bracket (the right factor acts first), and any
    disagreement raises DynkinMismatch.
    """
    _same_K(Z, W)
    primary = jet_log(jet_compose(jet_exp(Z), jet_exp(W)))
    if verify:
        reference = _dynkin_series(W, Z)
        if reference != primary:
            raise DynkinMismatch(
                "flow-composition log disagrees with the truncated series: "
                f"log gives {primary}, series gives {reference}"
            )
    return primary


# ---------------------------------------------------------------------------
# algebra lower central series


def _vf_coords(Z: JetVF) -> dict:
    out = {}
    for (i, j), c in Z.P.coeffs.items():
        out[(0, i, j)] = c
    for (i, j), c in Z.Q.coeffs.items():
        out[(1, i, j)] = c
    return out


def _reduce(vec: dict, pivots: list[tuple[tuple, dict]]) -> dict:
    for key, pvec in pivots:
        c = vec.get(key)
        if c:
            factor = c / pvec[key]
            for k, v in pvec.items():
                nv = vec.get(k, Fraction(0)) - factor * v
                if nv:
                    vec[k] = nv
                else:
                    vec.pop(k, None)
    return vec


def _independent_subset(fields: Sequence[JetVF]) -> list[JetVF]:
    """Deterministic maximal independent subset, by exact elimination."""
    pivots: list[tuple[tuple, dict]] = []
    chosen: list[JetVF] = []
    for f in fields:
        vec = _reduce(_vf_coords(f), pivots)
        if vec:
            pivots.append((min(vec), vec))
            chosen.append(f)
    return chosen


def span_dim(fields: Sequence[JetVF]) -> int:
    """Dimension of the rational span of the coefficient vectors."""
    return len(_independent_subset(list(fields)))


@dataclass(frozen=True)
class AlgebraLCS:
    """Bracket-span dimensions per layer and spanning subsets realizing them."""

    dims: tuple[int, ...]
    layers: tuple[tuple[JetVF, ...], ...]


def algebra_lcs(basis: Sequence[JetVF], max_layers: int = 32) -> AlgebraLCS:
    """Lower central series of the span: layer j+1 is [basis, layer j].

    Dimensions are exact ranks over the rationals; iteration stops at the
    first zero layer or raises SizeCap past max_layers.
    """
    if not basis:
        raise PreconditionViolated("need at least one field")
    for b in basis[1:]:
        _same_K(basis[0], b)
    current = _independent_subset(basis)
    dims = [len(current)]
    layers = [tuple(current)]
    while dims[-1] > 0:
        if len(dims) > max_layers:
            raise SizeCap(f"series did not terminate within {max_layers} layers")
        nxt = [vf_bracket(b, c) for b in basis for c in current]
        nxt = [f for f in nxt if not f.is_zero()]
        current = _independent_subset(nxt)
        dims.append(len(current))
        layers.append(tuple(current))
    return AlgebraLCS(dims=tuple(dims), layers=tuple(layers))


# ---------------------------------------------------------------------------
# group class of finitely many jets


def group_class_check(
    generators: Sequence[Jet2],
    depth_cap: int = 6,
    size_cap: int = groups.DEFAULT_SIZE_CAP,
) -> Optional[int]:
    """Nilpotency class of the group the jets generate, at their order.

    Jets compare exactly, so a None return means the class genuinely did
    not resolve within depth_cap, not a tolerance artifact.
    """
    gens = list(generators)
    if not gens:
        raise PreconditionViolated("need at least one jet")
    for g in gens[1:]:
        _same_K(gens[0], g)
    ops = groups.GroupOps(
        product=jet_compose,
        inverse=jet_inverse,
        is_identity=lambda a: a.is_identity(),
        exact=True,
    )
    S = groups.GeneratorSet(
        labels=tuple(f"g{i + 1}" for i in range(len(gens))),
        elements=tuple(gens),
        ops=ops,
    )
    return groups.nilpotency_class(S, depth_cap=depth_cap, size_cap=size_cap)
