"""Finitely generated group machinery over pluggable concrete models.

Provides commutator expression trees with free reduction, the iterated
commutator generator layers S_(0), S_(1), ... with S_(j+1) = {[a, b] :
a in S, b in S_(j)}, central series assembly, nilpotency-class detection
through an equality oracle, and the exact integer unitriangular model.

The core trick: the group generated by the deeper layers S_(j), ...,
S_(sigma-1) is exactly the j-th term of the lower central series, so
triviality of a whole tail of layers witnesses the nilpotency class by
checking finitely many listed generators.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .errors import PreconditionViolated, SizeCap

DEFAULT_SIZE_CAP = 10**5


class ApproximateEqualityWarning(UserWarning):
    """The equality oracle is tolerance-based; a reported class may be understated."""


# ---------------------------------------------------------------------------
# commutator expressions


@dataclass(frozen=True)
class CommutatorExpr:
    """Tree over signed generator leaves with product/inverse/commutator nodes.

    Leaves are kind "gen" with a nonzero 1-based index; a negative index
    denotes the inverse generator.  depth counts commutator nesting.
    """

    kind: str
    index: int = 0
    children: tuple["CommutatorExpr", ...] = ()

    def __post_init__(self) -> None:
        if self.kind == "gen":
            if self.index == 0:
                raise PreconditionViolated("generator index must be nonzero")
        elif self.kind == "inv":
            if len(self.children) != 1:
                raise PreconditionViolated("inv takes one child")
        elif self.kind == "comm":
            if len(self.children) != 2:
                raise PreconditionViolated("comm takes two children")
        elif self.kind == "prod":
            if len(self.children) < 1:
                raise PreconditionViolated("prod takes at least one child")
        else:
            raise PreconditionViolated(f"unknown node kind {self.kind!r}")

    @property
    def depth(self) -> int:
        if self.kind == "gen":
            return 0
        base = max(c.depth for c in self.children)
        return base + 1 if self.kind == "comm" else base


def gen(index: int) -> CommutatorExpr:
    return CommutatorExpr("gen", index=index)


def inv(e: CommutatorExpr) -> CommutatorExpr:
    return CommutatorExpr("inv", children=(e,))


def prod(*es: CommutatorExpr) -> CommutatorExpr:
    return CommutatorExpr("prod", children=tuple(es))


def comm(a: CommutatorExpr, b: CommutatorExpr) -> CommutatorExpr:
    return CommutatorExpr("comm", children=(a, b))


def to_word(e: CommutatorExpr) -> list[int]:
    """Flatten to a word of signed generator indices ([a,b] -> a b a' b')."""
    if e.kind == "gen":
        return [e.index]
    if e.kind == "inv":
        return [-i for i in reversed(to_word(e.children[0]))]
    if e.kind == "prod":
        out: list[int] = []
        for c in e.children:
            out.extend(to_word(c))
        return out
    a = to_word(e.children[0])
    b = to_word(e.children[1])
    return a + b + [-i for i in reversed(a)] + [-i for i in reversed(b)]


def free_reduce(e: CommutatorExpr) -> list[int]:
    """Freely reduced word of e; cancellation is homomorphism-safe."""
    reduced: list[int] = []
    for letter in to_word(e):
        if reduced and reduced[-1] == -letter:
            reduced.pop()
        else:
            reduced.append(letter)
    return reduced


def to_sexpr(e: CommutatorExpr) -> str:
    if e.kind == "gen":
        if e.index < 0:
            return f"(inv g{-e.index})"
        return f"g{e.index}"
    tag = {"inv": "inv", "prod": "prod", "comm": "comm"}[e.kind]
    inner = " ".join(to_sexpr(c) for c in e.children)
    return f"({tag} {inner})"


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def from_sexpr(text: str) -> CommutatorExpr:
    """Parse the S-expression serialization, e.g. ``(comm g1 (comm g2 g3))``."""
    tokens = _TOKEN.findall(text)
    pos = 0

    def parse() -> CommutatorExpr:
        nonlocal pos
        if pos >= len(tokens):
            raise PreconditionViolated("unexpected end of S-expression")
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            if pos >= len(tokens):
                raise PreconditionViolated("unbalanced S-expression")
            tag = tokens[pos]
            pos += 1
            children = []
            while pos < len(tokens) and tokens[pos] != ")":
                children.append(parse())
            if pos >= len(tokens):
                raise PreconditionViolated("unbalanced S-expression")
            pos += 1
            if tag == "inv":
                return inv(*children)
            if tag == "prod":
                return prod(*children)
            if tag == "comm":
                return comm(*children)
            raise PreconditionViolated(f"unknown S-expression tag {tag!r}")
        if tok == ")":
            raise PreconditionViolated("unbalanced S-expression")
        m = re.fullmatch(r"g(-?\d+)", tok)
        if not m:
            raise PreconditionViolated(f"bad generator token {tok!r}")
        return gen(int(m.group(1)))

    out = parse()
    if pos != len(tokens):
        raise PreconditionViolated("trailing tokens in S-expression")
    return out


# ---------------------------------------------------------------------------
# concrete models


@dataclass(frozen=True)
class GroupOps:
    """Concrete group operations handed to expression evaluation.

    exact=False marks a tolerance-based is_identity (map models); results
    derived through such an oracle are flagged approximate.
    """

    product: Callable[[Any, Any], Any]
    inverse: Callable[[Any], Any]
    is_identity: Callable[[Any], bool]
    exact: bool = True


@dataclass(frozen=True)
class GeneratorSet:
    """Labeled generators with evaluation handles into a concrete model."""

    labels: tuple[str, ...]
    elements: tuple[Any, ...]
    ops: GroupOps

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.elements):
            raise PreconditionViolated("labels and elements must align")
        if len(set(self.labels)) != len(self.labels):
            raise PreconditionViolated("generator labels must be unique")
        if not self.labels:
            raise PreconditionViolated("generator set must be nonempty")

    def __len__(self) -> int:
        return len(self.elements)


def evaluate_expr(e: CommutatorExpr, S: GeneratorSet) -> Any:
    """Evaluate an expression in the concrete model (1-based leaf indices)."""
    ops = S.ops
    if e.kind == "gen":
        i = abs(e.index)
        if i > len(S):
            raise PreconditionViolated(f"generator index {i} out of range")
        g = S.elements[i - 1]
        return ops.inverse(g) if e.index < 0 else g
    if e.kind == "inv":
        return ops.inverse(evaluate_expr(e.children[0], S))
    if e.kind == "prod":
        vals = [evaluate_expr(c, S) for c in e.children]
        out = vals[0]
        for v in vals[1:]:
            out = ops.product(out, v)
        return out
    a = evaluate_expr(e.children[0], S)
    b = evaluate_expr(e.children[1], S)
    return ops.product(
        ops.product(a, b), ops.product(ops.inverse(a), ops.inverse(b))
    )


def evaluate_word(word: Sequence[int], S: GeneratorSet) -> Any:
    ops = S.ops
    out = None
    for letter in word:
        g = S.elements[abs(letter) - 1]
        v = ops.inverse(g) if letter < 0 else g
        out = v if out is None else ops.product(out, v)
    if out is None:
        raise PreconditionViolated("empty word has no element without an explicit identity")
    return out


# ---------------------------------------------------------------------------
# layers, central series, class detection


def commutator_sets(
    S: GeneratorSet, depth: int, size_cap: int = DEFAULT_SIZE_CAP
) -> list[list[CommutatorExpr]]:
    """Layers S_(0), ..., S_(depth): S_(j+1) = all [a, b], a in S, b in S_(j)."""
    if depth < 0:
        raise PreconditionViolated("depth must be >= 0")
    layers = [[gen(i + 1) for i in range(len(S))]]
    total = len(S)
    for _ in range(depth):
        prev = layers[-1]
        nxt = [comm(gen(i + 1), b) for i in range(len(S)) for b in prev]
        total += len(nxt)
        if total > size_cap:
            raise SizeCap(f"commutator layer enumeration exceeded cap {size_cap}")
        layers.append(nxt)
    return layers


@dataclass(frozen=True)
class CentralSeries:
    """Ordered generator list S_(sigma-1), ..., S_(0) with the order recorded."""

    layers: tuple[tuple[CommutatorExpr, ...], ...]
    ordered: tuple[CommutatorExpr, ...]
    order_note: str


def central_series(S: GeneratorSet, sigma: int, size_cap: int = DEFAULT_SIZE_CAP) -> CentralSeries:
    """Concatenate the layers deepest first; any fixed order works, this one
    is lexicographic by construction order and recorded for reproducibility."""
    if sigma < 1:
        raise PreconditionViolated("sigma must be >= 1")
    layers = commutator_sets(S, sigma - 1, size_cap)
    ordered: list[CommutatorExpr] = []
    for j in range(sigma - 1, -1, -1):
        ordered.extend(layers[j])
    return CentralSeries(
        layers=tuple(tuple(layer) for layer in layers),
        ordered=tuple(ordered),
        order_note="layers S_(sigma-1)..S_(0), construction order within each layer",
    )


def evaluate_layers(
    S: GeneratorSet, depth: int, size_cap: int = DEFAULT_SIZE_CAP
) -> list[list[Any]]:
    """Evaluate every layer element, reusing layer j values for layer j+1.

    Commutators against an already-trivial element are the identity in any
    group, so those are short-circuited to the cached identity value.
    """
    ops = S.ops
    values = [list(S.elements)]
    total = len(S)
    identity_value = ops.product(S.elements[0], ops.inverse(S.elements[0]))
    for _ in range(depth):
        prev = values[-1]
        nxt = []
        for a in S.elements:
            a_inv = ops.inverse(a)
            for b in prev:
                if ops.is_identity(b):
                    nxt.append(identity_value)
                    continue
                val = ops.product(ops.product(a, b), ops.product(a_inv, ops.inverse(b)))
                nxt.append(val)
        total += len(nxt)
        if total > size_cap:
            raise SizeCap(f"layer evaluation exceeded cap {size_cap}")
        values.append(nxt)
    return values


def nilpotency_class(
    S: GeneratorSet, depth_cap: int, size_cap: int = DEFAULT_SIZE_CAP
) -> Optional[int]:
    """Smallest c <= depth_cap with layers S_(c..depth_cap) all trivial.

    For a group nilpotent of class <= depth_cap this is the class; when no
    such c exists returns None (unknown).  Tolerance-based oracles trigger
    an ApproximateEqualityWarning since a false identity can understate
    the class.
    """
    if depth_cap < 0:
        raise PreconditionViolated("depth_cap must be >= 0")
    if not S.ops.exact:
        warnings.warn(
            "nilpotency class decided by a tolerance-based oracle; "
            "result may understate the true class",
            ApproximateEqualityWarning,
            stacklevel=2,
        )
    values = evaluate_layers(S, depth_cap, size_cap)
    trivial = [all(S.ops.is_identity(v) for v in layer) for layer in values]
    c = None
    for j in range(depth_cap, -1, -1):
        if trivial[j]:
            c = j
        else:
            break
    return c


# ---------------------------------------------------------------------------
# unitriangular integer matrices


class UniTriMatrix:
    """Lower triangular integer matrix with unit diagonal, exact arithmetic."""

    __slots__ = ("rows",)

    def __init__(self, rows: Sequence[Sequence[int]]):
        n = len(rows)
        fixed = []
        for i, row in enumerate(rows):
            if len(row) != n:
                raise PreconditionViolated("matrix must be square")
            for j, v in enumerate(row):
                if j == i and v != 1:
                    raise PreconditionViolated("diagonal must be all ones")
                if j > i and v != 0:
                    raise PreconditionViolated("matrix must be lower triangular")
                if int(v) != v:
                    raise PreconditionViolated("entries must be integers")
            fixed.append(tuple(int(v) for v in row))
        self.rows = tuple(fixed)

    @property
    def n(self) -> int:
        return len(self.rows)

    @classmethod
    def identity(cls, n: int) -> "UniTriMatrix":
        return cls(tuple(tuple(1 if i == j else 0 for j in range(n)) for i in range(n)))

    def __mul__(self, other: "UniTriMatrix") -> "UniTriMatrix":
        if self.n != other.n:
            raise PreconditionViolated("size mismatch")
        a, b = self.rows, other.rows
        n = self.n
        return UniTriMatrix(
            tuple(
                tuple(sum(a[i][k] * b[k][j] for k in range(j, i + 1)) for j in range(n))
                for i in range(n)
            )
        )

    def inverse(self) -> "UniTriMatrix":
        """Columnwise forward substitution solving self * X = I (exact)."""
        n = self.n
        a = self.rows
        cols = []
        for j in range(n):
            x = [0] * n
            for i in range(j, n):
                s = 1 if i == j else 0
                s -= sum(a[i][k] * x[k] for k in range(j, i))
                x[i] = s
            cols.append(x)
        return UniTriMatrix(tuple(tuple(cols[j][i] for j in range(n)) for i in range(n)))

    def is_identity(self) -> bool:
        return all(
            v == (1 if i == j else 0)
            for i, row in enumerate(self.rows)
            for j, v in enumerate(row)
        )

    def __eq__(self, other: object) -> bool:
        return isinstance(other, UniTriMatrix) and self.rows == other.rows

    def __hash__(self) -> int:
        return hash(self.rows)

    def __repr__(self) -> str:
        return f"UniTriMatrix({list(map(list, self.rows))})"


@dataclass(frozen=True)
class UniTriModel:
    """The group N_n of unitriangular integer matrices, (n-1)-step nilpotent."""

    n: int

    def __post_init__(self) -> None:
        if self.n < 2:
            raise PreconditionViolated("n must be >= 2")

    def eta(self, i: int) -> UniTriMatrix:
        """Standard generator with a single 1 in position (i+1, i), 1-based."""
        if not 1 <= i <= self.n - 1:
            raise PreconditionViolated(f"eta index must be in 1..{self.n - 1}")
        rows = [[1 if r == c else 0 for c in range(self.n)] for r in range(self.n)]
        rows[i][i - 1] = 1
        return UniTriMatrix(rows)

    @property
    def ops(self) -> GroupOps:
        return GroupOps(
            product=lambda a, b: a * b,
            inverse=lambda a: a.inverse(),
            is_identity=lambda a: a.is_identity(),
            exact=True,
        )

    def generator_set(self) -> GeneratorSet:
        gens = tuple(self.eta(i) for i in range(1, self.n))
        labels = tuple(f"eta{i}" for i in range(1, self.n))
        return GeneratorSet(labels=labels, elements=gens, ops=self.ops)


def unitriangular_model(n: int) -> UniTriModel:
    return UniTriModel(n)


def map_group_ops(
    region: tuple[float, float, float, float],
    grid: int = 7,
    tol: float = 1e-8,
    eval_tol: float = 1e-10,
) -> GroupOps:
    """Approximate group operations for CertifiedMap models.

    Identity is decided by sup-distance over a sample grid; the oracle is
    tolerance-based, so anything derived from it is flagged approximate.
    """
    from . import lipcalc

    xs = np.linspace(region[0], region[1], grid)
    ys = np.linspace(region[2], region[3], grid)
    gx, gy = np.meshgrid(xs, ys)
    samples = np.stack([gx.ravel(), gy.ravel()], axis=1)

    def is_identity(m: "lipcalc.CertifiedMap") -> bool:
        out = lipcalc.evaluate_batch(m, samples, eval_tol)
        return float(np.max(np.linalg.norm(out - samples, axis=1))) <= tol

    return GroupOps(
        product=lipcalc.compose_maps,
        inverse=lipcalc.inverse_map,
        is_identity=is_identity,
        exact=False,
    )
