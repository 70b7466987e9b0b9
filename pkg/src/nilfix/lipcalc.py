"""Calculus of plane maps that are eps-Lipschitz with respect to the identity.

A map f is "eps-Lipschitz with respect to the identity" when the
displacement f - Id is an eps-Lipschitz function; for eps < 1 such a map
is automatically a homeomorphism of the plane and its inverse can be
evaluated by a contraction iteration.  This module provides:

* the exact rational eps_sigma table and the nested membership classes,
* certified upper bounds on Lip(f - Id) propagated through composition,
  inversion, group commutators and linear isotopies,
* batch evaluation of map expressions (numpy, including inversion),
* the sampled displacement checks backing the small-displacement
  geometry: displacement floor on a 4-ball, displacement angle bound,
  and cone/ball containment of segment images.

Expression trees are immutable; everything here is pure given the tree,
and randomness enters only through explicit seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Sequence, Union

import numpy as np

from .errors import (
    BoundDiverges,
    DegenerateInput,
    NonConvergence,
    PreconditionViolated,
)

Real = Union[int, float, Fraction]

#: Membership threshold of the base class U: Lip(f - Id) <= 1/8.
EPS_U = Fraction(1, 8)

#: Threshold below which the ball part of the segment-image check is valid.
BALL_CHECK_LIMIT = 1.0 / (1.0 + math.sqrt(3.0))


def epsilon_sigma(sigma: int) -> tuple[Fraction, Fraction]:
    """Exact (eps_sigma, delta_sigma) pair for a nonnegative integer level.

    eps_0 = 1/8 and eps_sigma = 1/(9 * 6^((sigma-1)sigma/2)) for sigma > 0.
    delta_sigma is identified with eps_{sigma+1} (the generators of a
    sigma-step nilpotent group are required one level deeper).
    """
    if sigma < 0 or int(sigma) != sigma:
        raise PreconditionViolated(f"sigma must be a nonnegative integer, got {sigma!r}")
    sigma = int(sigma)

    def _eps(s: int) -> Fraction:
        if s == 0:
            return Fraction(1, 8)
        return Fraction(1, 9 * 6 ** ((s - 1) * s // 2))

    return _eps(sigma), _eps(sigma + 1)


class LipClassTable:
    """Lookup for the nested classes V_sigma = {f : Lip(f-Id) <= eps_sigma}."""

    def eps(self, sigma: int) -> Fraction:
        return epsilon_sigma(sigma)[0]

    def delta(self, sigma: int) -> Fraction:
        return epsilon_sigma(sigma)[1]

    def rows(self, max_sigma: int) -> list[tuple[int, Fraction, Fraction]]:
        return [(s, *epsilon_sigma(s)) for s in range(max_sigma + 1)]

    def level_of(self, eps_value: Real) -> Optional[int]:
        """Deepest sigma with eps_value <= eps_sigma, or None if outside V_0.

        A nonpositive bound lies in every class, so no deepest level exists.
        """
        if eps_value <= 0:
            raise PreconditionViolated(
                "a zero bound belongs to every level; query membership per level"
            )
        if eps_value > self.eps(0):
            return None
        sigma = 0
        while eps_value <= self.eps(sigma + 1):
            sigma += 1
        return sigma


@dataclass(frozen=True)
class ConeSpec:
    """Closed cone {vertex + u : Ang(u, axis) <= half_angle}."""

    vertex: tuple[float, float]
    axis: tuple[float, float]
    half_angle: float

    def __post_init__(self) -> None:
        norm = math.hypot(self.axis[0], self.axis[1])
        if abs(norm - 1.0) > 1e-12:
            raise PreconditionViolated(f"cone axis must be unit, |axis| = {norm}")
        if not 0.0 < self.half_angle < math.pi / 2:
            raise PreconditionViolated("half_angle must lie in (0, pi/2)")

    def contains(self, point: Sequence[float], slack: float = 1e-12) -> bool:
        ux = float(point[0]) - self.vertex[0]
        uy = float(point[1]) - self.vertex[1]
        r = math.hypot(ux, uy)
        if r == 0.0:
            return True
        c = (ux * self.axis[0] + uy * self.axis[1]) / r
        c = min(1.0, max(-1.0, c))
        return math.acos(c) <= self.half_angle + slack


@dataclass(frozen=True)
class MapExpr:
    """Expression tree node for a plane map.

    Leaf kinds: rotation, translation, linear, sin_shear, poly_field, flow.
    Composite kinds: compose (f after g), inverse, commutator, isotopy.
    Leaf parameters include the leaf's own certified or estimated bound
    under key "eps"; composites carry structural parameters only.
    """

    kind: str
    params: dict
    children: tuple["MapExpr", ...] = ()


@dataclass(frozen=True)
class CertifiedMap:
    """A map expression together with a bound on Lip(f - Id).

    provenance:  analytic   - the bound is an exact operator-norm formula,
                 propagated - combined from children by the bound calculus,
                 estimated  - sampled (flow maps); excluded from claims that
                              need certified membership unless overridden.
    domain_hint: box (xmin, xmax, ymin, ymax) on which an estimated or
                 domain-restricted bound was established, if any.
    """

    expr: MapExpr
    eps: Real
    provenance: str
    domain_hint: Optional[tuple[float, float, float, float]] = None

    def in_class(self, sigma: int) -> bool:
        return self.eps <= epsilon_sigma(sigma)[0]


# ---------------------------------------------------------------------------
# bound propagation


def _leaf_bound(expr: MapExpr) -> Real:
    return expr.params["eps"]


def propagate_bound(expr: MapExpr) -> Real:
    """Sound upper bound on Lip(expr - Id), folded over the tree.

    compose:    a + b + ab
    inverse:    a / (1 - a), requires a < 1
    commutator: 2(ab + a + b) / ((1-a)(1-b)), requires a, b < 1; when both
                are <= 1/9 the simplified 6*max{a,b} rule also applies and
                the smaller of the two is returned
    isotopy:    t * a
    Exact rationals propagate exactly; floats give float bounds.
    """
    kind = expr.kind
    if kind in ("rotation", "translation", "linear", "sin_shear", "poly_field", "flow"):
        return _leaf_bound(expr)
    if kind == "compose":
        a = propagate_bound(expr.children[0])
        b = propagate_bound(expr.children[1])
        return a + b + a * b
    if kind == "inverse":
        a = propagate_bound(expr.children[0])
        if a >= 1:
            raise BoundDiverges(f"inverse of a map with bound {a} >= 1")
        return a / (1 - a)
    if kind == "commutator":
        a = propagate_bound(expr.children[0])
        b = propagate_bound(expr.children[1])
        if a >= 1 or b >= 1:
            raise BoundDiverges(f"commutator with bound(s) {a}, {b} >= 1")
        tight = 2 * (a * b + a + b) / ((1 - a) * (1 - b))
        if a <= Fraction(1, 9) and b <= Fraction(1, 9):
            simple = 6 * max(a, b)
            return min(tight, simple)
        return tight
    if kind == "isotopy":
        a = propagate_bound(expr.children[0])
        return expr.params["t"] * a
    raise ValueError(f"unknown expression kind {kind!r}")


def _fold_provenance(expr: MapExpr) -> str:
    kinds = []

    def walk(e: MapExpr) -> None:
        if e.children:
            kinds.append("composite")
            for c in e.children:
                walk(c)
        else:
            kinds.append(e.params.get("provenance", "analytic"))

    walk(expr)
    if "estimated" in kinds:
        return "estimated"
    if "composite" in kinds:
        return "propagated"
    return "analytic"


def _fold_domain_hint(expr: MapExpr) -> Optional[tuple[float, float, float, float]]:
    boxes = []

    def walk(e: MapExpr) -> None:
        hint = e.params.get("domain_hint")
        if hint is not None:
            boxes.append(tuple(hint))
        for c in e.children:
            walk(c)

    walk(expr)
    if not boxes:
        return None
    return (
        min(b[0] for b in boxes),
        max(b[1] for b in boxes),
        min(b[2] for b in boxes),
        max(b[3] for b in boxes),
    )


def certify(expr: MapExpr) -> CertifiedMap:
    """Wrap an expression with its propagated bound and folded provenance."""
    return CertifiedMap(
        expr=expr,
        eps=propagate_bound(expr),
        provenance=_fold_provenance(expr),
        domain_hint=_fold_domain_hint(expr),
    )


# ---------------------------------------------------------------------------
# constructors


def rotation_map(theta: float, center: Sequence[float] = (0.0, 0.0)) -> CertifiedMap:
    """Rotation by theta about a center; eps = 2 sin(|theta|/2), analytic."""
    if not abs(theta) < math.pi / 3:
        raise PreconditionViolated(f"|theta| = {abs(theta)} must be < pi/3")
    expr = MapExpr(
        "rotation",
        {
            "theta": float(theta),
            "center": (float(center[0]), float(center[1])),
            "eps": 2.0 * math.sin(abs(theta) / 2.0),
        },
    )
    return certify(expr)


def translation_map(v: Sequence[float]) -> CertifiedMap:
    """Translation by v; the displacement is constant, so eps = 0 exactly."""
    expr = MapExpr(
        "translation",
        {"v": (float(v[0]), float(v[1])), "eps": Fraction(0)},
    )
    return certify(expr)


def identity_map() -> CertifiedMap:
    return translation_map((0.0, 0.0))


def linear_map(matrix: Sequence[Sequence[float]], offset: Sequence[float] = (0.0, 0.0)) -> CertifiedMap:
    """Affine map x -> A x + b; eps = spectral norm of A - I (closed form)."""
    a, b = float(matrix[0][0]), float(matrix[0][1])
    c, d = float(matrix[1][0]), float(matrix[1][1])
    ma, mb, mc, md = a - 1.0, b, c, d - 1.0
    s = ma * ma + mb * mb + mc * mc + md * md
    det = ma * md - mb * mc
    disc = max(0.0, s * s - 4.0 * det * det)
    eps = math.sqrt(max(0.0, (s + math.sqrt(disc)) / 2.0))
    expr = MapExpr(
        "linear",
        {
            "matrix": ((a, b), (c, d)),
            "offset": (float(offset[0]), float(offset[1])),
            "eps": eps,
        },
    )
    return certify(expr)


def sin_shear_map(amp: float, axis: str = "x", freq: float = 1.0, phase: float = 0.0) -> CertifiedMap:
    """Shear (x + amp sin(freq y + phase), y) or the axis-swapped variant.

    The displacement depends 1-Lipschitz-scaled on one coordinate only, so
    eps = |amp * freq| exactly.
    """
    if axis not in ("x", "y"):
        raise PreconditionViolated("axis must be 'x' or 'y'")
    expr = MapExpr(
        "sin_shear",
        {
            "amp": float(amp),
            "freq": float(freq),
            "phase": float(phase),
            "axis": axis,
            "eps": abs(float(amp) * float(freq)),
        },
    )
    return certify(expr)


def poly_field_map(
    coeff: float,
    roots: Sequence[Sequence[float]],
    box: tuple[float, float, float, float],
) -> CertifiedMap:
    """Polynomial perturbation z -> z + coeff * prod (z - r_i) (complex product).

    Fixed points are exactly the roots, each of index +1 (the displacement
    is complex-analytic).  The bound is the analytic sup of |d'| over the
    box: |coeff| * sum_j prod_{i != j} R_i with R_i = max corner distance
    to root i; it is valid for sample pairs inside the box (domain_hint).
    """
    xs = (float(box[0]), float(box[1]))
    ys = (float(box[2]), float(box[3]))
    corners = [(x, y) for x in xs for y in ys]
    rts = tuple((float(r[0]), float(r[1])) for r in roots)
    if not rts:
        raise DegenerateInput("poly_field_map needs at least one root")
    radii = [max(math.hypot(cx - rx, cy - ry) for cx, cy in corners) for rx, ry in rts]
    total = 0.0
    for j in range(len(radii)):
        prod = 1.0
        for i, r in enumerate(radii):
            if i != j:
                prod *= r
        total += prod
    expr = MapExpr(
        "poly_field",
        {
            "coeff": float(coeff),
            "roots": rts,
            "eps": abs(float(coeff)) * total,
            "domain_hint": (xs[0], xs[1], ys[0], ys[1]),
        },
    )
    return certify(expr)


def flow_leaf(handle: Any, eps: float, domain_hint: Optional[tuple[float, float, float, float]]) -> CertifiedMap:
    """Wrap an integrated time-t flow handle; the bound is sampled, not proved."""
    expr = MapExpr(
        "flow",
        {
            "handle": handle,
            "eps": float(eps),
            "provenance": "estimated",
            "domain_hint": domain_hint,
        },
    )
    return certify(expr)


def compose_maps(f: CertifiedMap, g: CertifiedMap) -> CertifiedMap:
    """The composition f after g."""
    return certify(MapExpr("compose", {}, (f.expr, g.expr)))


def inverse_map(f: CertifiedMap) -> CertifiedMap:
    if propagate_bound(f.expr) >= 1:
        raise BoundDiverges("cannot certify the inverse: bound >= 1")
    return certify(MapExpr("inverse", {}, (f.expr,)))


def commutator_map(f: CertifiedMap, g: CertifiedMap) -> CertifiedMap:
    """Group commutator f g f^-1 g^-1."""
    return certify(MapExpr("commutator", {}, (f.expr, g.expr)))


def isotopy_stage(f: CertifiedMap, t: Real) -> CertifiedMap:
    """Linear isotopy stage F_t = t f + (1-t) Id; eps scales linearly in t.

    F_0 = Id, F_1 = f, and every fixed point of f stays fixed along the
    way.  A Fraction t keeps the propagated bound exact.
    """
    if not 0 <= t <= 1:
        raise PreconditionViolated(f"isotopy parameter t = {t} outside [0, 1]")
    if not isinstance(t, (Fraction, int)):
        t = float(t)
    return certify(MapExpr("isotopy", {"t": t}, (f.expr,)))


# ---------------------------------------------------------------------------
# evaluation


def _count_inversions(expr: MapExpr) -> int:
    if expr.kind == "inverse":
        return 1 + 2 * _count_inversions(expr.children[0])
    if expr.kind == "commutator":
        f, g = expr.children
        return 2 + 3 * (_count_inversions(f) + _count_inversions(g))
    return sum(_count_inversions(c) for c in expr.children)


def _eval(expr: MapExpr, pts: np.ndarray, local_tol: float, max_iter: int) -> np.ndarray:
    kind = expr.kind
    if kind == "rotation":
        th = expr.params["theta"]
        cx, cy = expr.params["center"]
        c, s = math.cos(th), math.sin(th)
        x = pts[:, 0] - cx
        y = pts[:, 1] - cy
        return np.stack([cx + c * x - s * y, cy + s * x + c * y], axis=1)
    if kind == "translation":
        vx, vy = expr.params["v"]
        return pts + np.array([vx, vy])
    if kind == "linear":
        (a, b), (c, d) = expr.params["matrix"]
        ox, oy = expr.params["offset"]
        x, y = pts[:, 0], pts[:, 1]
        return np.stack([a * x + b * y + ox, c * x + d * y + oy], axis=1)
    if kind == "sin_shear":
        amp = expr.params["amp"]
        freq = expr.params["freq"]
        phase = expr.params["phase"]
        out = pts.copy()
        if expr.params["axis"] == "x":
            out[:, 0] += amp * np.sin(freq * pts[:, 1] + phase)
        else:
            out[:, 1] += amp * np.sin(freq * pts[:, 0] + phase)
        return out
    if kind == "poly_field":
        z = pts[:, 0] + 1j * pts[:, 1]
        d = np.full_like(z, expr.params["coeff"])
        for rx, ry in expr.params["roots"]:
            d = d * (z - (rx + 1j * ry))
        return np.stack([pts[:, 0] + d.real, pts[:, 1] + d.imag], axis=1)
    if kind == "flow":
        return expr.params["handle"].eval_batch(pts)
    if kind == "compose":
        f, g = expr.children
        return _eval(f, _eval(g, pts, local_tol, max_iter), local_tol, max_iter)
    if kind == "inverse":
        return _eval_inverse(expr.children[0], pts, local_tol, max_iter)
    if kind == "commutator":
        f, g = expr.children
        out = _eval_inverse(g, pts, local_tol, max_iter)
        out = _eval_inverse(f, out, local_tol, max_iter)
        out = _eval(g, out, local_tol, max_iter)
        return _eval(f, out, local_tol, max_iter)
    if kind == "isotopy":
        t = float(expr.params["t"])
        return t * _eval(expr.children[0], pts, local_tol, max_iter) + (1.0 - t) * pts
    raise ValueError(f"unknown expression kind {kind!r}")


def _eval_inverse(child: MapExpr, target: np.ndarray, local_tol: float, max_iter: int) -> np.ndarray:
    """Solve f(z) = target by z <- target - (f - Id)(z), an eps-contraction.

    The stop threshold is floored at a few ulps of the target magnitude:
    below that the iterates can only dither in the last bit.
    """
    eps = float(propagate_bound(child))
    if eps >= 1.0:
        raise BoundDiverges(f"inverse iteration would not contract: bound {eps} >= 1")
    scale = float(np.max(np.abs(target))) if len(target) else 1.0
    floor = 8.0 * float(np.finfo(float).eps) * max(1.0, scale)
    stop = max(local_tol * (1.0 - eps), floor)
    z = target.copy()
    for _ in range(max_iter):
        z_next = target - (_eval(child, z, local_tol, max_iter) - z)
        step = float(np.max(np.linalg.norm(z_next - z, axis=1))) if len(z) else 0.0
        z = z_next
        if step <= stop:
            return z
    raise NonConvergence(f"inverse iteration cap {max_iter} hit (last step {step:.3e})")


def evaluate_batch(
    cmap: CertifiedMap,
    pts: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 10**4,
) -> np.ndarray:
    """Evaluate the map on an (N, 2) float array; error per point <= tol.

    Inverse nodes are solved by contraction; the tolerance is split over
    the number of inversion solves in the tree so the accumulated error
    stays below tol (validated by the residual checks in the test suite).
    """
    if tol <= 0:
        raise PreconditionViolated("tol must be positive")
    pts = np.asarray(pts, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DegenerateInput(f"expected points of shape (N, 2), got {pts.shape}")
    n_inv = max(1, _count_inversions(cmap.expr))
    local_tol = tol / (2.0 * n_inv)
    return _eval(cmap.expr, pts, local_tol, max_iter)


def evaluate(
    cmap: CertifiedMap,
    x: Sequence[float],
    tol: float = 1e-10,
    max_iter: int = 10**4,
) -> tuple[float, float]:
    """Evaluate the map at a single point with error <= tol."""
    out = evaluate_batch(cmap, np.array([[float(x[0]), float(x[1])]]), tol, max_iter)
    return (float(out[0, 0]), float(out[0, 1]))


def displacement_batch(cmap: CertifiedMap, pts: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    return evaluate_batch(cmap, pts, tol) - np.asarray(pts, dtype=float)


# ---------------------------------------------------------------------------
# sampled checks


def estimate_lip_identity(
    cmap: CertifiedMap,
    region: tuple[float, float, float, float],
    pairs: int,
    rng_seed: int,
    tol: float = 1e-10,
) -> float:
    """Max sampled quotient ||(f-Id)(x)-(f-Id)(y)|| / ||x-y|| over random pairs."""
    xmin, xmax, ymin, ymax = region
    if not (xmax > xmin and ymax > ymin):
        raise DegenerateInput("region must be a nondegenerate box")
    if pairs < 1:
        raise PreconditionViolated("pairs must be >= 1")
    rng = np.random.default_rng(rng_seed)
    xs = rng.uniform((xmin, ymin), (xmax, ymax), size=(pairs, 2))
    ys = rng.uniform((xmin, ymin), (xmax, ymax), size=(pairs, 2))
    gaps = np.linalg.norm(xs - ys, axis=1)
    keep = gaps > 1e-12
    if not np.any(keep):
        return 0.0
    dx = displacement_batch(cmap, xs[keep], tol)
    dy = displacement_batch(cmap, ys[keep], tol)
    quotients = np.linalg.norm(dx - dy, axis=1) / gaps[keep]
    return float(np.max(quotients))


@dataclass(frozen=True)
class CheckRecord:
    """One verification record: a measured quantity against its bound."""

    check: str
    inputs: dict
    measured: float
    bound: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out = {
            "check": self.check,
            "inputs": self.inputs,
            "measured": self.measured,
            "bound": self.bound,
            "pass": self.passed,
        }
        if self.details:
            out["details"] = self.details
        return out


def _require_in_base_class(cmap: CertifiedMap, op: str) -> None:
    if cmap.eps > EPS_U:
        raise PreconditionViolated(
            f"{op} requires eps <= 1/8, map has eps = {float(cmap.eps)}"
        )


def displacement_floor_check(
    cmap: CertifiedMap,
    p: Sequence[float],
    grid: int = 200,
    tol: float = 1e-10,
) -> CheckRecord:
    """Grid check that displacement on B[p, 4||f(p)-p||] stays above half of ||f(p)-p||.

    A map with eps <= 1/8 cannot have fixed points in that closed ball; the
    grid minimum is compared against 0.5*||f(p)-p|| minus an interpolation
    slack of one cell diagonal times (1 + eps).
    """
    _require_in_base_class(cmap, "displacement_floor_check")
    if grid < 2:
        raise PreconditionViolated("grid resolution must be >= 2")
    fp = evaluate(cmap, p, tol)
    d0 = math.hypot(fp[0] - float(p[0]), fp[1] - float(p[1]))
    if d0 <= 10 * tol:
        raise DegenerateInput("base point is fixed to machine precision")
    radius = 4.0 * d0
    axis = np.linspace(-radius, radius, grid)
    gx, gy = np.meshgrid(axis, axis)
    pts = np.stack([gx.ravel() + float(p[0]), gy.ravel() + float(p[1])], axis=1)
    inside = np.linalg.norm(pts - np.array([float(p[0]), float(p[1])]), axis=1) <= radius
    pts = pts[inside]
    disp = np.linalg.norm(displacement_batch(cmap, pts, tol), axis=1)
    measured = float(np.min(disp))
    cell = 2.0 * radius / (grid - 1)
    slack = cell * math.sqrt(2.0) * (1.0 + float(cmap.eps))
    bound = 0.5 * d0 - slack
    return CheckRecord(
        check="displacement_floor",
        inputs={"p": [float(p[0]), float(p[1])], "grid": grid, "radius": radius},
        measured=measured,
        bound=bound,
        passed=measured >= bound,
        details={"base_displacement": d0, "slack": slack},
    )


def displacement_angle_check(
    cmap: CertifiedMap,
    p: Sequence[float],
    z1: Sequence[float],
    z2: Sequence[float],
    tol: float = 1e-10,
) -> CheckRecord:
    """Angle between unit displacements at two points of the 4-ball around p.

    For eps <= 1/8 the angle is at most 2 arcsin(4 eps) <= pi/3.
    """
    _require_in_base_class(cmap, "displacement_angle_check")
    fp = evaluate(cmap, p, tol)
    d0 = math.hypot(fp[0] - float(p[0]), fp[1] - float(p[1]))
    if d0 <= 10 * tol:
        raise DegenerateInput("base point is fixed to machine precision")
    radius = 4.0 * d0
    for z in (z1, z2):
        dz = math.hypot(float(z[0]) - float(p[0]), float(z[1]) - float(p[1]))
        if dz > radius * (1.0 + 1e-12):
            raise PreconditionViolated(f"sample point {tuple(z)} outside B[p, 4||f(p)-p||]")
    pts = np.array([[float(z1[0]), float(z1[1])], [float(z2[0]), float(z2[1])]])
    disp = displacement_batch(cmap, pts, tol)
    norms = np.linalg.norm(disp, axis=1)
    if float(np.min(norms)) == 0.0:
        raise DegenerateInput("displacement vanishes at a sample point")
    v1, v2 = disp[0] / norms[0], disp[1] / norms[1]
    c = float(np.clip(np.dot(v1, v2), -1.0, 1.0))
    angle = math.acos(c)
    arcsin_bound = 2.0 * math.asin(min(1.0, 4.0 * float(cmap.eps)))
    bound = min(math.pi / 3.0, arcsin_bound)
    return CheckRecord(
        check="displacement_angle",
        inputs={
            "p": [float(p[0]), float(p[1])],
            "z1": [float(z1[0]), float(z1[1])],
            "z2": [float(z2[0]), float(z2[1])],
        },
        measured=angle,
        bound=bound,
        passed=angle <= bound + 1e-9,
        details={"pi_over_3": math.pi / 3.0, "two_arcsin_4eps": arcsin_bound},
    )


def segment_image_checks(
    cmap: CertifiedMap,
    p: Sequence[float],
    q: Sequence[float],
    samples: int = 100,
    ball: bool = True,
    tol: float = 1e-10,
) -> CheckRecord:
    """Cone and ball containment for the image of the segment [p, q].

    Every sampled f(lambda) must lie in the cones with vertices f(p), f(q),
    axes +-w/||w|| for w = f(q) - f(p) and half-angle 2 arctan(eps/(1-eps));
    optionally also in the closed ball ||f(lambda)-f(p)|| <= ||w||.  The
    cone statement needs eps < 1/2, the ball statement eps < 1/(1+sqrt 3).
    """
    eps = float(cmap.eps)
    if eps >= 0.5:
        raise PreconditionViolated(f"cone checks need eps < 1/2, got {eps}")
    if ball and eps >= BALL_CHECK_LIMIT:
        raise PreconditionViolated(
            f"ball check needs eps < 1/(1+sqrt(3)) ~ {BALL_CHECK_LIMIT:.6f}, got {eps}"
        )
    px, py = float(p[0]), float(p[1])
    qx, qy = float(q[0]), float(q[1])
    if px == qx and py == qy:
        raise DegenerateInput("p and q coincide")
    if samples < 1:
        raise PreconditionViolated("samples must be >= 1")
    ts = np.linspace(0.0, 1.0, samples + 2)
    seg = np.stack([px + ts * (qx - px), py + ts * (qy - py)], axis=1)
    img = evaluate_batch(cmap, seg, tol)
    fp, fq = img[0], img[-1]
    w = fq - fp
    wn = float(np.linalg.norm(w))
    if wn == 0.0:
        raise DegenerateInput("f(p) = f(q), cone axis undefined")
    axis = w / wn
    half = 2.0 * math.atan(eps / (1.0 - eps)) if eps > 0.0 else 0.0

    def cone_excess(vertex: np.ndarray, direction: np.ndarray) -> float:
        u = img - vertex
        r = np.linalg.norm(u, axis=1)
        ok = r > 1e-15
        c = np.clip((u[ok] @ direction) / r[ok], -1.0, 1.0)
        if not len(c):
            return -half
        return float(np.max(np.arccos(c))) - half

    excess_p = cone_excess(fp, axis)
    excess_q = cone_excess(fq, -axis)
    details = {
        "cone_half_angle": half,
        "cone_excess_at_fp": excess_p,
        "cone_excess_at_fq": excess_q,
        "ball_checked": bool(ball),
    }
    worst = max(excess_p, excess_q)
    if ball:
        ball_excess = float(np.max(np.linalg.norm(img - fp, axis=1))) - wn
        details["ball_excess"] = ball_excess
        worst = max(worst, ball_excess)
    return CheckRecord(
        check="segment_image",
        inputs={"p": [px, py], "q": [qx, qy], "samples": samples},
        measured=worst,
        bound=0.0,
        passed=worst <= 1e-9,
        details=details,
    )


# ---------------------------------------------------------------------------
# JSON serialization of map expressions


def expr_to_json(expr: MapExpr) -> dict:
    """Serializable description: {kind, params, children}; flow leaves
    delegate their field payload to the handle."""
    params = {}
    for key, value in expr.params.items():
        if key == "handle":
            params["flow"] = value.describe()
        elif key in ("eps", "t"):
            params[key] = _real_to_json(value)
        elif isinstance(value, tuple):
            params[key] = _tuple_to_json(value)
        else:
            params[key] = value
    return {
        "kind": expr.kind,
        "params": params,
        "children": [expr_to_json(c) for c in expr.children],
    }


def _tuple_to_json(value: tuple) -> list:
    return [_tuple_to_json(v) if isinstance(v, tuple) else v for v in value]


def _real_to_json(value: Real) -> Union[str, float]:
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    return float(value)


def _real_from_json(value: Union[str, float, int]) -> Real:
    if isinstance(value, str):
        num, den = value.split("/")
        return Fraction(int(num), int(den))
    return float(value)


def cert_to_json(cmap: CertifiedMap) -> dict:
    return {
        "expr": expr_to_json(cmap.expr),
        "eps": _real_to_json(cmap.eps),
        "provenance": cmap.provenance,
        "domain_hint": list(cmap.domain_hint) if cmap.domain_hint else None,
    }


def map_from_json(doc: dict) -> CertifiedMap:
    """Rebuild a certified map from the JSON map-description format."""
    kind = doc.get("kind")
    params = doc.get("params", {})
    children = doc.get("children", [])
    if kind == "rotation":
        return rotation_map(params["theta"], tuple(params.get("center", (0.0, 0.0))))
    if kind == "translation":
        return translation_map(tuple(params["v"]))
    if kind == "linear":
        return linear_map(params["matrix"], tuple(params.get("offset", (0.0, 0.0))))
    if kind == "sin_shear":
        return sin_shear_map(
            params["amp"], params.get("axis", "x"), params.get("freq", 1.0), params.get("phase", 0.0)
        )
    if kind == "poly_field":
        box = params.get("box", params.get("domain_hint"))
        return poly_field_map(params["coeff"], params["roots"], tuple(box))
    if kind == "flow":
        from . import flows

        handle = flows.flow_map_from_json(params["flow"])
        hint = params.get("domain_hint")
        return flow_leaf(
            handle, float(_real_from_json(params["eps"])), tuple(hint) if hint else None
        )
    if kind == "compose":
        return compose_maps(map_from_json(children[0]), map_from_json(children[1]))
    if kind == "inverse":
        return inverse_map(map_from_json(children[0]))
    if kind == "commutator":
        return commutator_map(map_from_json(children[0]), map_from_json(children[1]))
    if kind == "isotopy":
        return isotopy_stage(map_from_json(children[0]), _real_from_json(params["t"]))
    raise PreconditionViolated(f"unknown map kind {kind!r}")


def map_schema() -> dict:
    """Documented JSON schema of the map-description format."""
    return {
        "description": "map expression tree; composite nodes list children in application order",
        "node": {"kind": "string", "params": "object", "children": "array of nodes"},
        "kinds": {
            "rotation": {"theta": "radians, |theta| < pi/3", "center": "[x, y]"},
            "translation": {"v": "[x, y]"},
            "linear": {"matrix": "[[a, b], [c, d]]", "offset": "[x, y]"},
            "sin_shear": {"amp": "float", "axis": "'x'|'y'", "freq": "float", "phase": "float"},
            "poly_field": {
                "coeff": "float",
                "roots": "[[x, y], ...]",
                "box": "[xmin, xmax, ymin, ymax] bound domain",
            },
            "flow": {"flow": "flow description from the flows module (field, t, integrator)"},
            "compose": {"children": "[f, g] meaning f after g"},
            "inverse": {"children": "[f]"},
            "commutator": {"children": "[f, g] meaning f g f^-1 g^-1"},
            "isotopy": {"t": "float in [0,1]", "children": "[f]"},
        },
    }
