"""Polynomial vector fields, their flows, and exact transport identities.

The example fields live in exact rational arithmetic (Poly2), so Lie
brackets, directional derivatives, and the division producing the scaled
family are symbol-exact; only time integration of flows is numeric, via
an adaptive step-doubled classical Runge-Kutta scheme with a per-step
error tolerance.  Flow maps are wrapped as certified-map leaves whose
Lipschitz bound is sampled, never proven, and is marked as such.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import lipcalc
from .errors import (
    DegenerateInput,
    OrderTooLow,
    PolynomialityViolated,
    PreconditionViolated,
    RegionEscape,
    StepFailure,
)
from .lipcalc import CheckRecord
from .poly2 import Poly2

__all__ = [
    "PolyVF",
    "RationalFn",
    "ExampleFields",
    "make_example_fields",
    "lie_bracket",
    "directional_derivative",
    "IntegratorConfig",
    "FlowMap",
    "flow_point",
    "flow_map",
    "flow_map_from_json",
    "integral_transport_check",
    "jet_of_vf",
]


@dataclass(frozen=True)
class PolyVF:
    """Planar polynomial vector field P(x, y) d/dx + Q(x, y) d/dy."""

    P: Poly2
    Q: Poly2
    name: str = ""

    def apply(self, g: Poly2) -> Poly2:
        """The derivation P g_x + Q g_y on polynomials."""
        return self.P * g.diff(0) + self.Q * g.diff(1)

    def eval_at(self, x: float, y: float) -> tuple[float, float]:
        return (self.P.eval_float(x, y), self.Q.eval_float(x, y))

    def is_zero(self) -> bool:
        return self.P.is_zero() and self.Q.is_zero()

    def scale(self, c) -> "PolyVF":
        return PolyVF(self.P.scale(c), self.Q.scale(c), self.name)

    def __add__(self, other: "PolyVF") -> "PolyVF":
        return PolyVF(self.P + other.P, self.Q + other.Q)

    def __sub__(self, other: "PolyVF") -> "PolyVF":
        return PolyVF(self.P - other.P, self.Q - other.Q)

    def to_json(self) -> dict:
        return {"P": self.P.to_json(), "Q": self.Q.to_json(), "name": self.name}

    @staticmethod
    def from_json(doc: dict) -> "PolyVF":
        return PolyVF(
            Poly2.from_json(doc["P"]), Poly2.from_json(doc["Q"]), doc.get("name", "")
        )


@dataclass(frozen=True)
class RationalFn:
    """Quotient of exact polynomials with a recorded singular locus."""

    num: Poly2
    den: Poly2
    singular: str = ""

    def __post_init__(self) -> None:
        if self.den.is_zero():
            raise DegenerateInput("zero denominator")

    def simplify(self) -> "RationalFn":
        if self.num.is_zero():
            return RationalFn(Poly2.zero(), Poly2.const(1), self.singular)
        try:
            q = self.num.divexact(self.den)
        except PreconditionViolated:
            return self
        return RationalFn(q, Poly2.const(1), self.singular)

    def equals_constant(self, c) -> bool:
        """Exact test num/den == c as rational functions."""
        return self.num == self.den.scale(Fraction(c))

    def is_zero_fn(self) -> bool:
        return self.num.is_zero()

    def eval_float(self, x: float, y: float) -> float:
        return self.num.eval_float(x, y) / self.den.eval_float(x, y)


@dataclass(frozen=True)
class ExampleFields:
    """The commuting frame and its first integrals for parameters (k, p).

    X1 rotates circles about the origin with polynomial speed and is
    singular on the line {x = 0}; Y1 moves transversally so that the
    radial invariant drifts at unit rate.  alpha is constant along X1 and
    drifts at rate 1 along Y1; beta does the opposite.  scaled[j] is the
    j-th inverse-radial rescaling of X1, polynomial exactly when
    p - 1 >= k * j.
    """

    k: int
    p: int
    X1: PolyVF
    Y1: PolyVF
    alpha: RationalFn
    beta: RationalFn
    scaled: tuple[PolyVF, ...]


def make_example_fields(k: int, p: int, depth: int = 1) -> ExampleFields:
    """Build the example frame; depth is how many rescalings are needed.

    Raises PolynomialityViolated when p - 1 < k * (depth - 1), the exact
    threshold below which the deepest rescaling stops being polynomial.
    """
    if k < 1 or p < 1:
        raise PreconditionViolated("k and p must be positive integers")
    if depth < 1:
        raise PreconditionViolated("depth must be >= 1")
    if p - 1 < k * (depth - 1):
        raise PolynomialityViolated(
            f"p - 1 = {p - 1} < k * (depth - 1) = {k * (depth - 1)}; "
            "the deepest rescaled field is not polynomial"
        )
    x, y = Poly2.x(), Poly2.y()
    r2 = x * x + y * y
    radial = r2 ** (p - 1)
    x2 = x * x
    X1 = PolyVF(-(x2 * radial * y), x2 * radial * x, name="X1")

    c = Fraction(-1, 2 * k)
    pref = r2 ** (k - 1)
    px = x * (x2 + (y * y).scale(1 - 2 * p))
    py = y * (x2.scale(1 + 2 * p) + y * y)
    Y1 = PolyVF((pref * px).scale(c), (pref * py).scale(c), name="Y1")

    alpha = RationalFn(Poly2.const(1), r2**k, singular="origin")
    beta = RationalFn(y, x * r2**p, singular="line x = 0")

    scaled = []
    for j in range(depth):
        div = r2 ** (k * j)
        scaled.append(
            PolyVF(X1.P.divexact(div), X1.Q.divexact(div), name=f"alpha^{j} X1")
        )
    return ExampleFields(
        k=k, p=p, X1=X1, Y1=Y1, alpha=alpha, beta=beta, scaled=tuple(scaled)
    )


def lie_bracket(A: PolyVF, B: PolyVF) -> PolyVF:
    """[A, B] = A(B) - B(A), componentwise on the coefficient polynomials."""
    return PolyVF(A.apply(B.P) - B.apply(A.P), A.apply(B.Q) - B.apply(A.Q))


def directional_derivative(A: PolyVF, g: RationalFn) -> RationalFn:
    """A(g) for a rational function, over the common denominator squared."""
    gx_num = g.num.diff(0) * g.den - g.num * g.den.diff(0)
    gy_num = g.num.diff(1) * g.den - g.num * g.den.diff(1)
    num = A.P * gx_num + A.Q * gy_num
    den = g.den * g.den
    return RationalFn(num, den, singular=g.singular).simplify()


# ---------------------------------------------------------------------------
# numeric flows


@dataclass(frozen=True)
class IntegratorConfig:
    """Step-doubling RK4 controls; region is an (xmin, xmax, ymin, ymax) box."""

    tol: float = 1e-10
    h_init: Optional[float] = None
    h_min: float = 1e-12
    max_steps: int = 10**6
    region: Optional[tuple[float, float, float, float]] = (-3.0, 3.0, -3.0, 3.0)

    def to_json(self) -> dict:
        return {
            "tol": self.tol,
            "h_init": self.h_init,
            "h_min": self.h_min,
            "max_steps": self.max_steps,
            "region": list(self.region) if self.region else None,
        }

    @staticmethod
    def from_json(doc: dict) -> "IntegratorConfig":
        region = doc.get("region")
        return IntegratorConfig(
            tol=float(doc.get("tol", 1e-10)),
            h_init=doc.get("h_init"),
            h_min=float(doc.get("h_min", 1e-12)),
            max_steps=int(doc.get("max_steps", 10**6)),
            region=tuple(region) if region else None,
        )


def _eval_terms(terms: list[tuple[int, int, float]], x: float, y: float) -> float:
    total = 0.0
    for i, j, c in terms:
        total += c * x**i * y**j
    return total


def _rk4(tp, tq, x: float, y: float, h: float) -> tuple[float, float]:
    k1x = _eval_terms(tp, x, y)
    k1y = _eval_terms(tq, x, y)
    k2x = _eval_terms(tp, x + 0.5 * h * k1x, y + 0.5 * h * k1y)
    k2y = _eval_terms(tq, x + 0.5 * h * k1x, y + 0.5 * h * k1y)
    k3x = _eval_terms(tp, x + 0.5 * h * k2x, y + 0.5 * h * k2y)
    k3y = _eval_terms(tq, x + 0.5 * h * k2x, y + 0.5 * h * k2y)
    k4x = _eval_terms(tp, x + h * k3x, y + h * k3y)
    k4y = _eval_terms(tq, x + h * k3x, y + h * k3y)
    return (
        x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x),
        y + h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y),
    )


def flow_point(
    A: PolyVF,
    t: float,
    z: Sequence[float],
    cfg: IntegratorConfig = IntegratorConfig(),
) -> tuple[float, float]:
    """Integrate dz/ds = A(z) from 0 to t starting at z.

    Classical fourth-order steps with step doubling: a full step is
    compared against two half steps, the difference over 15 estimates the
    local error, and the half-step result is accepted when the estimate
    is at or below cfg.tol.  Raises StepFailure when the step size
    collapses below h_min or the step budget runs out, RegionEscape when
    the trajectory leaves the configured box.
    """
    tp, tq = A.P.compiled(), A.Q.compiled()
    x, y = float(z[0]), float(z[1])
    if t == 0.0:
        return (x, y)
    direction = 1.0 if t > 0 else -1.0
    remaining = abs(t)
    h = min(remaining, cfg.h_init if cfg.h_init is not None else remaining)
    steps = 0
    while remaining > 0.0:
        if steps >= cfg.max_steps:
            raise StepFailure(f"step budget {cfg.max_steps} exhausted")
        h = min(h, remaining)
        hs = direction * h
        fx, fy = _rk4(tp, tq, x, y, hs)
        mx, my = _rk4(tp, tq, x, y, hs / 2.0)
        hx, hy = _rk4(tp, tq, mx, my, hs / 2.0)
        err = math.hypot(hx - fx, hy - fy) / 15.0
        steps += 1
        if err <= cfg.tol:
            x, y = hx, hy
            remaining -= h
            if cfg.region is not None:
                xmin, xmax, ymin, ymax = cfg.region
                if not (xmin <= x <= xmax and ymin <= y <= ymax):
                    raise RegionEscape(
                        f"trajectory left {cfg.region} at ({x:.6g}, {y:.6g})"
                    )
            if err == 0.0:
                h *= 4.0
            else:
                h *= min(4.0, max(0.5, 0.9 * (cfg.tol / err) ** 0.2))
        else:
            h *= max(0.1, 0.9 * (cfg.tol / err) ** 0.2)
        if h < cfg.h_min:
            raise StepFailure(f"step size {h:.3e} fell below h_min {cfg.h_min}")
    return (x, y)


class FlowMap:
    """Time-t flow of a polynomial field as an evaluatable map handle."""

    def __init__(self, field: PolyVF, t: float, cfg: IntegratorConfig):
        self.field = field
        self.t = float(t)
        self.cfg = cfg

    def eval_batch(self, pts: np.ndarray) -> np.ndarray:
        out = np.empty_like(pts, dtype=float)
        for i, (x, y) in enumerate(pts):
            out[i] = flow_point(self.field, self.t, (float(x), float(y)), self.cfg)
        return out

    def describe(self) -> dict:
        return {
            "field": self.field.to_json(),
            "t": self.t,
            "integrator": self.cfg.to_json(),
        }

    def __repr__(self) -> str:
        name = self.field.name or "field"
        return f"FlowMap({name}, t={self.t})"


def flow_map(
    A: PolyVF,
    t: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    eps_region: Optional[tuple[float, float, float, float]] = None,
    pairs: int = 400,
    seed: int = 7,
) -> lipcalc.CertifiedMap:
    """Certified-map wrapper around the time-t flow of A.

    The Lipschitz-from-identity bound is sampled over eps_region (the
    integrator box by default) and inflated by 10 percent; it is tagged
    as estimated and is excluded from certified class membership unless
    the caller explicitly overrides.
    """
    handle = FlowMap(A, t, cfg)
    region = eps_region if eps_region is not None else cfg.region
    if region is None:
        raise PreconditionViolated("need a region to sample the Lipschitz bound")
    provisional = lipcalc.flow_leaf(handle, 0.0, domain_hint=region)
    est = lipcalc.estimate_lip_identity(
        provisional, region, pairs=pairs, rng_seed=seed
    )
    return lipcalc.flow_leaf(handle, 1.1 * est, domain_hint=region)


def flow_map_from_json(doc: dict) -> object:
    """Rebuild a FlowMap handle from its describe() payload."""
    return FlowMap(
        PolyVF.from_json(doc["field"]),
        float(doc["t"]),
        IntegratorConfig.from_json(doc.get("integrator", {})),
    )


def integral_transport_check(
    fields: ExampleFields,
    t: float,
    seeds: Sequence[Sequence[float]],
    cfg: IntegratorConfig = IntegratorConfig(),
    tol_drift: float = 1e-6,
    tol_conserve: float = 1e-8,
) -> list[CheckRecord]:
    """Numeric confirmation that the radial invariant drifts as predicted.

    Along the transversal field the invariant alpha gains exactly t; along
    the rotational field it is conserved.  Each seed must stay clear of
    the origin where alpha blows up.
    """
    records: list[CheckRecord] = []
    for z in seeds:
        x0, y0 = float(z[0]), float(z[1])
        if math.hypot(x0, y0) < 1e-3:
            raise PreconditionViolated(f"seed {z} too close to the origin")
        a0 = fields.alpha.eval_float(x0, y0)
        yx, yy = flow_point(fields.Y1, t, (x0, y0), cfg)
        drift_y = abs(fields.alpha.eval_float(yx, yy) - a0 - t)
        records.append(
            CheckRecord(
                check="transport_drift_unit_rate",
                inputs={"seed": [x0, y0], "t": t},
                measured=drift_y,
                bound=tol_drift,
                passed=drift_y <= tol_drift,
                details={"alpha_start": a0},
            )
        )
        xx, xy = flow_point(fields.X1, t, (x0, y0), cfg)
        drift_x = abs(fields.alpha.eval_float(xx, xy) - a0)
        records.append(
            CheckRecord(
                check="transport_conserved",
                inputs={"seed": [x0, y0], "t": t},
                measured=drift_x,
                bound=tol_conserve,
                passed=drift_x <= tol_conserve,
                details={"alpha_start": a0},
            )
        )
    return records


def jet_of_vf(A: PolyVF, K: int):
    """Truncate a polynomial field to a jet; needs vanishing order >= 2."""
    from . import jets

    order = min(A.P.min_degree(), A.Q.min_degree())
    if order < 2:
        raise OrderTooLow(f"field has vanishing order {order}, need >= 2")
    return jets.JetVF(A.P.truncate(K), A.Q.truncate(K), K)
