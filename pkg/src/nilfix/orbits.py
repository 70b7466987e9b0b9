"""Orbit dynamics and the winding-number fixed-point machinery.

Builds closed polygonal curves through orbit points, detects recurrence,
extracts simple sub-loops at the first self-intersection, computes the
index of the displacement field along loops, runs a displacement-guided
quadtree search for approximate fixed points, assembles the attainment
sets A_G / eps_G / B_G, and drives the one-map and staged multi-map
fixed-point location pipelines.

All topological decisions (winding, intersections, hull membership) go
through exact rational predicates in geom; metric tolerances are explicit
configuration.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from . import geom, lipcalc
from .errors import (
    AlreadySimple,
    DegenerateInput,
    EmptyFixSetWarning,
    FixedPointOnCurve,
    OnCurve,
    PreconditionViolated,
    RefinementCap,
    SearchFailed,
    StageFailed,
    UnboundedOrbit,
)


class AngleConditionWarning(UserWarning):
    """Consecutive loop segments meet at an angle >= pi/2 before extraction."""


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class OrbitRecord:
    """Iterates f^0(p), ..., f^N(p) with an escape flag."""

    base: tuple[float, float]
    points: np.ndarray
    escaped: bool
    map_desc: str

    @property
    def steps(self) -> int:
        return len(self.points) - 1


@dataclass(frozen=True)
class RecurrenceEvent:
    n: int
    distance: float


@dataclass(frozen=True)
class PolyLoop:
    """Closed polygonal curve; the last vertex connects back to the first."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.vertices) < 2:
            raise DegenerateInput("a loop needs at least 2 vertices")
        m = len(self.vertices)
        for i in range(m):
            a = self.vertices[i]
            b = self.vertices[(i + 1) % m]
            if a == b:
                raise DegenerateInput(f"consecutive vertices {i},{(i + 1) % m} coincide")

    def edges(self) -> list[tuple[tuple[float, float], tuple[float, float]]]:
        m = len(self.vertices)
        return [(self.vertices[i], self.vertices[(i + 1) % m]) for i in range(m)]

    def diameter(self) -> float:
        pts = np.asarray(self.vertices)
        return float(
            max(
                pts[:, 0].max() - pts[:, 0].min(),
                pts[:, 1].max() - pts[:, 1].min(),
            )
        )


@dataclass(frozen=True)
class AttainmentSets:
    """A_G segments, the eps_G clearance, and the rasterized B_G mask."""

    segments: tuple[tuple[tuple[float, float], tuple[float, float]], ...]
    eps_g: float
    fix_points: tuple[tuple[float, float], ...]
    grid_origin: tuple[float, float]
    cell: float
    resolution: int
    a_mask: np.ndarray
    b_mask: np.ndarray

    def b_contains(self, point: Sequence[float]) -> bool:
        i = int((float(point[0]) - self.grid_origin[0]) / self.cell)
        j = int((float(point[1]) - self.grid_origin[1]) / self.cell)
        if 0 <= i < self.resolution and 0 <= j < self.resolution:
            return bool(self.b_mask[j, i])
        return False


# ---------------------------------------------------------------------------
# orbits and recurrence


def iterate_orbit(
    f: lipcalc.CertifiedMap,
    p: Sequence[float],
    N: int,
    escape_radius: float = 1e6,
    tol: float = 1e-10,
) -> OrbitRecord:
    """Forward orbit of p; stops early (escape flag) on leaving the radius."""
    if N < 1:
        raise PreconditionViolated("N must be >= 1")
    pts = [np.array([float(p[0]), float(p[1])])]
    escaped = False
    z = pts[0]
    for _ in range(N):
        z = lipcalc.evaluate_batch(f, z[None, :], tol)[0]
        pts.append(z)
        if float(np.linalg.norm(z)) > escape_radius:
            escaped = True
            break
    return OrbitRecord(
        base=(float(p[0]), float(p[1])),
        points=np.array(pts),
        escaped=escaped,
        map_desc=f.expr.kind,
    )


def detect_recurrence(orbit: OrbitRecord, tol: float) -> list[RecurrenceEvent]:
    """All return times n >= 1 with ||f^n(p) - p|| <= tol, increasing."""
    if orbit.escaped:
        raise UnboundedOrbit("orbit left the escape radius")
    base = orbit.points[0]
    dists = np.linalg.norm(orbit.points[1:] - base, axis=1)
    return [
        RecurrenceEvent(n=i + 1, distance=float(d))
        for i, d in enumerate(dists)
        if d <= tol
    ]


def build_gamma(
    f: lipcalc.CertifiedMap,
    p: Sequence[float],
    m: int,
    tol: float = 1e-10,
) -> PolyLoop:
    """The closed polygonal curve through f(p), ..., f^m(p)."""
    if m < 2:
        raise PreconditionViolated("m must be >= 2")
    orbit = iterate_orbit(f, p, m, escape_radius=float("inf"), tol=tol)
    first = orbit.points[1]
    if float(np.linalg.norm(first - orbit.points[0])) <= 10 * tol:
        raise DegenerateInput("base point is fixed; the curve degenerates")
    return PolyLoop(vertices=tuple((float(x), float(y)) for x, y in orbit.points[1:]))


# ---------------------------------------------------------------------------
# winding and loop surgery


def winding_number(loop: PolyLoop, q: Sequence[float], guard: float = 1e-9) -> int:
    """Exact winding number of the loop around q, guarded against near-misses."""
    if geom.polyline_point_distance(list(loop.vertices), q, closed=True) <= guard:
        raise OnCurve(f"query point within guard {guard} of the curve")
    return geom.winding_number(loop.vertices, q)


def max_consecutive_angle(loop: PolyLoop) -> float:
    """Largest turn angle between consecutive edges of the loop."""
    verts = loop.vertices
    m = len(verts)
    worst = 0.0
    for i in range(m):
        a, b, c = verts[i - 1], verts[i], verts[(i + 1) % m]
        u = (b[0] - a[0], b[1] - a[1])
        v = (c[0] - b[0], c[1] - b[1])
        worst = max(worst, geom.angle_between(u, v))
    return worst


def extract_simple_loop(loop: PolyLoop) -> PolyLoop:
    """Cut out the sub-loop enclosed by the first self-intersection.

    Edges are scanned in order; for the earliest edge j that crosses an
    earlier non-adjacent edge, the crossing closest to the start of edge j
    is used, so the returned loop (crossing point, v_{i+1}, ..., v_j) has
    no interior self-intersection.  The consecutive-angle condition that
    backs the theory is checked first and reported as a warning when
    violated; extraction still proceeds.
    """
    verts = loop.vertices
    m = len(verts)
    if m < 3:
        raise AlreadySimple("fewer than 3 vertices cannot self-intersect")
    worst = max_consecutive_angle(loop)
    if worst >= math.pi / 2:
        warnings.warn(
            f"consecutive-segment angle {worst:.3f} >= pi/2; extraction heuristic "
            "is outside the regime backed by the recurrence theory",
            AngleConditionWarning,
            stacklevel=2,
        )
    for j in range(m):
        a2 = verts[j]
        b2 = verts[(j + 1) % m]
        best: Optional[tuple] = None
        for i in range(j - 1):
            if j == m - 1 and i == 0:
                continue  # the closing edge shares vertex v_0 with edge 0
            hit = geom.segment_intersection(a2, b2, verts[i], verts[i + 1])
            if hit is None:
                continue
            t, hx, hy = hit
            if best is None or t < best[0]:
                best = (t, float(hx), float(hy), i)
        if best is not None:
            _, hx, hy, i = best
            cut = [(hx, hy)]
            cut.extend(verts[i + 1 : j + 1])
            deduped = [cut[0]]
            for v in cut[1:]:
                if v != deduped[-1]:
                    deduped.append(v)
            if len(deduped) >= 3 and deduped[-1] == deduped[0]:
                deduped.pop()
            if len(deduped) < 3:
                raise DegenerateInput("self-intersection encloses a degenerate loop")
            return PolyLoop(vertices=tuple(deduped))
    raise AlreadySimple("no self-intersection found")


def is_simple(loop: PolyLoop) -> bool:
    """Brute-force all-pairs edge intersection test (exact predicates)."""
    edges = loop.edges()
    m = len(edges)
    for j in range(m):
        for i in range(j):
            adjacent = (j - i == 1) or (i == 0 and j == m - 1)
            if adjacent:
                continue
            if geom.segments_intersect(*edges[i], *edges[j]):
                return False
    return True


# ---------------------------------------------------------------------------
# displacement index


def _loop_interpolator(loop: PolyLoop):
    verts = np.asarray(loop.vertices, dtype=float)
    closed = np.vstack([verts, verts[:1]])
    seg = np.diff(closed, axis=0)
    lengths = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    total = float(cum[-1])

    def at(s: np.ndarray) -> np.ndarray:
        s = np.mod(s, total)
        idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(lengths) - 1)
        local = (s - cum[idx]) / np.where(lengths[idx] > 0, lengths[idx], 1.0)
        return closed[idx] + seg[idx] * local[:, None]

    return at, total


def displacement_index(
    f: lipcalc.CertifiedMap,
    loop: PolyLoop,
    samples: int = 64,
    floor: float = 1e-9,
    refine_cap: int = 1 << 16,
    tol: float = 1e-10,
) -> int:
    """Total rotation of x -> f(x) - x along the loop, in full turns.

    Angle increments between consecutive samples are refined adaptively
    until each is below pi/2, so the winding is read off unambiguously.
    """
    if samples < 4:
        raise PreconditionViolated("need at least 4 initial samples")
    at, total = _loop_interpolator(loop)
    params = list(np.linspace(0.0, total, samples, endpoint=False))

    cache: dict[float, np.ndarray] = {}

    def disp(s: float) -> np.ndarray:
        if s not in cache:
            pt = at(np.array([s]))
            d = lipcalc.evaluate_batch(f, pt, tol)[0] - pt[0]
            nd = float(np.linalg.norm(d))
            if nd <= floor:
                raise FixedPointOnCurve(
                    f"displacement {nd:.3e} <= floor {floor} at loop point {tuple(pt[0])}"
                )
            cache[s] = d
        return cache[s]

    work = params
    while True:
        splits: list[float] = []
        turn_sum = 0.0
        n = len(work)
        for k in range(n):
            s0, s1 = work[k], work[(k + 1) % n]
            turn = geom.signed_turn(disp(s0), disp(s1))
            if abs(turn) >= math.pi / 2:
                mid = (s0 + (s1 if k + 1 < n else s1 + total)) / 2.0
                splits.append(mid % total)
            else:
                turn_sum += turn
        if not splits:
            index = turn_sum / (2.0 * math.pi)
            rounded = int(round(index))
            if abs(index - rounded) > 0.05:
                raise RefinementCap(
                    f"angle sum {index:.4f} turns did not settle to an integer"
                )
            return rounded
        work = sorted(set(work) | set(splits))
        if len(work) > refine_cap:
            raise RefinementCap(f"adaptive subdivision exceeded {refine_cap} samples")


# ---------------------------------------------------------------------------
# quadtree fixed-point candidates


def fixed_point_candidates(
    f: lipcalc.CertifiedMap,
    region: tuple[float, float, float, float],
    depth_cap: int = 24,
    tol: float = 1e-6,
    cell_cap: int = 20000,
    eval_tol: float = 1e-10,
) -> list[tuple[float, float]]:
    """Displacement-guided quadtree search for approximate fixed points.

    Cells are sampled on a 3x3 lattice, so every point of a cell lies
    within diagonal/4 of a sample; a cell is kept when its sampled
    minimum displacement is at most (1 + eps) * diagonal / 4.  Because
    the displacement field is (1 + eps)-Lipschitz, a zero inside a cell
    forces a sampled value below that threshold, so the displacement rule
    alone keeps every cell an index argument would keep; kept cells are
    split until their size drops below tol.  Returned candidates are
    clustered cell centers with ||f(c) - c|| <= (1 + eps) * tol.
    """
    eps = float(f.eps)
    if eps >= 1.0:
        raise PreconditionViolated("fixed_point_candidates requires eps < 1")
    xmin, xmax, ymin, ymax = (float(v) for v in region)
    if not (xmax > xmin and ymax > ymin):
        raise DegenerateInput("region must be a nondegenerate box")

    cells = [(xmin, ymin, max(xmax - xmin, ymax - ymin))]
    size = cells[0][2]
    depth = 0
    visited = 0
    while size > tol and depth < depth_cap and cells:
        next_cells = []
        for (cx, cy, s) in cells:
            half = s / 2.0
            for ox in (0.0, half):
                for oy in (0.0, half):
                    next_cells.append((cx + ox, cy + oy, half))
        visited += len(next_cells)
        if visited > cell_cap:
            raise RefinementCap(f"quadtree visited more than {cell_cap} cells")
        xs = np.array([c[0] for c in next_cells])
        ys = np.array([c[1] for c in next_cells])
        s = next_cells[0][2]
        offsets = [(0.0, 0.0), (s, 0.0), (0.0, s), (s, s), (s / 2, s / 2),
                   (s / 2, 0.0), (0.0, s / 2), (s, s / 2), (s / 2, s)]
        mins = np.full(len(next_cells), np.inf)
        for ox, oy in offsets:
            pts = np.stack([xs + ox, ys + oy], axis=1)
            d = np.linalg.norm(lipcalc.displacement_batch(f, pts, eval_tol), axis=1)
            mins = np.minimum(mins, d)
        threshold = (1.0 + eps) * s * math.sqrt(2.0) / 4.0
        cells = [c for c, m in zip(next_cells, mins) if m <= threshold]
        size = s
        depth += 1

    if not cells:
        return []
    centers = np.array([(cx + s / 2.0, cy + s / 2.0) for cx, cy, s in cells])
    disp = np.linalg.norm(lipcalc.displacement_batch(f, centers, eval_tol), axis=1)
    keep = disp <= (1.0 + eps) * max(tol, size)
    centers, disp = centers[keep], disp[keep]
    if not len(centers):
        return []

    # cluster centers of adjacent kept cells; report the best per cluster
    order = np.argsort(disp, kind="stable")
    link = 1.5 * size
    taken = np.zeros(len(centers), bool)
    out: list[tuple[float, float]] = []
    for idx in order:
        if taken[idx]:
            continue
        cluster = np.linalg.norm(centers - centers[idx], axis=1) <= link
        grow = True
        while grow:
            grow = False
            for k in np.nonzero(cluster)[0]:
                near = np.linalg.norm(centers - centers[k], axis=1) <= link
                new = near & ~cluster
                if np.any(new):
                    cluster |= near
                    grow = True
        taken |= cluster
        best = min(np.nonzero(cluster)[0], key=lambda k: (disp[k], k))
        out.append((float(centers[best][0]), float(centers[best][1])))
    return sorted(out)


# ---------------------------------------------------------------------------
# capital points


@dataclass(frozen=True)
class CapitalReport:
    q: tuple[float, float]
    indices: dict
    capital: bool
    tested: tuple[int, ...]

    def to_json_dict(self) -> dict:
        return {
            "check": "capital_point",
            "inputs": {"q": list(self.q), "tested": list(self.tested)},
            "measured": {str(n): ind for n, ind in self.indices.items()},
            "bound": "all indices defined and nonzero",
            "pass": self.capital,
        }


def capital_point_check(
    f: lipcalc.CertifiedMap,
    p: Sequence[float],
    q: Sequence[float],
    recurrence: Sequence[RecurrenceEvent],
    m_list: Optional[Sequence[int]] = None,
    guard: Optional[float] = None,
    tol: float = 1e-10,
) -> CapitalReport:
    """Winding of Gamma_{p, n} around q along the tested recurrence times.

    The verdict only speaks for the finite tested set; the underlying
    notion asks for all large recurrence times.
    """
    ns = list(m_list) if m_list is not None else [e.n for e in recurrence]
    if not ns:
        raise PreconditionViolated("no recurrence times supplied to test")
    indices: dict[int, Optional[int]] = {}
    ok = True
    for n in ns:
        gamma = build_gamma(f, p, n, tol)
        g = guard if guard is not None else 1e-9 * max(1.0, gamma.diameter())
        try:
            ind = winding_number(gamma, q, guard=g)
        except OnCurve:
            indices[n] = None
            ok = False
            continue
        indices[n] = ind
        if ind == 0:
            ok = False
    return CapitalReport(
        q=(float(q[0]), float(q[1])),
        indices=indices,
        capital=ok,
        tested=tuple(ns),
    )


# ---------------------------------------------------------------------------
# attainment sets


def convex_hull(points: Sequence[Sequence[float]]) -> list[tuple[float, float]]:
    return geom.convex_hull([(float(x), float(y)) for x, y in points])


def curve_separation(loop1: PolyLoop, loop2: PolyLoop) -> float:
    """Minimum distance between the two closed polygonal curves."""
    return min(
        geom.segment_segment_distance(a1, b1, a2, b2)
        for a1, b1 in loop1.edges()
        for a2, b2 in loop2.edges()
    )


def sample_group_orbit(
    maps: Sequence[lipcalc.CertifiedMap],
    p: Sequence[float],
    word_budget: int,
    escape_radius: float = 1e6,
    tol: float = 1e-10,
    cross: int = 32,
) -> np.ndarray:
    """Deterministic sample of the orbit of p under the generated group.

    Budget is spent on per-generator forward chains plus cross
    applications of each other generator to a subsample of every chain,
    which captures closure limits of individual flows well.
    """
    if not maps:
        raise PreconditionViolated("need at least one map")
    if word_budget < 1:
        raise PreconditionViolated("word_budget must be >= 1")
    chain_len = max(1, word_budget // (len(maps) * 2))
    base = np.array([float(p[0]), float(p[1])])
    points = [base]
    chains = []
    for m in maps:
        z = base
        chain = [z]
        for _ in range(chain_len):
            z = lipcalc.evaluate_batch(m, z[None, :], tol)[0]
            if float(np.linalg.norm(z)) > escape_radius:
                raise UnboundedOrbit("group orbit sample left the escape radius")
            chain.append(z)
        chains.append(np.array(chain))
        points.append(chains[-1][1:])
    for ci, chain in enumerate(chains):
        stride = max(1, len(chain) // max(1, cross))
        sub = chain[::stride]
        for mi, m in enumerate(maps):
            if mi == ci:
                continue
            out = lipcalc.evaluate_batch(m, sub, tol)
            if float(np.max(np.linalg.norm(out, axis=1))) > escape_radius:
                raise UnboundedOrbit("group orbit sample left the escape radius")
            points.append(out)
    flat = np.vstack([np.atleast_2d(pt) for pt in points])
    return flat[: max(word_budget, 1) + 1]


def attainment_sets(
    maps: Sequence[lipcalc.CertifiedMap],
    f: lipcalc.CertifiedMap,
    p: Sequence[float],
    word_budget: int = 512,
    grid_res: int = 128,
    escape_radius: float = 1e6,
    fix_tol: float = 1e-4,
    tol: float = 1e-10,
) -> AttainmentSets:
    """A_G segments over sampled orbit closure, eps_G clearance, B_G raster.

    eps_G is the minimum distance from the segments to the approximate
    fixed-point set of f (from fixed_point_candidates over the sampled
    bounding region); B_G is the complement of the flood-fill-from-outside
    component of the rasterized A_G, so it covers A_G plus the enclosed
    holes, with resolution error of one cell diagonal.
    """
    samples = sample_group_orbit(maps, p, word_budget, escape_radius, tol)
    images = lipcalc.evaluate_batch(f, samples, tol)
    segments = tuple(
        ((float(a[0]), float(a[1])), (float(b[0]), float(b[1])))
        for a, b in zip(samples, images)
    )

    allpts = np.vstack([samples, images])
    lo = allpts.min(axis=0)
    hi = allpts.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-6))
    margin = 0.25 * span
    region = (lo[0] - margin, hi[0] + margin, lo[1] - margin, hi[1] + margin)

    try:
        fixes = fixed_point_candidates(f, region, tol=fix_tol, eval_tol=tol)
    except RefinementCap:
        fixes = []
    if not fixes:
        warnings.warn(
            "no approximate fixed points found in the sampled region; eps_G = inf",
            EmptyFixSetWarning,
            stacklevel=2,
        )
        eps_g = float("inf")
    else:
        eps_g = min(
            geom.segment_point_distance(a, b, q) for a, b in segments for q in fixes
        )

    # raster of A_G and exterior flood fill
    origin = (float(lo[0] - margin), float(lo[1] - margin))
    cell = (span + 2 * margin) / grid_res
    a_mask = np.zeros((grid_res, grid_res), dtype=bool)

    def mark(pt: Sequence[float]) -> None:
        i = int((pt[0] - origin[0]) / cell)
        j = int((pt[1] - origin[1]) / cell)
        if 0 <= i < grid_res and 0 <= j < grid_res:
            a_mask[j, i] = True

    for a, b in segments:
        length = math.hypot(b[0] - a[0], b[1] - a[1])
        steps = max(2, int(length / (0.5 * cell)) + 2)
        for t in np.linspace(0.0, 1.0, steps):
            mark((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))

    outside = np.zeros_like(a_mask)
    stack = [
        (i, j)
        for i in range(grid_res)
        for j in (0, grid_res - 1)
        if not a_mask[j, i]
    ] + [
        (i, j)
        for j in range(grid_res)
        for i in (0, grid_res - 1)
        if not a_mask[j, i]
    ]
    for i, j in stack:
        outside[j, i] = True
    while stack:
        i, j = stack.pop()
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = i + di, j + dj
            if 0 <= ni < grid_res and 0 <= nj < grid_res:
                if not outside[nj, ni] and not a_mask[nj, ni]:
                    outside[nj, ni] = True
                    stack.append((ni, nj))
    b_mask = ~outside
    return AttainmentSets(
        segments=segments,
        eps_g=float(eps_g),
        fix_points=tuple((float(x), float(y)) for x, y in fixes),
        grid_origin=origin,
        cell=float(cell),
        resolution=grid_res,
        a_mask=a_mask,
        b_mask=b_mask,
    )


# ---------------------------------------------------------------------------
# fixed-point location pipelines


@dataclass(frozen=True)
class LocateConfig:
    tol: float = 1e-6
    orbit_budget: int = 2000
    escape_radius: float = 1e6
    recurrence_tol: Optional[float] = None
    eval_tol: float = 1e-10
    coarse_depth: int = 7
    candidate_cap: int = 20000
    max_seeds: int = 5
    polish_maxiter: int = 400
    allow_uncertified: bool = False
    inclusion_tol: float = 1e-2
    inclusion_budget: int = 64
    guard: Optional[float] = None


@dataclass(frozen=True)
class LocateResult:
    q: tuple[float, float]
    certificate: str  # "closure" | "enclosed"
    displacement: float
    details: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "q": list(self.q),
            "certificate": self.certificate,
            "displacement": self.displacement,
            "details": {
                k: v for k, v in self.details.items() if k not in ("orbit", "hull")
            },
        }


def _check_certifiable(f: lipcalc.CertifiedMap, config: LocateConfig, op: str) -> None:
    if config.allow_uncertified:
        return
    if f.provenance == "estimated":
        raise PreconditionViolated(
            f"{op}: map bound is estimated, not certified; "
            "set allow_uncertified to override"
        )
    if f.eps > lipcalc.EPS_U:
        raise PreconditionViolated(
            f"{op}: requires eps <= 1/8, map has eps = {float(f.eps)}"
        )


def _displacement_at(f: lipcalc.CertifiedMap, z: np.ndarray, tol: float) -> float:
    return float(np.linalg.norm(lipcalc.displacement_batch(f, z[None, :], tol)[0]))


def locate_fixed_point(
    f: lipcalc.CertifiedMap,
    p: Sequence[float],
    config: LocateConfig = LocateConfig(),
) -> LocateResult:
    """Find q with ||f(q) - q|| <= tol, certified by closure or enclosure.

    closure: q is an orbit sample that the orbit returns to within tol.
    enclosed: q lies strictly inside the hull of the orbit samples and the
    orbit curves Gamma_{p, n_k} wind around it a nonzero number of times.
    """
    _check_certifiable(f, config, "locate_fixed_point")
    tol = config.tol
    base = np.array([float(p[0]), float(p[1])])

    pts = [base]
    z = base
    hit: Optional[int] = None
    for n in range(config.orbit_budget):
        z_next = lipcalc.evaluate_batch(f, z[None, :], config.eval_tol)[0]
        if float(np.linalg.norm(z_next - z)) <= tol:
            hit = n
            pts.append(z_next)
            break
        pts.append(z_next)
        if float(np.linalg.norm(z_next)) > config.escape_radius:
            raise UnboundedOrbit("orbit left the escape radius")
        z = z_next
    points = np.array(pts)

    if hit is not None:
        q = points[hit]
        return LocateResult(
            q=(float(q[0]), float(q[1])),
            certificate="closure",
            displacement=float(np.linalg.norm(points[hit + 1] - points[hit])),
            details={"orbit_steps": hit, "orbit": points},
        )

    # enclosed search inside the hull of the orbit samples
    hull = geom.convex_hull([(float(x), float(y)) for x, y in points])
    if len(hull) < 3:
        raise SearchFailed("orbit hull is degenerate; no enclosed region to search")
    diam = max(
        max(v[0] for v in hull) - min(v[0] for v in hull),
        max(v[1] for v in hull) - min(v[1] for v in hull),
    )
    rec_tol = config.recurrence_tol if config.recurrence_tol is not None else 1e-3 * diam
    orbit_rec = OrbitRecord(
        base=(float(base[0]), float(base[1])), points=points, escaped=False, map_desc=f.expr.kind
    )
    events = detect_recurrence(orbit_rec, rec_tol)
    scale = 0
    while not events and scale < 8:
        rec_tol *= 4.0
        events = detect_recurrence(orbit_rec, rec_tol)
        scale += 1
    bbox = (
        min(v[0] for v in hull),
        max(v[0] for v in hull),
        min(v[1] for v in hull),
        max(v[1] for v in hull),
    )
    coarse = max(tol, diam / 2**config.coarse_depth)
    try:
        seeds = fixed_point_candidates(
            f, bbox, tol=coarse, cell_cap=config.candidate_cap, eval_tol=config.eval_tol
        )
    except RefinementCap:
        seeds = []
    if not seeds:
        cx = float(np.mean([v[0] for v in hull]))
        cy = float(np.mean([v[1] for v in hull]))
        seeds = [(cx, cy)]
    seeds = seeds[: config.max_seeds]

    diagnostics: dict = {"seeds": seeds, "recurrence": [e.n for e in events]}
    best: Optional[tuple[float, np.ndarray]] = None
    for seed in seeds:
        res = optimize.minimize(
            lambda v: _displacement_at(f, np.asarray(v), config.eval_tol) ** 2,
            np.array(seed),
            method="Nelder-Mead",
            options={
                "xatol": max(tol * 1e-3, 1e-12),
                "fatol": max((tol * 1e-3) ** 2, 1e-30),
                "maxiter": config.polish_maxiter,
                "initial_simplex": np.array(
                    [seed, (seed[0] + coarse, seed[1]), (seed[0], seed[1] + coarse)]
                ),
            },
        )
        cand = np.asarray(res.x)
        d = _displacement_at(f, cand, config.eval_tol)
        if best is None or d < best[0]:
            best = (d, cand)
    assert best is not None
    d, q = best
    if d > tol:
        diagnostics["best_displacement"] = d
        raise SearchFailed(f"no point with displacement <= {tol} found: {diagnostics}")
    if not geom.point_in_convex_polygon(hull, (float(q[0]), float(q[1])), strict=True):
        diagnostics["q"] = (float(q[0]), float(q[1]))
        raise SearchFailed(f"candidate fixed point not strictly inside hull: {diagnostics}")
    m_list = [e.n for e in events] if events else [len(points) - 1]
    report = capital_point_check(
        f, base, q, events, m_list=m_list, guard=config.guard, tol=config.eval_tol
    )
    if not report.capital:
        diagnostics["indices"] = report.indices
        raise SearchFailed(f"winding certificate failed: {diagnostics}")
    return LocateResult(
        q=(float(q[0]), float(q[1])),
        certificate="enclosed",
        displacement=d,
        details={
            "indices": report.indices,
            "tested": list(report.tested),
            "orbit": points,
            "hull": hull,
        },
    )


@dataclass(frozen=True)
class StageReport:
    stage: int
    q: tuple[float, float]
    certificate: str
    displacements: tuple[float, ...]
    inclusion_margin: float
    inclusion_ok: bool

    def to_json_dict(self) -> dict:
        return {
            "stage": self.stage,
            "q": list(self.q),
            "certificate": self.certificate,
            "displacements": list(self.displacements),
            "inclusion_margin": self.inclusion_margin,
            "inclusion_ok": self.inclusion_ok,
        }


@dataclass(frozen=True)
class GlobalResult:
    q: tuple[float, float]
    stages: tuple[StageReport, ...]

    def to_json_dict(self) -> dict:
        return {"q": list(self.q), "stages": [s.to_json_dict() for s in self.stages]}


def locate_global_fixed_point(
    central_series_maps: Sequence[lipcalc.CertifiedMap],
    p: Sequence[float],
    config: LocateConfig = LocateConfig(),
) -> GlobalResult:
    """Staged common-fixed-point search along an ordered generator list.

    Stage i locates a point approximately fixed by g_1..g_i: the single-map
    pipeline runs on g_i from the previous stage point, then the result is
    polished against the joint displacement of all maps so far; each stage
    verifies that the sampled orbit of the new point under the full group
    stays inside the hull of the previous stage's sampled orbit closure,
    within the inclusion tolerance.
    """
    maps = list(central_series_maps)
    if not maps:
        raise PreconditionViolated("need at least one map")
    for m in maps:
        _check_certifiable(m, config, "locate_global_fixed_point")

    q_prev = np.array([float(p[0]), float(p[1])])
    try:
        prev_orbit = sample_group_orbit(
            maps, q_prev, config.orbit_budget, config.escape_radius, config.eval_tol
        )
    except UnboundedOrbit:
        raise
    prev_hull = geom.convex_hull([(float(x), float(y)) for x, y in prev_orbit])

    stages: list[StageReport] = []
    for i, g in enumerate(maps, start=1):
        active = maps[:i]
        try:
            res = locate_fixed_point(g, q_prev, config)
        except (SearchFailed, UnboundedOrbit, DegenerateInput) as exc:
            raise StageFailed(f"stage {i}: single-map location failed: {exc}") from exc
        q = np.array(res.q)

        def joint(v: np.ndarray) -> float:
            z = np.asarray(v)
            return sum(_displacement_at(m, z, config.eval_tol) ** 2 for m in active)

        # local refinement only: a wide simplex could slide along a whole
        # curve of joint fixed points, away from the stage-certified q
        scale = max(100.0 * config.tol, 1e-8)
        polish = optimize.minimize(
            joint,
            q,
            method="Nelder-Mead",
            options={
                "xatol": max(config.tol * 1e-3, 1e-12),
                "fatol": 1e-30,
                "maxiter": config.polish_maxiter,
                "initial_simplex": np.array(
                    [q, (q[0] + scale, q[1]), (q[0], q[1] + scale)]
                ),
            },
        )
        q = np.asarray(polish.x)
        disps = tuple(_displacement_at(m, q, config.eval_tol) for m in active)
        if max(disps) > config.tol:
            raise StageFailed(
                f"stage {i}: joint displacement {max(disps):.3e} exceeds tol {config.tol}"
            )

        orbit_i = sample_group_orbit(
            maps, q, config.inclusion_budget, config.escape_radius, config.eval_tol
        )
        margin = max(
            geom.distance_to_convex_polygon(prev_hull, (float(x), float(y)))
            for x, y in orbit_i
        )
        ok = margin <= config.inclusion_tol
        stages.append(
            StageReport(
                stage=i,
                q=(float(q[0]), float(q[1])),
                certificate=res.certificate,
                displacements=disps,
                inclusion_margin=float(margin),
                inclusion_ok=ok,
            )
        )
        if not ok:
            raise StageFailed(
                f"stage {i}: orbit inclusion margin {margin:.3e} exceeds "
                f"tolerance {config.inclusion_tol}"
            )
        q_prev = q
        prev_orbit = sample_group_orbit(
            maps, q_prev, config.orbit_budget, config.escape_radius, config.eval_tol
        )
        prev_hull = geom.convex_hull([(float(x), float(y)) for x, y in prev_orbit])

    return GlobalResult(q=(float(q_prev[0]), float(q_prev[1])), stages=tuple(stages))
