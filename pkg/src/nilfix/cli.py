"""Experiment runner: reproducible desk-scale checks from JSON configs.

One config describes one experiment; running it writes a JSON certificate
(per-check pass/fail with measured values against bounds) and a CSV data
file, both byte-stable for a fixed config and seed.  Exit code 0 means
every declared check passed, 2 means at least one failed, 1 means the run
itself errored (bad config, precondition violations) and wrote nothing.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import flows, groups, jets, lipcalc, orbits
from .errors import ConfigInvalid, DegenerateInput, MissingArtifact, NilfixError
from .lipcalc import CheckRecord

SCHEMA_VERSION = "1"
CSV_VERSION = "nilfix-csv v1"

KINDS = ("calc", "orbit", "locate", "flows", "jets", "groups")

# tasks that draw samples; their configs must carry a seed
_SAMPLING = {
    ("calc", "propagation"),
    ("calc", "displacement_floor"),
    ("calc", "displacement_angle"),
    ("flows", "transport"),
    ("jets", "roundtrips"),
    ("locate", "staged"),
}


def max_threads() -> int:
    """Parallelism cap from NILFIX_THREADS; pipelines are sequential, so the
    cap is honored trivially, but it is parsed and validated here."""
    raw = os.environ.get("NILFIX_THREADS", "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# serialization helpers


def _sanitize(obj):
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def _cell(value) -> str:
    value = _sanitize(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _atomic_write(path: Path, data: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(data, encoding="utf-8")
    os.replace(tmp, path)


def _write_artifacts(
    out_dir: Path,
    certificate: dict,
    csv_header: Sequence[str],
    csv_rows: Sequence[Sequence],
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    cert_text = json.dumps(_sanitize(certificate), sort_keys=True, indent=2) + "\n"
    lines = [
        f"# {CSV_VERSION} kind={certificate['kind']} task={certificate['task']}",
        ",".join(csv_header),
    ]
    for row in csv_rows:
        lines.append(",".join(_cell(v) for v in row))
    _atomic_write(out_dir / "certificate.json", cert_text)
    _atomic_write(out_dir / "data.csv", "\n".join(lines) + "\n")


def _record(check: str, inputs: dict, measured, bound, passed: bool, **details) -> dict:
    return CheckRecord(
        check=check,
        inputs=inputs,
        measured=measured,
        bound=bound,
        passed=bool(passed),
        details=details,
    ).to_json_dict()


# ---------------------------------------------------------------------------
# deterministic random maps for the calc pipelines


def _random_rotation(rng, theta_max: float) -> lipcalc.CertifiedMap:
    theta = float(rng.uniform(-theta_max, theta_max))
    center = (float(rng.uniform(-3, 3)), float(rng.uniform(-3, 3)))
    return lipcalc.rotation_map(theta, center)


def _random_poly(rng, coeff_max: float, box) -> lipcalc.CertifiedMap:
    n_roots = int(rng.integers(1, 3))
    roots = [
        (float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2))) for _ in range(n_roots)
    ]
    coeff = float(rng.uniform(0.2, 1.0) * coeff_max * rng.choice([-1.0, 1.0]))
    return lipcalc.poly_field_map(coeff, roots, box)


def _random_leaf(rng, theta_max: float, coeff_max: float, box) -> lipcalc.CertifiedMap:
    if rng.random() < 0.6:
        return _random_rotation(rng, theta_max)
    return _random_poly(rng, coeff_max, box)


def _random_expression(
    rng, depth: int, theta_max: float, coeff_max: float, box, bound_cap: float
) -> lipcalc.CertifiedMap:
    """Random expression tree whose propagated bound stays below bound_cap."""
    if depth <= 0:
        return _random_leaf(rng, theta_max, coeff_max, box)
    roll = rng.random()
    try:
        if roll < 0.35:
            f = _random_expression(rng, depth - 1, theta_max, coeff_max, box, bound_cap)
            g = _random_expression(rng, depth - 1, theta_max, coeff_max, box, bound_cap)
            out = lipcalc.compose_maps(f, g)
        elif roll < 0.55:
            f = _random_expression(rng, depth - 1, theta_max, coeff_max, box, bound_cap)
            out = lipcalc.inverse_map(f)
        elif roll < 0.75:
            f = _random_expression(rng, depth - 1, theta_max, coeff_max, box, bound_cap)
            g = _random_expression(rng, depth - 1, theta_max, coeff_max, box, bound_cap)
            out = lipcalc.commutator_map(f, g)
        else:
            f = _random_expression(rng, depth - 1, theta_max, coeff_max, box, bound_cap)
            out = lipcalc.isotopy_stage(f, float(rng.uniform(0.0, 1.0)))
    except NilfixError:
        return _random_leaf(rng, theta_max, coeff_max, box)
    if float(out.eps) >= bound_cap:
        return _random_leaf(rng, theta_max, coeff_max, box)
    return out


def _random_base_map(rng, box) -> lipcalc.CertifiedMap:
    """Map certified into the base class (eps <= 1/8), varied in shape."""
    roll = rng.random()
    if roll < 0.4:
        return lipcalc.rotation_map(
            float(rng.uniform(0.02, 0.124) * rng.choice([-1.0, 1.0])),
            (float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1))),
        )
    if roll < 0.6:
        return _random_poly(rng, 0.0008, box)
    if roll < 0.8:
        f = lipcalc.rotation_map(float(rng.uniform(0.02, 0.1)))
        g = _random_poly(rng, 0.0003, box)
        return lipcalc.compose_maps(f, g)
    return lipcalc.isotopy_stage(
        lipcalc.rotation_map(float(rng.uniform(0.05, 0.124))), float(rng.uniform(0.3, 1.0))
    )


def _nonfixed_point(rng, cmap: lipcalc.CertifiedMap) -> tuple[np.ndarray, float]:
    for _ in range(32):
        p = np.array([float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2))])
        d0 = float(
            np.linalg.norm(lipcalc.displacement_batch(cmap, p[None, :], 1e-12)[0])
        )
        if d0 > 1e-6:
            return p, d0
    raise DegenerateInput("could not sample a non-fixed base point")


# ---------------------------------------------------------------------------
# calc tasks


def _task_epsilon_table(params: dict, seed: Optional[int]):
    sigma_max = int(params.get("sigma_max", 5))
    rows = []
    checks = []
    prev_eps: Optional[Fraction] = None
    for sigma in range(sigma_max + 1):
        eps, delta = lipcalc.epsilon_sigma(sigma)
        rows.append([sigma, eps, delta])
        if prev_eps is not None and not eps < prev_eps:
            checks.append(
                _record(
                    f"table_strictly_nested_sigma{sigma}",
                    {"sigma": sigma},
                    str(eps),
                    f"< {prev_eps}",
                    False,
                )
            )
        prev_eps = eps
        eps_next, _ = lipcalc.epsilon_sigma(sigma + 1)
        checks.append(
            _record(
                f"delta_matches_next_class_sigma{sigma}",
                {"sigma": sigma},
                str(delta),
                str(eps_next),
                delta == eps_next,
            )
        )
    expected = params.get("expected")
    if expected:
        for sigma, exp_str in enumerate(expected):
            eps, _ = lipcalc.epsilon_sigma(sigma)
            got = f"{eps.numerator}/{eps.denominator}"
            checks.append(
                _record(
                    f"epsilon_exact_sigma{sigma}",
                    {"sigma": sigma},
                    got,
                    exp_str,
                    got == exp_str,
                )
            )
    return checks, ["sigma", "epsilon", "delta"], rows


def _task_propagation(params: dict, seed: Optional[int]):
    n = int(params.get("n_expressions", 100))
    pairs = int(params.get("pairs", 10000))
    region = tuple(params.get("region", (-10.0, 10.0, -10.0, 10.0)))
    theta_max = float(params.get("theta_max", 0.12))
    depth = int(params.get("depth", 3))
    slack = float(params.get("slack", 1e-9))
    box = tuple(params.get("poly_box", (-20.0, 20.0, -20.0, 20.0)))
    rng = np.random.default_rng(seed)
    checks = []
    rows = []
    for i in range(n):
        cmap = _random_expression(rng, int(rng.integers(0, depth + 1)),
                                  theta_max, 0.0015, box, 0.5)
        est = lipcalc.estimate_lip_identity(
            cmap, region, pairs=pairs, rng_seed=int(rng.integers(2**31)), tol=1e-13
        )
        bound = float(cmap.eps)
        checks.append(
            _record(
                f"sampled_quotient_within_bound_{i}",
                {"expr": cmap.expr.kind, "pairs": pairs},
                est,
                bound + slack,
                est <= bound + slack,
            )
        )
        rows.append([i, cmap.expr.kind, bound, est])
    return checks, ["index", "kind", "bound", "sampled_quotient"], rows


def _task_displacement_floor(params: dict, seed: Optional[int]):
    n = int(params.get("n_maps", 20))
    grid = int(params.get("grid", 200))
    box = tuple(params.get("poly_box", (-20.0, 20.0, -20.0, 20.0)))
    rng = np.random.default_rng(seed)
    checks = []
    rows = []
    for i in range(n):
        cmap = _random_base_map(rng, box)
        p, d0 = _nonfixed_point(rng, cmap)
        rec = lipcalc.displacement_floor_check(cmap, p, grid=grid)
        rec_dict = rec.to_json_dict()
        rec_dict["check"] = f"displacement_floor_{i}"
        checks.append(rec_dict)
        rows.append([i, cmap.expr.kind, d0, rec.measured, rec.bound])
    return checks, ["index", "kind", "base_displacement", "grid_min", "floor"], rows


def _task_displacement_angle(params: dict, seed: Optional[int]):
    n = int(params.get("n_maps", 20))
    pairs = int(params.get("pairs", 1000))
    box = tuple(params.get("poly_box", (-20.0, 20.0, -20.0, 20.0)))
    slack = float(params.get("slack", 1e-9))
    rng = np.random.default_rng(seed)
    checks = []
    rows = []
    for i in range(n):
        cmap = _random_base_map(rng, box)
        p, d0 = _nonfixed_point(rng, cmap)
        radius = 4.0 * d0
        worst = 0.0
        for _ in range(pairs):
            ang = rng.uniform(0, 2 * math.pi, size=2)
            rad = radius * np.sqrt(rng.uniform(0, 1, size=2))
            z1 = (p[0] + rad[0] * math.cos(ang[0]), p[1] + rad[0] * math.sin(ang[0]))
            z2 = (p[0] + rad[1] * math.cos(ang[1]), p[1] + rad[1] * math.sin(ang[1]))
            rec = lipcalc.displacement_angle_check(cmap, p, z1, z2)
            worst = max(worst, rec.measured)
        bound = math.pi / 3 + slack
        checks.append(
            _record(
                f"angle_within_third_pi_{i}",
                {"map": cmap.expr.kind, "pairs": pairs},
                worst,
                bound,
                worst <= bound,
            )
        )
        rows.append([i, cmap.expr.kind, d0, worst])
    return checks, ["index", "kind", "base_displacement", "worst_angle"], rows


# ---------------------------------------------------------------------------
# orbit / locate tasks


def _map_from_params(params: dict) -> lipcalc.CertifiedMap:
    if "map" not in params:
        raise ConfigInvalid("params.map is required")
    return lipcalc.map_from_json(params["map"])


def _task_winding_capital(params: dict, seed: Optional[int]):
    cmap = _map_from_params(params)
    p = tuple(params.get("p", (1.0, 0.0)))
    budget = int(params.get("orbit_budget", 2000))
    rec_tol = float(params.get("recurrence_tol", 0.05))
    expect_n = int(params.get("expect_recurrence_n", 52))
    q = tuple(params.get("q", (0.0, 0.0)))
    expect_index = int(params.get("expect_index", 1))
    q_bound = float(params.get("q_bound", 1e-6))
    loc_tol = float(params.get("locate_tol", 1e-7))

    orbit = orbits.iterate_orbit(cmap, p, budget)
    events = orbits.detect_recurrence(orbit, rec_tol)
    ns = [e.n for e in events]
    checks = [
        _record(
            "recurrence_time_found",
            {"p": list(p), "tol": rec_tol},
            ns[:8],
            expect_n,
            expect_n in ns,
        )
    ]
    gamma = orbits.build_gamma(cmap, p, expect_n)
    ind = orbits.winding_number(gamma, q, guard=1e-9)
    checks.append(
        _record(
            "orbit_curve_winding",
            {"m": expect_n, "q": list(q)},
            ind,
            expect_index,
            ind == expect_index,
        )
    )
    res = orbits.locate_fixed_point(
        cmap, p, orbits.LocateConfig(tol=loc_tol, orbit_budget=budget)
    )
    dist = math.hypot(res.q[0] - q[0], res.q[1] - q[1])
    checks.append(
        _record(
            "locate_certificate_kind",
            {"p": list(p)},
            res.certificate,
            "enclosed",
            res.certificate == "enclosed",
        )
    )
    checks.append(
        _record("locate_fixed_point_close", {"q_true": list(q)}, dist, q_bound, dist <= q_bound)
    )
    rows = [[e.n, e.distance] for e in events]
    return checks, ["n", "distance"], rows


def _task_simple_loop(params: dict, seed: Optional[int]):
    cmap = _map_from_params(params)
    p = tuple(params.get("p", (1.0, 0.0)))
    m = int(params.get("m", 105))
    expect_index = int(params.get("expect_index", 1))
    gamma = orbits.build_gamma(cmap, p, m)
    simple = orbits.extract_simple_loop(gamma)
    is_simple = orbits.is_simple(simple)
    checks = [
        _record(
            "extracted_loop_simple",
            {"m": m, "vertices": len(simple.vertices)},
            is_simple,
            True,
            is_simple,
        )
    ]
    ind = orbits.displacement_index(cmap, simple)
    checks.append(
        _record(
            "displacement_index",
            {"vertices": len(simple.vertices)},
            ind,
            expect_index,
            ind == expect_index,
        )
    )
    rows = [[i, x, y] for i, (x, y) in enumerate(simple.vertices)]
    return checks, ["vertex", "x", "y"], rows


def _flow_maps_from_params(params: dict, seed: Optional[int]):
    flow_params = params.get("flows")
    if not flow_params:
        raise ConfigInvalid("params.flows is required")
    k = int(flow_params.get("k", 1))
    p_exp = int(flow_params.get("p", 2))
    depth = int(flow_params.get("depth", 2))
    t = float(flow_params.get("t", 0.05))
    cfg = flows.IntegratorConfig.from_json(flow_params.get("integrator", {}))
    eps_region = tuple(flow_params.get("eps_region", (-1.5, 1.5, -1.5, 1.5)))
    fields = flows.make_example_fields(k, p_exp, depth)
    return [
        flows.flow_map(
            fields.scaled[j], t, cfg, eps_region=eps_region, seed=(seed or 0) + j
        )
        for j in range(depth)
    ]


def _task_staged(params: dict, seed: Optional[int]):
    maps = _flow_maps_from_params(params, seed)
    p = tuple(params.get("p", (1.0, 0.0)))
    loc = params.get("locate", {})
    config = orbits.LocateConfig(
        tol=float(loc.get("tol", 1e-6)),
        orbit_budget=int(loc.get("orbit_budget", 20000)),
        inclusion_tol=float(loc.get("inclusion_tol", 1e-2)),
        inclusion_budget=int(loc.get("inclusion_budget", 64)),
        allow_uncertified=bool(loc.get("allow_uncertified", False)),
        polish_maxiter=int(loc.get("polish_maxiter", 400)),
    )
    line_bound = float(params.get("line_distance_bound", 1e-4))
    result = orbits.locate_global_fixed_point(maps, p, config)
    checks = []
    rows = []
    for st in result.stages:
        checks.append(
            _record(
                f"stage_{st.stage}_inclusion",
                {"q": list(st.q), "certificate": st.certificate},
                st.inclusion_margin,
                config.inclusion_tol,
                st.inclusion_ok,
            )
        )
        checks.append(
            _record(
                f"stage_{st.stage}_joint_displacement",
                {"q": list(st.q)},
                max(st.displacements),
                config.tol,
                max(st.displacements) <= config.tol,
            )
        )
        rows.append(
            [st.stage, st.q[0], st.q[1], max(st.displacements), st.inclusion_margin]
        )
    line_dist = abs(result.q[0])
    checks.append(
        _record(
            "near_singular_line",
            {"q": list(result.q)},
            line_dist,
            line_bound,
            line_dist <= line_bound,
        )
    )
    return checks, ["stage", "qx", "qy", "joint_displacement", "inclusion_margin"], rows


# ---------------------------------------------------------------------------
# flows tasks


def _task_identities(params: dict, seed: Optional[int]):
    cases = [tuple(c) for c in params.get("cases", [(1, 1), (1, 2), (2, 3)])]
    checks = []
    rows = []
    for k, p_exp in cases:
        fields = flows.make_example_fields(k, p_exp)
        tests = [
            ("rotational_conserves_alpha",
             flows.directional_derivative(fields.X1, fields.alpha).equals_constant(0)),
            ("transversal_moves_alpha_unit",
             flows.directional_derivative(fields.Y1, fields.alpha).equals_constant(1)),
            ("rotational_moves_beta_unit",
             flows.directional_derivative(fields.X1, fields.beta).equals_constant(1)),
            ("transversal_conserves_beta",
             flows.directional_derivative(fields.Y1, fields.beta).equals_constant(0)),
            ("frame_commutes",
             flows.lie_bracket(fields.X1, fields.Y1).is_zero()),
        ]
        for name, ok in tests:
            checks.append(
                _record(
                    f"{name}_k{k}p{p_exp}",
                    {"k": k, "p": p_exp},
                    bool(ok),
                    True,
                    bool(ok),
                )
            )
            rows.append([k, p_exp, name, bool(ok)])
    return checks, ["k", "p", "identity", "holds"], rows


def _task_transport(params: dict, seed: Optional[int]):
    k = int(params.get("k", 1))
    p_exp = int(params.get("p", 2))
    t = float(params.get("t", 0.1))
    n_seeds = int(params.get("n_seeds", 20))
    tol_drift = float(params.get("tol_drift", 1e-6))
    tol_conserve = float(params.get("tol_conserve", 1e-8))
    rng = np.random.default_rng(seed)
    fields = flows.make_example_fields(k, p_exp)
    seeds = []
    for _ in range(n_seeds):
        ang = float(rng.uniform(0, 2 * math.pi))
        rad = float(rng.uniform(0.9, 2.0))
        seeds.append((rad * math.cos(ang), rad * math.sin(ang)))
    cfg = flows.IntegratorConfig(tol=float(params.get("integrator_tol", 1e-12)))
    records = flows.integral_transport_check(
        fields, t, seeds, cfg, tol_drift=tol_drift, tol_conserve=tol_conserve
    )
    checks = []
    rows = []
    for i, rec in enumerate(records):
        d = rec.to_json_dict()
        d["check"] = f"{rec.check}_{i // 2}"
        checks.append(d)
        rows.append(
            [i // 2, rec.inputs["seed"][0], rec.inputs["seed"][1], rec.check, rec.measured]
        )
    return checks, ["seed_index", "x", "y", "check", "drift"], rows


# ---------------------------------------------------------------------------
# jets task


def _random_poly_terms(rng, K: int, density: float = 0.35) -> "dict":
    coeffs = {}
    for total in range(2, K + 1):
        for i in range(total + 1):
            if rng.random() < density:
                num = int(rng.integers(-3, 4))
                if num:
                    coeffs[(i, total - i)] = Fraction(num, int(rng.integers(1, 4)))
    return coeffs


def _random_jetvf(rng, K: int) -> jets.JetVF:
    from .poly2 import Poly2

    while True:
        P = Poly2(_random_poly_terms(rng, K))
        Q = Poly2(_random_poly_terms(rng, K))
        if not (P.is_zero() and Q.is_zero()):
            return jets.JetVF(P, Q, K)


def _random_jet2(rng, K: int, density: float = 0.35) -> jets.Jet2:
    from .poly2 import Poly2

    while True:
        u = Poly2.x() + Poly2(_random_poly_terms(rng, K, density))
        v = Poly2.y() + Poly2(_random_poly_terms(rng, K, density))
        jet = jets.Jet2(u, v, K)
        if not jet.is_identity():
            return jet


def _task_roundtrips(params: dict, seed: Optional[int]):
    K_round = int(params.get("roundtrip_K", 6))
    n_round = int(params.get("roundtrip_count", 50))
    K_bch = int(params.get("bch_K", 5))
    n_bch = int(params.get("bch_count", 20))
    n_nu = int(params.get("nu_count", 1000))
    K_nu = int(params.get("nu_K", 6))
    rng = np.random.default_rng(seed)
    checks = []
    rows = []

    exact = 0
    for _ in range(n_round):
        Z = _random_jetvf(rng, K_round)
        if jets.jet_log(jets.jet_exp(Z)) == Z:
            exact += 1
    checks.append(
        _record(
            "exp_log_roundtrip_exact",
            {"K": K_round, "count": n_round},
            exact,
            n_round,
            exact == n_round,
        )
    )
    rows.append(["exp_log_roundtrip", exact, n_round])

    agreed = 0
    for _ in range(n_bch):
        Z = _random_jetvf(rng, K_bch)
        W = _random_jetvf(rng, K_bch)
        try:
            jets.bch(Z, W, verify=True)
            agreed += 1
        except jets.DynkinMismatch:
            pass
    checks.append(
        _record(
            "bch_series_agreement",
            {"K": K_bch, "count": n_bch},
            agreed,
            n_bch,
            agreed == n_bch,
        )
    )
    rows.append(["bch_agreement", agreed, n_bch])

    # sparse jets keep the commutator arithmetic affordable at this volume
    nu_density = float(params.get("nu_density", 0.2))
    grew = 0
    min_margin = None
    for _ in range(n_nu):
        a = _random_jet2(rng, K_nu, nu_density)
        b = _random_jet2(rng, K_nu, nu_density)
        base = max(jets.nu_order(a), jets.nu_order(b))
        comm = jets.nu_order(jets.jet_commutator(a, b))
        margin = comm - base
        if min_margin is None or margin < min_margin:
            min_margin = margin
        if margin > 0:
            grew += 1
    checks.append(
        _record(
            "commutator_contact_order_grows",
            {"K": K_nu, "count": n_nu},
            {"strict_count": grew, "min_margin": min_margin},
            n_nu,
            grew == n_nu,
        )
    )
    rows.append(["nu_growth", grew, n_nu])
    return checks, ["check", "count_ok", "count_total"], rows


# ---------------------------------------------------------------------------
# groups task


def _task_classes(params: dict, seed: Optional[int]):
    checks = []
    rows = []
    for n in params.get("unitriangular", [2, 3, 4, 5]):
        n = int(n)
        model = groups.unitriangular_model(n)
        cls = groups.nilpotency_class(model.generator_set(), depth_cap=n)
        checks.append(
            _record(
                f"unitriangular_class_n{n}",
                {"n": n},
                cls,
                n - 1,
                cls == n - 1,
            )
        )
        rows.append([f"unitriangular_{n}", cls, n - 1])

    for fam in params.get("families", []):
        k = int(fam["k"])
        p_exp = int(fam["p"])
        depth = int(fam["depth"])
        Ks = [int(v) for v in fam.get("K", [8, 10])]
        expected = int(fam.get("expected_class", depth))
        fields = flows.make_example_fields(k, p_exp, depth)
        basis_fields = list(fields.scaled) + [fields.Y1]
        per_K = {}
        for K in Ks:
            gens = [jets.jet_exp(flows.jet_of_vf(F, K)) for F in basis_fields]
            per_K[K] = jets.group_class_check(gens, depth_cap=depth + 1)
        stable = len(set(per_K.values())) == 1
        got = per_K[Ks[-1]]
        checks.append(
            _record(
                f"jet_group_class_k{k}p{p_exp}l{depth}",
                {"K": Ks},
                {str(K): v for K, v in per_K.items()},
                expected,
                stable and got == expected,
            )
        )
        rows.append([f"jet_class_k{k}p{p_exp}", got, expected])

        K_alg = max(Ks)
        basis_jets = [flows.jet_of_vf(F, K_alg) for F in basis_fields]
        series = jets.algebra_lcs(basis_jets)
        exp_dims = [int(v) for v in fam.get("expected_dims", [])]
        dims_ok = list(series.dims) == exp_dims if exp_dims else True
        layer_ok = True
        for j in range(1, len(series.dims) - 1):
            want = [flows.jet_of_vf(fields.scaled[i], K_alg) for i in range(depth - j)]
            got_dim = jets.span_dim(series.layers[j])
            union_dim = jets.span_dim(list(series.layers[j]) + want)
            if not (got_dim == len(want) == union_dim):
                layer_ok = False
        checks.append(
            _record(
                f"algebra_lcs_k{k}p{p_exp}l{depth}",
                {"K": K_alg},
                {"dims": list(series.dims), "layers_match": layer_ok},
                exp_dims,
                dims_ok and layer_ok,
            )
        )
        rows.append([f"algebra_dims_k{k}p{p_exp}", list(series.dims), exp_dims])
    return checks, ["case", "measured", "expected"], rows


_TASKS: dict[tuple[str, str], Callable] = {
    ("calc", "epsilon_table"): _task_epsilon_table,
    ("calc", "propagation"): _task_propagation,
    ("calc", "displacement_floor"): _task_displacement_floor,
    ("calc", "displacement_angle"): _task_displacement_angle,
    ("locate", "single"): _task_winding_capital,
    ("locate", "staged"): _task_staged,
    ("orbit", "simple_loop"): _task_simple_loop,
    ("flows", "identities"): _task_identities,
    ("flows", "transport"): _task_transport,
    ("jets", "roundtrips"): _task_roundtrips,
    ("groups", "classes"): _task_classes,
}


# ---------------------------------------------------------------------------
# config validation and subcommands


def _load_config(path: Path) -> dict:
    if not path.exists():
        raise ConfigInvalid(f"config file not found: {path}")
    try:
        config = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"config is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigInvalid("config root must be a JSON object")
    kind = config.get("kind")
    if kind not in KINDS:
        raise ConfigInvalid(f"config.kind must be one of {KINDS}, got {kind!r}")
    task = config.get("task")
    if (kind, task) not in _TASKS:
        known = sorted(t for k, t in _TASKS if k == kind)
        raise ConfigInvalid(f"config.task for kind={kind} must be one of {known}")
    if "out" not in config:
        raise ConfigInvalid("config.out (artifact directory) is required")
    seed = config.get("seed")
    if (kind, task) in _SAMPLING and not isinstance(seed, int):
        raise ConfigInvalid(f"config.seed (integer) is mandatory for {kind}/{task}")
    params = config.get("params", {})
    if not isinstance(params, dict):
        raise ConfigInvalid("config.params must be an object")
    return config


def run(config_path: str) -> int:
    try:
        config = _load_config(Path(config_path))
    except ConfigInvalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    kind, task = config["kind"], config["task"]
    seed = config.get("seed")
    try:
        checks, header, rows = _TASKS[(kind, task)](config.get("params", {}), seed)
    except NilfixError as exc:
        print(f"error: {kind}/{task}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    all_pass = all(c["pass"] for c in checks)
    certificate = {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "task": task,
        "seed": seed,
        "params": config.get("params", {}),
        "checks": checks,
        "pass": all_pass,
    }
    out_dir = Path(config_path).parent / config["out"] if not os.path.isabs(
        config["out"]
    ) else Path(config["out"])
    _write_artifacts(out_dir, certificate, header, rows)
    return 0 if all_pass else 2


def report(artifact_dir: str) -> int:
    cert_path = Path(artifact_dir) / "certificate.json"
    if not cert_path.exists():
        print(f"error: {MissingArtifact.__name__}: {cert_path} not found", file=sys.stderr)
        return 1
    certificate = json.loads(cert_path.read_text(encoding="utf-8"))
    print(f"{certificate['kind']}/{certificate['task']} "
          f"(schema {certificate['schema_version']}, seed {certificate.get('seed')})")
    for check in certificate["checks"]:
        status = "PASS" if check["pass"] else "FAIL"
        print(
            f"{status} {check['check']}: measured={check['measured']} "
            f"bound={check['bound']}"
        )
    overall = "PASS" if certificate["pass"] else "FAIL"
    print(f"OVERALL {overall}")
    return 0


def schema(kind: str) -> int:
    if kind not in KINDS:
        print(f"error: unknown kind {kind!r}; choose from {KINDS}", file=sys.stderr)
        return 1
    tasks = sorted(t for k, t in _TASKS if k == kind)
    doc = {
        "kind": kind,
        "config": {
            "kind": kind,
            "task": f"one of {tasks}",
            "seed": "integer, mandatory for sampling tasks",
            "out": "artifact directory (relative paths resolve against the config file)",
            "params": "task parameters; unknown keys rejected only by the task itself",
        },
        "tasks": tasks,
        "artifacts": {
            "certificate.json": "checks with measured vs bound, overall pass",
            "data.csv": f"'# {CSV_VERSION} kind=.. task=..' header line, then columns",
        },
    }
    if kind in ("calc", "orbit", "locate"):
        doc["map_format"] = lipcalc.map_schema()
    print(json.dumps(_sanitize(doc), sort_keys=True, indent=2))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="nilfix",
        description="Desk-scale verification runs for plane-homeomorphism "
        "fixed-point experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config", help="path to a JSON experiment config")
    p_report = sub.add_parser("report", help="summarize run artifacts")
    p_report.add_argument("dir", help="artifact directory of a previous run")
    p_schema = sub.add_parser("schema", help="print the config schema for a kind")
    p_schema.add_argument("kind", help=f"one of {', '.join(KINDS)}")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.config)
    if args.command == "report":
        return report(args.dir)
    return schema(args.kind)


def console() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console()
