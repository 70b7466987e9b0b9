"""Desk-scale verification toolkit for nilpotent groups of plane
homeomorphisms that are Lipschitz-close to the identity.

Submodules:
    lipcalc  certified Lipschitz-from-identity bounds and geometric checks
    orbits   orbit curves, winding certificates, fixed-point location
    flows    exact example vector fields and their numeric flows
    jets     truncated jets, exp/log, combination series, algebra layers
    groups   abstract commutator calculus and the unitriangular model
    geom     exact rational planar predicates
    poly2    sparse bivariate polynomials over the rationals
    cli      reproducible experiment runner
"""

from . import cli, errors, flows, geom, groups, jets, lipcalc, orbits, poly2
from .errors import NilfixError
from .lipcalc import (
    CertifiedMap,
    CheckRecord,
    LipClassTable,
    certify,
    compose_maps,
    commutator_map,
    epsilon_sigma,
    evaluate,
    evaluate_batch,
    inverse_map,
    isotopy_stage,
    rotation_map,
    translation_map,
)
from .orbits import (
    LocateConfig,
    locate_fixed_point,
    locate_global_fixed_point,
)

__version__ = "0.1.0"

__all__ = [
    "cli",
    "errors",
    "flows",
    "geom",
    "groups",
    "jets",
    "lipcalc",
    "orbits",
    "poly2",
    "NilfixError",
    "CertifiedMap",
    "CheckRecord",
    "LipClassTable",
    "certify",
    "compose_maps",
    "commutator_map",
    "epsilon_sigma",
    "evaluate",
    "evaluate_batch",
    "inverse_map",
    "isotopy_stage",
    "rotation_map",
    "translation_map",
    "LocateConfig",
    "locate_fixed_point",
    "locate_global_fixed_point",
    "__version__",
]
