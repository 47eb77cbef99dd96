"""Arithmetic degrees, dynamical degrees and canonical heights for rational self-maps over Q."""

from .degree import (
    CanonicalHeightValue,
    ContainedInCurve,
    DegreeEstimate,
    KSConfig,
    KSReport,
    NoVanishingCurve,
    Verdict,
    alpha_ratio,
    alpha_root,
    canonical_height,
    ks_verdict,
    vanishing_curve_search,
)
from .elliptic import EllipticCurve, EllipticPoint, INFINITY
from .errors import ArithDynError
from .experiments import build_disjoint_orbits, find_full_degree_points, run_experiment
from .heights import Embedding, ProjectivePoint, TorusPoint, torus_height, weil_height
from .maps import (
    EllipticMap,
    MonomialMap,
    ProductMap,
    ProductPoint,
    ProjectivePolyMap,
    RuledNSMap,
    iterate_orbit,
    power_map,
)
from .ns import NSModel, PullbackAction, check_pullback, ruled_solve, spectral_radius

__version__ = "0.1.0"

__all__ = [
    "ArithDynError",
    "CanonicalHeightValue",
    "ContainedInCurve",
    "DegreeEstimate",
    "EllipticCurve",
    "EllipticMap",
    "EllipticPoint",
    "Embedding",
    "INFINITY",
    "KSConfig",
    "KSReport",
    "MonomialMap",
    "NSModel",
    "NoVanishingCurve",
    "ProductMap",
    "ProductPoint",
    "ProjectivePoint",
    "ProjectivePolyMap",
    "PullbackAction",
    "RuledNSMap",
    "TorusPoint",
    "Verdict",
    "alpha_ratio",
    "alpha_root",
    "build_disjoint_orbits",
    "canonical_height",
    "check_pullback",
    "find_full_degree_points",
    "iterate_orbit",
    "ks_verdict",
    "power_map",
    "ruled_solve",
    "run_experiment",
    "spectral_radius",
    "torus_height",
    "vanishing_curve_search",
    "weil_height",
]
