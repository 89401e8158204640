import math

from subgauss.distributions.distributions import (
    SQRT3,
    DistributionSpec,
    GridDensity,
    GridDeviation,
    GridParams,
    GridSpec,
    SpectralDeviation,
    TrigGaussian,
    TrigPoly,
    Uniform,
    WeightedUniformSum,
    admissible_range,
    build_trig_gaussian,
    phi,
    sin_power_poly,
    uniform_density,
    verify_laplace_identity,
    weighted_uniform_sum,
)
from subgauss.distributions.cumulants import CumulantReport, moments_and_cumulants
from subgauss.errors import ValidationError

SPEC_KINDS = {cls.kind: cls for cls in (TrigGaussian, Uniform, WeightedUniformSum, GridSpec)}

BUILTIN_SPECS = [
    "normal",
    "uniform",
    "sin4",
    "sin4_root_pi6",
    "wsum_half",
    "wsum_08_06",
]


def root_pi6_poly():
    """(1 - 4 sin^2 t)^2 sin^4 t: P >= 0 with interior roots pi/6, 5pi/6 where P'' != 0."""
    return TrigPoly(
        a0=9 / 4,
        cos_terms=[(2, -15 / 4), (4, 17 / 8), (6, -3 / 4), (8, 1 / 8)],
    )


def get_builtin(name):
    """Built-in laws used throughout the tests and as CLI shortcuts."""
    if name == "normal":
        return TrigGaussian(TrigPoly(), 0.0)
    if name == "uniform":
        return Uniform()
    if name == "sin4":
        return TrigGaussian(sin_power_poly(4), 2e-3)
    if name == "sin4_root_pi6":
        return TrigGaussian(root_pi6_poly(), 1e-14)
    if name == "wsum_half":
        return WeightedUniformSum((1 / math.sqrt(2), 1 / math.sqrt(2)))
    if name == "wsum_08_06":
        return WeightedUniformSum((0.8, 0.6))
    raise NotImplementedError(f"Built-in spec not found: {name}")


def get_spec_class(kind):
    """Return the spec class with the given JSON kind."""
    if kind not in SPEC_KINDS:
        raise NotImplementedError(f"Spec kind not found: {kind}")
    return SPEC_KINDS[kind]


def spec_from_dict(doc):
    """Build a spec from its JSON document; shape problems become ValidationError."""
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ValidationError("spec must be an object with a 'kind' field")
    kind = doc["kind"]
    if kind == "builtin":
        return get_builtin(doc.get("name"))
    try:
        cls = get_spec_class(kind)
    except NotImplementedError as e:
        raise ValidationError(str(e))
    try:
        if cls is TrigGaussian:
            P = TrigPoly(a0=doc.get("a0", 0.0), cos_terms=doc.get("cos", []), sin_terms=doc.get("sin", []))
            return TrigGaussian(P, doc.get("c", 0.0))
        if cls is Uniform:
            return Uniform(doc.get("halfwidth", SQRT3))
        if cls is WeightedUniformSum:
            return WeightedUniformSum(tuple(doc.get("weights", [1.0])))
        return GridSpec(GridDensity(doc["x0"], doc["dx"], doc["values"]))
    except (KeyError, TypeError, AssertionError) as e:
        raise ValidationError(f"malformed {kind} spec: {e}")


__all__ = [
    "BUILTIN_SPECS",
    "CumulantReport",
    "DistributionSpec",
    "GridDensity",
    "GridDeviation",
    "GridParams",
    "GridSpec",
    "SpectralDeviation",
    "TrigGaussian",
    "TrigPoly",
    "Uniform",
    "WeightedUniformSum",
    "admissible_range",
    "build_trig_gaussian",
    "get_builtin",
    "get_spec_class",
    "moments_and_cumulants",
    "phi",
    "sin_power_poly",
    "spec_from_dict",
    "uniform_density",
    "verify_laplace_identity",
    "weighted_uniform_sum",
]
