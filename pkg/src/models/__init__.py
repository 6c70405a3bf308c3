from .algebra import (
    BracketLimit,
    CarnotStructure,
    Convergence,
    Filtration,
    LieAlgebraSpec,
    MagicIdentityReport,
    ValidationReport,
)
from .curves import LinearCandidate, LinearClass, PansuEstimate, SampledCurve
from .group import (
    BoxConstants,
    CCDistanceResult,
    DimensionEstimate,
    GroupElement,
    HorizontalPath,
    NormKind,
    WordFactorization,
)
from .heisenberg import HamiltonianKind, HamiltonianSpec, HoferCheck, HoferLength, HPoint, Invariants
from .metric import ConeExperiment, FiniteMetricSpace, GHBound, MeasureEstimate, MetricCurve, MidpointReport
from .reports import InvariantCheck, RunManifest

__all__ = [
    "BracketLimit",
    "CarnotStructure",
    "Convergence",
    "Filtration",
    "LieAlgebraSpec",
    "MagicIdentityReport",
    "ValidationReport",
    "LinearCandidate",
    "LinearClass",
    "PansuEstimate",
    "SampledCurve",
    "BoxConstants",
    "CCDistanceResult",
    "DimensionEstimate",
    "GroupElement",
    "HorizontalPath",
    "NormKind",
    "WordFactorization",
    "HamiltonianKind",
    "HamiltonianSpec",
    "HoferCheck",
    "HoferLength",
    "HPoint",
    "Invariants",
    "ConeExperiment",
    "FiniteMetricSpace",
    "GHBound",
    "MeasureEstimate",
    "MetricCurve",
    "MidpointReport",
    "InvariantCheck",
    "RunManifest",
]
