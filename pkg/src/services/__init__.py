from .algebra_core import carnot_structure, nilpotentize, validate_algebra
from .algebra_io import load_algebra, save_algebra
from .catalog import CATALOG, builtin
from .group_ops import (
    bch_multiply,
    cc_distance_upper,
    hausdorff_dimension_estimate,
    homogeneous_norm,
    path_endpoint,
)
from .heisenberg import LiftedMap, lift_symplectomorphism
from .pansu import classify_linear, pansu_derivative_estimate

__all__ = [
    "carnot_structure",
    "nilpotentize",
    "validate_algebra",
    "load_algebra",
    "save_algebra",
    "CATALOG",
    "builtin",
    "bch_multiply",
    "cc_distance_upper",
    "hausdorff_dimension_estimate",
    "homogeneous_norm",
    "path_endpoint",
    "LiftedMap",
    "lift_symplectomorphism",
    "classify_linear",
    "pansu_derivative_estimate",
]
