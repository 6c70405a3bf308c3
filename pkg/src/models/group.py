from enum import Enum
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.exceptions import InputError


class NormKind(str, Enum):
    ONE = "one"
    INF = "inf"


class GroupElement(BaseModel):
    """Point of the group in exponential coordinates of the first kind"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    coords: np.ndarray

    @field_validator("coords", mode="before")
    @classmethod
    def _as_array(cls, value):
        arr = np.asarray(value, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise InputError("Group element has non-finite coordinates")
        return arr


class HorizontalPath(BaseModel):
    """Piecewise-constant controls in adapted coordinates; V_1 is the first ``horizontal_dim`` axes"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    controls: np.ndarray = Field(..., description="(segments, dim) velocities, zero outside V_1")
    durations: np.ndarray = Field(..., description="Positive segment durations")
    horizontal_dim: int = Field(..., ge=1, description="dim V_1")

    @field_validator("controls", "durations", mode="before")
    @classmethod
    def _as_array(cls, value):
        return np.asarray(value, dtype=float)

    @model_validator(mode="after")
    def _check(self) -> "HorizontalPath":
        if self.controls.ndim != 2 or self.durations.ndim != 1:
            raise InputError("Path needs (segments, dim) controls and (segments,) durations")
        if self.controls.shape[0] != self.durations.shape[0]:
            raise InputError("Path controls and durations have mismatched lengths")
        if self.horizontal_dim > self.controls.shape[1]:
            raise InputError(f"dim V_1 = {self.horizontal_dim} exceeds the control dimension")
        if not (np.all(np.isfinite(self.durations)) and np.all(self.durations > 0)):
            raise InputError("Path durations must be positive")
        if not np.all(np.isfinite(self.controls)):
            raise InputError("Path controls must be finite")
        if np.any(self.controls[:, self.horizontal_dim :] != 0.0):
            raise InputError("Path controls leave the horizontal layer V_1")
        return self

    @property
    def length(self) -> float:
        return float(np.sum(np.linalg.norm(self.controls, axis=1) * self.durations))


class WordFactorization(BaseModel):
    letters: List[Tuple[float, int]] = Field(default_factory=list, description="(t_i, generator index)")
    residual: float = 0.0
    bound_constant: float = Field(0.0, description="max |t_i| / ||x||^(1/m)")
    rescaling: float = Field(1.0, description="Dilation factor used to enter the chart")


class CCDistanceResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    distance: float
    residual: float
    path: HorizontalPath
    starts: int


class BoxConstants(BaseModel):
    c_hat: float
    C_hat: float
    samples: int
    violations: int = 0


class DimensionEstimate(BaseModel):
    estimate: float
    stderr: float
    ci_low: float
    ci_high: float
    r_value: float
    scales: List[float]
    counts: List[int]
