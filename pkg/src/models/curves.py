from enum import Enum
from typing import Dict, List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.exceptions import InputError
from src.models.algebra import Convergence


class LinearClass(str, Enum):
    HL = "HL"
    END_ONLY = "EndOnly"
    NOT_LINEAR = "NotLinear"


class SampledCurve(BaseModel):
    """Ordered samples of a curve; linear interpolation in coordinates between samples"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    times: np.ndarray
    points: np.ndarray = Field(..., description="(samples, dim) coordinates")
    interpolation: str = "linear"
    diagnostics: Dict[str, float] = Field(default_factory=dict)

    @field_validator("times", "points", mode="before")
    @classmethod
    def _as_array(cls, value):
        return np.asarray(value, dtype=float)

    @model_validator(mode="after")
    def _check(self) -> "SampledCurve":
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        if self.times.ndim != 1 or self.times.shape[0] != self.points.shape[0]:
            raise InputError("Curve times and points have mismatched lengths")
        if self.times.shape[0] < 2:
            raise InputError(f"Curve needs at least 2 samples, got {self.times.shape[0]}")
        if np.any(np.diff(self.times) <= 0):
            raise InputError("Curve times must be strictly increasing")
        if not np.all(np.isfinite(self.points)):
            raise InputError("Curve points must be finite")
        return self

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    def __len__(self) -> int:
        return int(self.times.shape[0])


class LinearCandidate(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    matrix: np.ndarray
    morphism_residual: float
    dilation_residual: float


class PansuEstimate(BaseModel):
    candidate: LinearCandidate
    eps_ladder: List[float]
    discrepancies: List[float] = Field(..., description="Sup over probes at each eps")
    order: float = Field(..., description="Fitted slope of log discrepancy against log eps")
    status: Convergence
