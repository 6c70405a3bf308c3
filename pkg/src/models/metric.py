from typing import Callable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.exceptions import InputError


class FiniteMetricSpace(BaseModel):
    """Finite metric space given by its distance matrix.

    ``quasi`` relaxes the triangle inequality, for quasi-distances such as |p^-1 q|_inf.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    distances: np.ndarray
    labels: Optional[List[str]] = None
    quasi: bool = False
    tolerance: float = 1e-12

    @field_validator("distances", mode="before")
    @classmethod
    def _as_array(cls, value):
        return np.asarray(value, dtype=float)

    @model_validator(mode="after")
    def _check_axioms(self) -> "FiniteMetricSpace":
        D = self.distances
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise InputError("Distance matrix must be square")
        if np.any(D < 0) or not np.all(np.isfinite(D)):
            raise InputError("Distances must be finite and nonnegative")
        if np.max(np.abs(D - D.T), initial=0.0) > self.tolerance:
            raise InputError("Distance matrix is not symmetric")
        if np.max(np.abs(np.diag(D)), initial=0.0) > self.tolerance:
            raise InputError("Distance matrix has a nonzero diagonal")
        off = D + np.eye(D.shape[0])
        if np.any(off <= 0):
            raise InputError("Distinct points at distance zero")
        if not self.quasi:
            for k in range(D.shape[0]):
                excess = D - (D[:, k][:, None] + D[k, :][None, :])
                if np.max(excess) > self.tolerance:
                    raise InputError(f"Triangle inequality violated by {np.max(excess):.3e}")
        return self

    @property
    def size(self) -> int:
        return int(self.distances.shape[0])

    @classmethod
    def from_points(cls, points: np.ndarray, metric: Optional[Callable] = None, **kwargs):
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if metric is None:
            diff = points[:, None, :] - points[None, :, :]
            D = np.linalg.norm(diff, axis=2)
        else:
            D = np.stack([metric(points, p) for p in points])
            D = 0.5 * (D + D.T)
        np.fill_diagonal(D, 0.0)
        return cls(distances=D, **kwargs)


class MetricCurve(BaseModel):
    """Sampled curve in a metric space: coordinates plus a metric evaluator"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    times: np.ndarray
    points: np.ndarray
    metric: Optional[Callable] = Field(
        None, description="metric(P, q) -> distances from each row of P to q; Euclidean if None"
    )

    @field_validator("times", "points", mode="before")
    @classmethod
    def _as_array(cls, value):
        return np.asarray(value, dtype=float)

    @model_validator(mode="after")
    def _check(self) -> "MetricCurve":
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        if self.times.shape[0] != self.points.shape[0]:
            raise InputError("Curve times and points have mismatched lengths")
        if self.times.shape[0] < 2:
            raise InputError("A curve needs at least two samples")
        if np.any(np.diff(self.times) <= 0):
            raise InputError("Curve times must be strictly increasing")
        return self

    def step_distances(self, stride: int = 1) -> np.ndarray:
        """d(f(t_i), f(t_{i+stride})) for all admissible i"""
        P, Q = self.points[:-stride], self.points[stride:]
        if self.metric is None:
            return np.linalg.norm(Q - P, axis=1)
        return np.array([float(self.metric(P[i : i + 1], Q[i])[0]) for i in range(P.shape[0])])


class MeasureEstimate(BaseModel):
    value: float = Field(..., description="Extrapolated to delta -> 0")
    k: float
    deltas: List[float]
    contents: List[float] = Field(..., description="Covering sums at each delta")
    monotone: bool = Field(..., description="Contents nondecreasing as delta shrinks")


class GHBound(BaseModel):
    distortion: float
    net_radius: float
    eps: float
    bound: float
    claimed_eps: Optional[float] = None
    claim_holds: bool = True


class MidpointReport(BaseModel):
    eps: float
    passed: bool
    failures: List[Tuple[int, int]] = Field(default_factory=list)
    worst_excess: float = 0.0


class ConeExperiment(BaseModel):
    lambdas: List[float]
    bounds: List[float]
    monotone: bool
