import math
from enum import Enum
from typing import Callable, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.exceptions import InputError


class HPoint(BaseModel):
    """Point (x, xbar) of the Heisenberg group H(n) = R^{2n} x R"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    x: np.ndarray
    xbar: float = 0.0

    @field_validator("x", mode="before")
    @classmethod
    def _as_array(cls, value):
        arr = np.asarray(value, dtype=float).ravel()
        if arr.size % 2:
            raise InputError(f"Horizontal part must have even length, got {arr.size}")
        return arr

    @property
    def n(self) -> int:
        return self.x.size // 2

    def as_array(self) -> np.ndarray:
        return np.append(self.x, self.xbar)

    @classmethod
    def from_array(cls, arr) -> "HPoint":
        arr = np.asarray(arr, dtype=float)
        return cls(x=arr[:-1], xbar=float(arr[-1]))


class HamiltonianKind(str, Enum):
    ZERO = "zero"
    CONSTANT = "constant"
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    QUADRATIC_BUMP = "quadratic_bump"
    POLYNOMIAL_BUMP = "polynomial_bump"
    CUSTOM = "custom"


class HamiltonianSpec(BaseModel):
    """Time-dependent Hamiltonian H(t, x) on R^{2n}, evaluated on (k, 2n) point arrays.

    Bumps use the profile (1 - u)^3 with u = |x - center|^2 / R^2, so they are C^2 and
    vanish outside the ball of radius R. ``modulation`` multiplies H by 1 + m sin(2 pi t).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    kind: HamiltonianKind = HamiltonianKind.QUADRATIC_BUMP
    n: int = Field(1, ge=1)
    amplitude: float = 1.0
    support_radius: float = Field(1.0, gt=0)
    center: Optional[List[float]] = None
    direction: Optional[List[float]] = None
    modulation: float = 0.0
    value_fn: Optional[Callable] = Field(None, exclude=True)
    gradient_fn: Optional[Callable] = Field(None, exclude=True)

    @property
    def has_compact_support(self) -> bool:
        return self.kind not in (HamiltonianKind.LINEAR, HamiltonianKind.QUADRATIC)

    @property
    def center_array(self) -> np.ndarray:
        if self.center is None:
            return np.zeros(2 * self.n)
        return np.asarray(self.center, dtype=float)

    @property
    def support_extent(self) -> float:
        """Radius of the origin-centred ball containing the support"""
        if not self.has_compact_support:
            return math.inf
        return float(np.linalg.norm(self.center_array)) + self.support_radius

    def scaled(self, factor: float) -> "HamiltonianSpec":
        if self.kind == HamiltonianKind.CUSTOM:
            value_fn, gradient_fn = self.value_fn, self.gradient_fn
            return self.model_copy(
                update={
                    "value_fn": lambda t, X: factor * value_fn(t, X),
                    "gradient_fn": lambda t, X: factor * gradient_fn(t, X),
                }
            )
        return self.model_copy(update={"amplitude": self.amplitude * factor})

    def _time_factor(self, t: float) -> float:
        return 1.0 + self.modulation * math.sin(2.0 * math.pi * t)

    def _offset(self, X: np.ndarray):
        Y = np.atleast_2d(X) - self.center_array
        u = np.sum(Y * Y, axis=1) / self.support_radius**2
        inside = u < 1.0
        return Y, u, inside

    def value(self, t: float, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == HamiltonianKind.CUSTOM:
            return np.asarray(self.value_fn(t, X), dtype=float)
        a = self.amplitude * self._time_factor(t)
        if self.kind == HamiltonianKind.ZERO:
            return np.zeros(X.shape[0])
        if self.kind == HamiltonianKind.LINEAR:
            return a * (X @ np.asarray(self.direction, dtype=float))
        if self.kind == HamiltonianKind.QUADRATIC:
            Y = X - self.center_array
            return 0.5 * a * np.sum(Y * Y, axis=1)
        Y, u, inside = self._offset(X)
        w = np.where(inside, (1.0 - u) ** 3, 0.0)
        if self.kind == HamiltonianKind.CONSTANT:
            return np.where(inside, a, 0.0)
        if self.kind == HamiltonianKind.QUADRATIC_BUMP:
            return 0.5 * a * np.sum(Y * Y, axis=1) * w
        return a * w

    def gradient(self, t: float, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == HamiltonianKind.CUSTOM:
            return np.asarray(self.gradient_fn(t, X), dtype=float)
        a = self.amplitude * self._time_factor(t)
        if self.kind in (HamiltonianKind.ZERO, HamiltonianKind.CONSTANT):
            return np.zeros_like(X)
        if self.kind == HamiltonianKind.LINEAR:
            return np.broadcast_to(a * np.asarray(self.direction, dtype=float), X.shape).copy()
        if self.kind == HamiltonianKind.QUADRATIC:
            return a * (X - self.center_array)
        Y, u, inside = self._offset(X)
        if self.kind == HamiltonianKind.QUADRATIC_BUMP:
            profile = (1.0 - u) ** 2 * (1.0 - 4.0 * u)
        else:
            profile = -6.0 * (1.0 - u) ** 2 / self.support_radius**2
        return a * Y * np.where(inside, profile, 0.0)[:, None]

    def check_support(self, rng: np.random.Generator, samples: int = 256) -> float:
        """Max |H| sampled just outside the declared support (0 for a valid spec)"""
        if not self.has_compact_support:
            raise InputError(f"Hamiltonian kind '{self.kind.value}' has no compact support")
        directions = rng.normal(size=(samples, 2 * self.n))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = self.support_radius * (1.0 + rng.uniform(1e-9, 1.0, size=samples))
        X = self.center_array + directions * radii[:, None]
        times = rng.uniform(0.0, 1.0, size=4)
        return float(max(np.max(np.abs(self.value(t, X))) for t in times))


class HoferLength(BaseModel):
    value: float
    grid_points: int
    grid_spacing: float = Field(..., description="Spatial sampling density of the sup proxy")
    times: int


class Invariants(BaseModel):
    width: float
    width_stderr: float
    heights: List[float] = Field(..., description="h_i for the requested i, in order")
    height_stderrs: List[float]
    h_inf: float = Field(..., description="Largest sampled fiber length")
    volume: float
    projected_volume: float


class HoferCheck(BaseModel):
    lhs: float = Field(..., description="C * V(phi, A)")
    rhs: float = Field(..., description="vol(A) * Hofer length proxy")
    ball_ratio: float
    ball_ratio_stderr: float
    oscillation: float = Field(..., description="V(phi, A)")
    hofer_length: float
    region_volume: float
    passed: bool
