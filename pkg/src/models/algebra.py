from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class Convergence(str, Enum):
    CONVERGED = "converged"
    DIVERGENT = "divergent"


class LieAlgebraSpec(BaseModel):
    """Raw input (g, D): structure constants in some basis plus a generating subspace"""

    name: Optional[str] = Field(None, description="Human-readable algebra name")
    dim: int = Field(..., ge=1, description="Dimension of the algebra")
    brackets: List[Tuple[int, int, int, float]] = Field(
        default_factory=list, description="Sparse entries (i, j, k, c): [e_i, e_j] has c along e_k"
    )
    generators: List[int] = Field(..., description="Basis indices spanning D")

    def with_brackets(self, extra: List[Tuple[int, int, int, float]]) -> "LieAlgebraSpec":
        """Copy of this spec with additional bracket entries appended"""
        return self.model_copy(update={"brackets": list(self.brackets) + list(extra)})


class ValidationReport(BaseModel):
    antisymmetry_residual: float = Field(..., description="Max |c(i,j,k) + c(j,i,k)|")
    jacobi_residual: float = Field(..., description="Max norm of the cyclic Jacobi sum")
    scale: float = Field(..., description="Largest structure-constant magnitude")
    tolerance: float
    passed: bool


class Filtration(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    layers: List[np.ndarray] = Field(..., description="Orthonormal bases of V^1 ⊆ V^2 ⊆ ... (rows)")
    step: int = Field(..., ge=1)

    @property
    def dims(self) -> List[int]:
        return [int(layer.shape[0]) for layer in self.layers]


class CarnotStructure(BaseModel):
    """Graded decomposition of (g, D) together with both brackets in the adapted basis"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: Optional[str] = None
    dim: int
    step: int
    layer_of: List[int] = Field(..., description="Grade of each adapted basis vector")
    words: List[Tuple[int, ...]] = Field(..., description="Generator word producing each basis vector")
    graded_basis: np.ndarray = Field(..., description="Columns: adapted basis in input coordinates")
    group_structure: np.ndarray = Field(..., description="G-bracket tensor C[i,j,k] in the adapted basis")
    nilpotent_structure: Optional[np.ndarray] = Field(
        None, description="Grade-matched bracket tensor of the nilpotentisation"
    )

    @property
    def layer_dims(self) -> List[int]:
        return [self.layer_of.count(i) for i in range(1, self.step + 1)]

    @property
    def homogeneous_dimension(self) -> int:
        return sum(i * d for i, d in enumerate(self.layer_dims, start=1))

    @property
    def weights(self) -> np.ndarray:
        return np.asarray(self.layer_of, dtype=float)

    @property
    def horizontal_dim(self) -> int:
        return self.layer_of.count(1)

    @property
    def is_carnot(self) -> bool:
        """True when the input bracket is already graded"""
        if self.nilpotent_structure is None:
            return False
        return bool(np.allclose(self.group_structure, self.nilpotent_structure, atol=1e-12))

    def layer_indices(self, grade: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.layer_of) == grade)

    def nilpotent_table(self, tol: float = 1e-12) -> List[Tuple[int, int, int, float]]:
        """Sparse (i<j) listing of the nilpotent bracket"""
        return _sparse(self.nilpotent_structure, tol)

    def group_table(self, tol: float = 1e-12) -> List[Tuple[int, int, int, float]]:
        return _sparse(self.group_structure, tol)

    def summary(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "dim": self.dim,
            "step": self.step,
            "layer_dims": self.layer_dims,
            "homogeneous_dimension": self.homogeneous_dimension,
        }


def _sparse(tensor: Optional[np.ndarray], tol: float) -> List[Tuple[int, int, int, float]]:
    if tensor is None:
        return []
    n = tensor.shape[0]
    return [
        (i, j, k, float(tensor[i, j, k]))
        for i in range(n)
        for j in range(i + 1, n)
        for k in range(n)
        if abs(tensor[i, j, k]) > tol
    ]


class BracketLimit(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    value: np.ndarray
    order: float = Field(..., description="Empirical convergence order of the raw sequence")
    differences: List[float] = Field(default_factory=list)
    status: Convergence = Convergence.CONVERGED


class MagicIdentityReport(BaseModel):
    residual: float = Field(..., description="Norm of [[X,U]_G,V]_N + [U,[X,V]_G]_N - [X,[U,V]_N]_G")
    dilation_residual: float = Field(..., description="Max over the eps grid of the companion condition")
    eps_grid: List[float] = Field(default_factory=list)
