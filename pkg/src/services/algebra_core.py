"""Lie algebra ingestion, filtration, adapted basis and nilpotentisation"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config.settings import settings
from src.exceptions import (
    GradingInconsistencyError,
    InputError,
    NotBracketGeneratingError,
)
from src.models import (
    BracketLimit,
    CarnotStructure,
    Convergence,
    Filtration,
    LieAlgebraSpec,
    MagicIdentityReport,
    ValidationReport,
)
from src.services.bch import bch, bracket

logger = logging.getLogger(__name__)


def structure_tensor(spec: LieAlgebraSpec) -> Tuple[np.ndarray, float]:
    """
    Build the dense antisymmetric structure tensor from sparse entries.

    Entries are expected with i < j; an entry with i > j is read as the
    antisymmetric partner. When both orders are given they must agree.

    Returns:
        (C, antisymmetry residual)

    Raises:
        InputError: If an index is out of range
    """
    n = spec.dim
    raw = np.zeros((n, n, n))
    given = np.zeros((n, n), dtype=bool)
    for entry in spec.brackets:
        if len(entry) != 4:
            raise InputError(f"Malformed bracket entry {entry!r}")
        i, j, k, c = entry
        for index in (i, j, k):
            if not 0 <= int(index) < n:
                raise InputError(f"Bracket index {index} out of range for dim {n}")
        raw[int(i), int(j), int(k)] += float(c)
        given[int(i), int(j)] = True

    for g in spec.generators:
        if not 0 <= g < n:
            raise InputError(f"Generator index {g} out of range for dim {n}")
    if len(set(spec.generators)) != len(spec.generators):
        raise InputError("Generator indices must be distinct")
    if not spec.generators:
        raise InputError("At least one generator is required")

    both = given & given.T
    residual = 0.0
    if np.any(both):
        residual = float(np.max(np.abs(raw + raw.transpose(1, 0, 2))[both]))
    diag = np.abs(raw[np.arange(n), np.arange(n), :])
    residual = max(residual, float(diag.max(initial=0.0)))

    single = given & ~given.T
    C = np.where(both[:, :, None], 0.5 * (raw - raw.transpose(1, 0, 2)), 0.0)
    C += np.where(single[:, :, None], raw, 0.0)
    C -= np.where(single.T[:, :, None], raw.transpose(1, 0, 2), 0.0)
    C[np.arange(n), np.arange(n), :] = 0.0
    return C, residual


def jacobi_residual(C: np.ndarray) -> float:
    """max_{i<j<k} ||[[e_i,e_j],e_k] + [[e_j,e_k],e_i] + [[e_k,e_i],e_j]||"""
    if C.shape[0] < 3:
        return 0.0
    cyclic = (
        np.einsum("ijl,lkm->ijkm", C, C)
        + np.einsum("jkl,lim->ijkm", C, C)
        + np.einsum("kil,ljm->ijkm", C, C)
    )
    return float(np.max(np.linalg.norm(cyclic, axis=3)))


def validate_algebra(spec: LieAlgebraSpec, tolerance: Optional[float] = None) -> ValidationReport:
    tolerance = settings.validation_tolerance if tolerance is None else tolerance
    C, antisymmetry = structure_tensor(spec)
    scale = float(np.max(np.abs(C), initial=0.0))
    jacobi = jacobi_residual(C)
    passed = antisymmetry <= tolerance * max(1.0, scale) and jacobi <= tolerance * max(1.0, scale**2)
    report = ValidationReport(
        antisymmetry_residual=antisymmetry,
        jacobi_residual=jacobi,
        scale=scale,
        tolerance=tolerance,
        passed=passed,
    )
    logger.info(
        f"Validated {spec.name or 'algebra'}: antisymmetry={antisymmetry:.2e}, "
        f"jacobi={jacobi:.2e}, passed={passed}"
    )
    return report


def _row_basis(vectors: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal rows spanning the given rows (SVD rank with relative threshold)"""
    if vectors.size == 0:
        return vectors.reshape(0, vectors.shape[-1])
    _, s, vt = np.linalg.svd(vectors, full_matrices=False)
    if s[0] == 0:
        return vectors[:0]
    rank = int(np.sum(s > tol * s[0]))
    return vt[:rank]


def _rank(vectors: List[np.ndarray], tol: float) -> int:
    if not vectors:
        return 0
    s = np.linalg.svd(np.array(vectors), compute_uv=False)
    return int(np.sum(s > tol * max(s[0], 1e-300))) if s[0] > 0 else 0


def build_filtration(spec: LieAlgebraSpec) -> Filtration:
    tol = settings.rank_tolerance
    C, _ = structure_tensor(spec)
    n = spec.dim
    identity = np.eye(n)
    generators = identity[spec.generators]
    layers = [_row_basis(generators, tol)]

    while True:
        current = layers[-1]
        brackets = bracket(C, generators[:, None, :], current[None, :, :]).reshape(-1, n)
        nxt = _row_basis(np.vstack([current, brackets]), tol)
        if nxt.shape[0] == current.shape[0]:
            break
        layers.append(nxt)
        if len(layers) > n + 1:
            break

    if layers[-1].shape[0] < n:
        raise NotBracketGeneratingError(layers[-1].shape[0], n)
    filtration = Filtration(layers=layers, step=len(layers))
    logger.info(f"Filtration of {spec.name or 'algebra'}: dims {filtration.dims}")
    return filtration


def build_graded_basis(spec: LieAlgebraSpec, filt: Filtration) -> CarnotStructure:
    """Adapted basis of multibrackets of generators, chosen in lexicographic word order"""
    tol = settings.rank_tolerance
    C, _ = structure_tensor(spec)
    n = spec.dim
    identity = np.eye(n)

    vectors: List[np.ndarray] = [identity[g] for g in spec.generators]
    words: List[Tuple[int, ...]] = [(g,) for g in range(len(spec.generators))]
    layer_of: List[int] = [1] * len(vectors)
    previous = list(zip(words, vectors))

    for grade, target in enumerate(filt.dims[1:], start=2):
        if grade > n + 1:
            raise InputError(f"Adapted basis search exceeded word length {n + 1}")
        candidates = sorted(
            ((g,) + word, bracket(C, identity[spec.generators[g]], vec))
            for g in range(len(spec.generators))
            for word, vec in previous
        )
        chosen = []
        for word, vec in candidates:
            if len(vectors) == target:
                break
            if _rank(vectors + [vec], tol) > len(vectors):
                vectors.append(vec)
                words.append(word)
                layer_of.append(grade)
                chosen.append((word, vec))
        if len(vectors) != target:
            raise InputError(
                f"Brackets of generators span only {len(vectors)} of {target} dimensions at grade {grade}"
            )
        previous = chosen

    P = np.column_stack(vectors)
    P_inv = np.linalg.inv(P)
    adapted = np.einsum("ia,jb,ijk,lk->abl", P, P, C, P_inv)
    return CarnotStructure(
        name=spec.name,
        dim=n,
        step=filt.step,
        layer_of=layer_of,
        words=words,
        graded_basis=P,
        group_structure=adapted,
    )


def nilpotentize(spec: LieAlgebraSpec, carnot_basis: CarnotStructure) -> CarnotStructure:
    """Keep C_ijk iff l(X_i) + l(X_j) = l(X_k)"""
    C = carnot_basis.group_structure
    grades = np.asarray(carnot_basis.layer_of)
    total = grades[:, None, None] + grades[None, :, None]
    target = grades[None, None, :]
    scale = max(1.0, float(np.max(np.abs(C), initial=0.0)))
    raising = np.abs(np.where(total < target, C, 0.0))
    if raising.max(initial=0.0) > settings.rank_tolerance * scale:
        i, j, k = np.unravel_index(np.argmax(raising), raising.shape)
        raise GradingInconsistencyError(
            f"[X{i},X{j}] has component {C[i, j, k]:.3e} on X{k} of higher grade"
        )
    N = np.where(total == target, C, 0.0)
    result = carnot_basis.model_copy(update={"nilpotent_structure": N})
    logger.info(
        f"Nilpotentised {spec.name or 'algebra'}: layers {result.layer_dims}, "
        f"Q={result.homogeneous_dimension}"
    )
    return result


def carnot_structure(spec: LieAlgebraSpec) -> CarnotStructure:
    """validate -> filtration -> adapted basis -> nilpotentisation"""
    report = validate_algebra(spec)
    if not report.passed:
        raise InputError(
            f"Algebra {spec.name or ''} fails validation "
            f"(antisymmetry {report.antisymmetry_residual:.2e}, jacobi {report.jacobi_residual:.2e})"
        )
    filt = build_filtration(spec)
    return nilpotentize(spec, build_graded_basis(spec, filt))


def to_adapted(carnot: CarnotStructure, v: np.ndarray) -> np.ndarray:
    """Coordinates in the algebra file's basis -> adapted coordinates; leading axes broadcast"""
    return np.linalg.solve(carnot.graded_basis, np.asarray(v, dtype=float).T).T


def from_adapted(carnot: CarnotStructure, x: np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=float) @ carnot.graded_basis.T


def matrix_to_adapted(carnot: CarnotStructure, M: np.ndarray) -> np.ndarray:
    """Linear map written in the input basis -> the same map in the adapted basis"""
    P = carnot.graded_basis
    return np.linalg.solve(P, np.asarray(M, dtype=float) @ P)


def matrix_from_adapted(carnot: CarnotStructure, M: np.ndarray) -> np.ndarray:
    P = carnot.graded_basis
    return P @ np.asarray(M, dtype=float) @ np.linalg.inv(P)


def dilate(carnot: CarnotStructure, eps: float, x: np.ndarray) -> np.ndarray:
    """delta_eps in adapted coordinates: layer i scaled by eps^i"""
    return np.power(eps, carnot.weights) * np.asarray(x, dtype=float)


def bracket_n(carnot: CarnotStructure, x, y) -> np.ndarray:
    return bracket(carnot.nilpotent_structure, np.asarray(x, float), np.asarray(y, float))


def bracket_g(carnot: CarnotStructure, x, y) -> np.ndarray:
    return bracket(carnot.group_structure, np.asarray(x, float), np.asarray(y, float))


def extrapolate_to_zero(eps: Sequence[float], values: Sequence[np.ndarray]) -> np.ndarray:
    """Neville evaluation at 0 of the polynomial through (eps_k, values_k)"""
    P = [np.asarray(v, dtype=float) for v in values]
    n = len(P)
    for m in range(1, n):
        for i in range(n - m):
            P[i] = (eps[i + m] * P[i] - eps[i] * P[i + 1]) / (eps[i + m] - eps[i])
    return P[0]


def convergence_diagnostics(eps: Sequence[float], values: Sequence[np.ndarray]):
    """Successive differences, empirical order and status of a sequence f(eps_k)"""
    diffs = [float(np.linalg.norm(values[k] - values[k + 1])) for k in range(len(values) - 1)]
    floor = 1e-13 * max(1.0, max(float(np.linalg.norm(v)) for v in values))
    orders = [
        math.log(diffs[k] / diffs[k + 1]) / math.log(eps[k] / eps[k + 1])
        for k in range(len(diffs) - 1)
        if diffs[k] > floor and diffs[k + 1] > floor
    ]
    if all(d <= floor for d in diffs):
        return diffs, math.inf, Convergence.CONVERGED
    order = orders[-1] if orders else math.inf
    decreasing = all(
        diffs[k + 1] <= diffs[k] * (1 + 1e-9) or diffs[k + 1] <= floor for k in range(len(diffs) - 1)
    )
    return diffs, order, Convergence.CONVERGED if decreasing else Convergence.DIVERGENT


def nilpotent_bracket_limit(
    spec: LieAlgebraSpec,
    carnot: CarnotStructure,
    x,
    y,
    eps_ladder: Optional[Sequence[float]] = None,
) -> BracketLimit:
    """Extrapolated lim delta_eps^-1 [delta_eps x, delta_eps y]_G (adapted coordinates)"""
    eps_ladder = list(eps_ladder or settings.eps_ladder)
    if len(eps_ladder) < 3:
        raise InputError("eps ladder needs at least 3 entries")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    values = [
        dilate(carnot, 1.0 / e, bracket_g(carnot, dilate(carnot, e, x), dilate(carnot, e, y)))
        for e in eps_ladder
    ]
    diffs, order, status = convergence_diagnostics(eps_ladder, values)
    if status == Convergence.DIVERGENT:
        logger.warning(f"Rescaled bracket differences not decreasing: {diffs}")
    return BracketLimit(
        value=extrapolate_to_zero(eps_ladder, values), order=order, differences=diffs, status=status
    )


def magic_identity_residual(
    spec: LieAlgebraSpec,
    carnot: CarnotStructure,
    X,
    U,
    V,
    eps_grid: Optional[Sequence[float]] = None,
) -> MagicIdentityReport:
    X, U, V = (np.asarray(v, dtype=float) for v in (X, U, V))
    lhs = bracket_n(carnot, bracket_g(carnot, X, U), V) + bracket_n(carnot, U, bracket_g(carnot, X, V))
    rhs = bracket_g(carnot, X, bracket_n(carnot, U, V))
    residual = float(np.linalg.norm(lhs - rhs))

    eps_grid = list(eps_grid or [0.5, 0.25, 0.1, 0.05])
    target = bracket_n(carnot, X, U) - bracket_g(carnot, X, U)
    dilation = 0.0
    for e in eps_grid:
        dU = dilate(carnot, e, U)
        rescaled = dilate(carnot, 1.0 / e, bracket_n(carnot, X, dU) - bracket_g(carnot, X, dU))
        dilation = max(dilation, float(np.linalg.norm(rescaled - target)))
    return MagicIdentityReport(residual=residual, dilation_residual=dilation, eps_grid=eps_grid)


def ad_matrix(C: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Matrix of ad_X: column j holds [X, e_j]"""
    return np.einsum("i,ijk->kj", np.asarray(X, dtype=float), C)


def ad_difference(carnot: CarnotStructure, X) -> np.ndarray:
    """a_X = ad^G_X - ad^N_X"""
    return ad_matrix(carnot.group_structure, X) - ad_matrix(carnot.nilpotent_structure, X)


def left_translation_derivative(
    carnot: CarnotStructure,
    X,
    use_group_bracket: bool = False,
    order: Optional[int] = None,
) -> np.ndarray:
    """
    Series sum_{i=0}^{terms-1} ad_X^i / (i+1)!.

    For the nilpotent bracket the series stops after ``step`` terms. The
    group bracket needs an explicit truncation ``order`` unless it is graded.

    Raises:
        InputError: If the group bracket is not nilpotent and no order is given
    """
    if use_group_bracket:
        C = carnot.group_structure
        if order is None:
            if not carnot.is_carnot:
                raise InputError("Truncation order required for a non-nilpotent bracket")
            order = carnot.step
    else:
        C = carnot.nilpotent_structure
        order = carnot.step if order is None else order
    ad = ad_matrix(C, X)
    term = np.eye(carnot.dim)
    total = term.copy()
    for i in range(1, order):
        term = term @ ad
        total += term / math.factorial(i + 1)
    return total


def chart_transition_matrix(carnot: CarnotStructure, X, Y, order: Optional[int] = None) -> np.ndarray:
    """A^{X,Y} = DL^N_{XY}(0)^-1 DL^G_{XY}(0) DL^G_Y(0)^-1 DL^N_Y(0), with XY the G-product"""
    order = order or settings.bch_max_order
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    XY = bch(carnot.group_structure, X, Y, order)
    dn_xy = left_translation_derivative(carnot, XY)
    dg_xy = left_translation_derivative(carnot, XY, use_group_bracket=True, order=order)
    dg_y = left_translation_derivative(carnot, Y, use_group_bracket=True, order=order)
    dn_y = left_translation_derivative(carnot, Y)
    return np.linalg.solve(dn_xy, dg_xy) @ np.linalg.solve(dg_y, dn_y)
