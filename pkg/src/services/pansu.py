"""Pansu finite differences, H-linear maps, developments and lifts of curves"""

import logging
import math
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from config.settings import settings
from src.exceptions import InputError
from src.models import (
    BracketLimit,
    CarnotStructure,
    Convergence,
    LinearCandidate,
    LinearClass,
    NormKind,
    PansuEstimate,
    SampledCurve,
)
from src.services.algebra_core import convergence_diagnostics, dilate, extrapolate_to_zero
from src.services.bch import bch, bracket
from src.services.group_ops import bch_multiply, group_inverse, homogeneous_norm, product_structure

logger = logging.getLogger(__name__)

# f maps a (k, dim) array of points to a (k, dim) array of images
GroupMap = Callable[[np.ndarray], np.ndarray]


def _batch(y) -> np.ndarray:
    return np.atleast_2d(np.asarray(y, dtype=float))


def finite_difference(carnot: CarnotStructure, f: GroupMap, x, eps: float, y) -> np.ndarray:
    """F_eps(y) = delta_eps^-1 (f(x)^-1 f(x delta_eps y)), batched over the rows of y"""
    Y = _batch(y)
    x = np.asarray(x, dtype=float)
    fx = f(x[None, :])[0]
    moved = f(bch_multiply(carnot, x, dilate(carnot, eps, Y)))
    return dilate(carnot, 1.0 / eps, bch_multiply(carnot, group_inverse(fx), moved))


def default_probes(carnot: CarnotStructure, count: Optional[int] = None, seed: int = 0) -> np.ndarray:
    """Basis directions followed by ``count`` random points of homogeneous norm 1"""
    count = settings.probe_count if count is None else count
    rng = np.random.default_rng(seed)
    raw = rng.normal(size=(count, carnot.dim))
    norms = homogeneous_norm(carnot, raw, NormKind.INF)
    unit = np.stack([dilate(carnot, 1.0 / r, p) for p, r in zip(raw, norms)]) if count else raw
    return np.vstack([np.eye(carnot.dim), unit])


def _off_grade_mask(carnot: CarnotStructure) -> np.ndarray:
    grades = np.asarray(carnot.layer_of)
    return grades[:, None] != grades[None, :]


def morphism_residual(carnot: CarnotStructure, M: np.ndarray) -> float:
    """max_{a,b} ||M[e_a,e_b]_N - [M e_a, M e_b]_N||"""
    N = carnot.nilpotent_structure
    image_of_bracket = np.einsum("kl,abl->abk", M, N)
    bracket_of_images = bracket(N, M.T[:, None, :], M.T[None, :, :])
    return float(np.max(np.linalg.norm(image_of_bracket - bracket_of_images, axis=-1), initial=0.0))


def linear_candidate(carnot: CarnotStructure, matrix) -> LinearCandidate:
    M = np.asarray(matrix, dtype=float)
    return LinearCandidate(
        matrix=M,
        morphism_residual=morphism_residual(carnot, M),
        dilation_residual=float(np.linalg.norm(np.where(_off_grade_mask(carnot), M, 0.0))),
    )


def pansu_derivative_estimate(
    carnot: CarnotStructure,
    f: GroupMap,
    x,
    eps_ladder: Optional[Sequence[float]] = None,
    probes: Optional[np.ndarray] = None,
) -> PansuEstimate:
    """
    Fit Df(x) from the finite differences at the smallest eps and track
    sup_probes |(Df(x) p)^-1 F_eps(p)|_inf along the ladder.

    A discrepancy that does not shrink with eps is reported as DIVERGENT.
    """
    eps_ladder = sorted((float(e) for e in (eps_ladder or settings.eps_ladder)), reverse=True)
    if len(eps_ladder) < 3:
        raise InputError("eps ladder needs at least 3 entries")
    probes = default_probes(carnot) if probes is None else _batch(probes)
    if np.linalg.matrix_rank(probes) < carnot.dim:
        raise InputError("Probe set does not span the algebra")

    values = [finite_difference(carnot, f, x, e, probes) for e in eps_ladder]
    fitted, *_ = np.linalg.lstsq(probes, values[-1], rcond=None)
    full = fitted.T
    off_grade = _off_grade_mask(carnot)
    M = np.where(off_grade, 0.0, full)
    candidate = LinearCandidate(
        matrix=M,
        morphism_residual=morphism_residual(carnot, M),
        dilation_residual=float(np.linalg.norm(np.where(off_grade, full, 0.0))),
    )

    predicted = probes @ M.T
    discrepancies = []
    for e, v in zip(eps_ladder, values):
        gap = bch_multiply(carnot, -predicted, v)
        # rounding in layer i is amplified by eps^-i before |.|_inf takes its i-th root
        noise = 1e-13 * max(1.0, float(np.max(np.abs(v)))) * np.power(e, -carnot.weights)
        gap = np.where(np.abs(gap) > noise, gap, 0.0)
        discrepancies.append(float(np.max(homogeneous_norm(carnot, gap, NormKind.INF))))
    floor = 1e-6
    positive = [(e, d) for e, d in zip(eps_ladder, discrepancies) if d > floor]
    if len(positive) < 2:
        order, status = math.inf, Convergence.CONVERGED
    else:
        fit = stats.linregress(np.log([e for e, _ in positive]), np.log([d for _, d in positive]))
        order = float(fit.slope)
        status = Convergence.CONVERGED if order > 0.1 else Convergence.DIVERGENT
    if status == Convergence.DIVERGENT:
        logger.warning(f"Finite differences do not settle: discrepancies {discrepancies}")
    logger.info(f"Pansu estimate: status={status.value}, order={order:.3f}")
    return PansuEstimate(
        candidate=candidate,
        eps_ladder=eps_ladder,
        discrepancies=discrepancies,
        order=order,
        status=status,
    )


def classify_linear(
    candidate: LinearCandidate, carnot: CarnotStructure, tolerance: Optional[float] = None
) -> LinearClass:
    """HL: invertible graded morphism; EndOnly: morphism failing one of the other two"""
    tolerance = settings.linear_tolerance if tolerance is None else tolerance
    M = np.asarray(candidate.matrix, dtype=float)
    scale = max(1.0, float(np.linalg.norm(M, 2)))
    morphism = max(candidate.morphism_residual, morphism_residual(carnot, M)) <= tolerance * scale**2
    if not morphism:
        return LinearClass.NOT_LINEAR
    off_grade = float(np.max(np.abs(np.where(_off_grade_mask(carnot), M, 0.0)), initial=0.0))
    equivariant = max(off_grade, candidate.dilation_residual) <= tolerance * scale
    invertible = float(np.linalg.svd(M, compute_uv=False).min()) > tolerance * scale
    if equivariant and invertible:
        return LinearClass.HL
    return LinearClass.END_ONLY


def hl_matrix_sussmann(a11: float, a21: float, a22: float) -> np.ndarray:
    """Element of HL for the nilpotentisation of the Sussmann algebra"""
    return np.array(
        [
            [a11, 0.0, 0.0, 0.0],
            [a21, a22, 0.0, 0.0],
            [0.0, 0.0, a11 * a22, 0.0],
            [0.0, 0.0, 0.0, a11 * a11 * a22],
        ]
    )


# --- curves ---------------------------------------------------------------


def develop_curve(carnot: CarnotStructure, curve: SampledCurve) -> SampledCurve:
    """sigma(t_j) = sum_{k<j} log(c(t_k)^-1 c(t_{k+1}))"""
    points = curve.points
    increments = bch_multiply(carnot, group_inverse(points[:-1]), points[1:])
    sigma = np.vstack([np.zeros(carnot.dim), np.cumsum(increments, axis=0)])
    mesh = float(np.max(np.diff(curve.times)))
    return SampledCurve(times=curve.times, points=sigma, diagnostics={"mesh": mesh})


def lift_curve(carnot: CarnotStructure, sigma: SampledCurve) -> SampledCurve:
    """Ordered product of the increments sigma(t_{k+1}) - sigma(t_k), starting from sigma(t_0)"""
    C, order = product_structure(carnot)
    increments = np.diff(sigma.points, axis=0)
    points = np.empty_like(sigma.points)
    points[0] = sigma.points[0]
    for k, step in enumerate(increments):
        points[k + 1] = bch(C, points[k], step, order)

    velocity = bch(C, -points[:-1], points[1:], order) / np.diff(sigma.times)[:, None]
    vertical = velocity[:, carnot.weights > 1]
    diagnostics = {
        "mesh": float(np.max(np.diff(sigma.times))),
        "vertical_velocity": float(np.max(np.abs(vertical), initial=0.0)),
    }
    return SampledCurve(times=sigma.times, points=points, diagnostics=diagnostics)


def nested_bracket(C: np.ndarray, x: np.ndarray, y: np.ndarray, i: int) -> np.ndarray:
    """[x, y]_i = [x, [x, ... [x, y]]] with i brackets"""
    result = y
    for _ in range(i):
        result = bracket(C, x, result)
    return result


def i_area(carnot: CarnotStructure, sigma: SampledCurve, i: int = 1) -> SampledCurve:
    """Partial sums A^i(t_j) = sum_{k<j} [sigma(t_k), sigma(t_{k+1})]_i"""
    if i < 1:
        raise InputError("i-area needs i >= 1")
    P = sigma.points
    terms = nested_bracket(carnot.nilpotent_structure, P[:-1], P[1:], i)
    values = np.vstack([np.zeros(carnot.dim), np.cumsum(terms, axis=0)])
    return SampledCurve(times=sigma.times, points=values)


def beta_limit(
    carnot: CarnotStructure,
    x,
    y,
    eps_ladder: Optional[Sequence[float]] = None,
    order: Optional[int] = None,
) -> BracketLimit:
    """lim_{eps->0} delta_eps^-1 ((delta_eps x) . (delta_eps y)) for the G-product, Neville-extrapolated"""
    eps_ladder = sorted((float(e) for e in (eps_ladder or settings.eps_ladder)), reverse=True)
    if len(eps_ladder) < 3:
        raise InputError("eps ladder needs at least 3 entries")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    values = [
        dilate(
            carnot,
            1.0 / e,
            bch_multiply(carnot, dilate(carnot, e, x), dilate(carnot, e, y), use_group_bracket=True, order=order),
        )
        for e in eps_ladder
    ]
    diffs, rate, status = convergence_diagnostics(eps_ladder, values)
    if status == Convergence.DIVERGENT:
        logger.warning(f"Rescaled products do not settle: differences {diffs}")
    return BracketLimit(
        value=extrapolate_to_zero(eps_ladder, values), order=rate, differences=diffs, status=status
    )


# --- named maps for the command line ----------------------------------------


def named_map(carnot: CarnotStructure, kind: str, parameters: Optional[Sequence[float]] = None) -> GroupMap:
    """
    identity | left (translation by a) | right (translation by a) |
    dilation (factor) | linear (row-major dim x dim matrix)
    """
    parameters = np.asarray(parameters if parameters is not None else [], dtype=float)
    if kind == "identity":
        return lambda X: np.array(X, dtype=float)
    if kind in ("left", "right"):
        if parameters.size != carnot.dim:
            raise InputError(f"Translation needs {carnot.dim} parameters")
        if kind == "left":
            return lambda X: bch_multiply(carnot, parameters, X)
        return lambda X: bch_multiply(carnot, X, parameters)
    if kind == "dilation":
        if parameters.size != 1:
            raise InputError("Dilation needs one factor")
        return lambda X: dilate(carnot, float(parameters[0]), X)
    if kind == "linear":
        if parameters.size != carnot.dim**2:
            raise InputError(f"Linear map needs {carnot.dim**2} entries")
        M = parameters.reshape(carnot.dim, carnot.dim)
        return lambda X: np.asarray(X, dtype=float) @ M.T
    raise InputError(f"Unknown map kind '{kind}'")
