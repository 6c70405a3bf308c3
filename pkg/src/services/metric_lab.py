"""Metric-space numerics: variation and length of curves, Hausdorff content,
distortion and Gromov-Hausdorff bounds, midpoints, tangent-cone rescaling."""

import logging
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid
from scipy.ndimage import maximum_filter1d
from scipy.spatial.distance import pdist

from config.settings import settings
from src.exceptions import InputError, NotLipschitzError
from src.models import (
    CarnotStructure,
    ConeExperiment,
    FiniteMetricSpace,
    GHBound,
    MeasureEstimate,
    MetricCurve,
    MidpointReport,
    NormKind,
)
from src.services.algebra_core import dilate
from src.services.group_ops import (
    bch_multiply,
    cc_distance_upper,
    group_inverse,
    homogeneous_norm,
    sample_box,
)

logger = logging.getLogger(__name__)

Distances = Union[FiniteMetricSpace, np.ndarray]


def _matrix(space: Distances) -> np.ndarray:
    if isinstance(space, FiniteMetricSpace):
        return space.distances
    return np.asarray(space, dtype=float)


def variation(curve: MetricCurve) -> float:
    """sum d(f(t_i), f(t_{i+1})) on the given partition, a lower bound for Var(f)"""
    return float(np.sum(curve.step_distances(1)))


def quotient_profile(curve: MetricCurve, strides: Sequence[int] = (1, 2, 4, 8)) -> np.ndarray:
    """max_i d(f(t_i), f(t_{i+s})) / (t_{i+s} - t_i) for each stride s"""
    profile = []
    for s in strides:
        if s >= len(curve.times):
            break
        gaps = curve.times[s:] - curve.times[:-s]
        profile.append(float(np.max(curve.step_distances(s) / gaps)))
    return np.asarray(profile)


def length_via_dilatation(
    curve: MetricCurve,
    threshold: Optional[float] = None,
    stability: Optional[float] = None,
) -> float:
    """
    L(f) = int dil(f)(t) dt with dil estimated by windowed maxima of the one-step
    difference quotients. Windows shrink from 16 steps until the estimate moves by
    less than ``stability`` (relative), never below one step on each side.

    Raises:
        NotLipschitzError: If the stride quotients grow under refinement
            (log-log slope against the stride below ``threshold``)
    """
    threshold = settings.lipschitz_exponent_threshold if threshold is None else threshold
    stability = settings.dilatation_stability if stability is None else stability
    strides = (1, 2, 4, 8)
    profile = quotient_profile(curve, strides)
    if profile.size >= 2 and np.all(profile > 0):
        fit = stats.linregress(np.log(strides[: profile.size]), np.log(profile))
        if fit.slope < threshold:
            raise NotLipschitzError(float(fit.slope), float(profile[0]))

    quotients = curve.step_distances(1) / np.diff(curve.times)
    # one value per sample: the quotients of the steps touching it
    padded = np.concatenate([quotients[:1], quotients])
    estimate = maximum_filter1d(padded, size=33, mode="nearest")
    settled = np.zeros(padded.size, dtype=bool)
    for half in (8, 4, 2, 1):
        narrower = maximum_filter1d(padded, size=2 * half + 1, mode="nearest")
        change = np.abs(narrower - estimate) <= stability * np.maximum(estimate, 1e-300)
        settled |= change
        estimate = np.where(settled, estimate, narrower)
    return float(trapezoid(estimate, curve.times))


def _pairwise(points: np.ndarray, metric: Optional[Callable]) -> np.ndarray:
    if metric is None:
        return pdist(points)
    return np.concatenate([metric(points[i + 1 :], points[i]) for i in range(points.shape[0] - 1)])


def _distances_to(points: np.ndarray, seed: np.ndarray, metric: Optional[Callable]) -> np.ndarray:
    if metric is None:
        return np.linalg.norm(points - seed, axis=1)
    return np.asarray(metric(points, seed), dtype=float)


def covering_content(points: np.ndarray, k: float, delta: float, metric: Optional[Callable] = None) -> float:
    """
    Greedy sweep: the lexicographically smallest uncovered point collects all uncovered
    points within delta; the set contributes its actual diameter to the power k.
    """
    order = np.lexsort(points.T[::-1])
    remaining = points[order]
    total = 0.0
    while remaining.shape[0]:
        near = _distances_to(remaining, remaining[0], metric) <= delta
        cluster = remaining[near]
        if cluster.shape[0] > 1:
            total += float(np.max(_pairwise(cluster, metric))) ** k
        remaining = remaining[~near]
    return total


def hausdorff_measure_estimate(
    points,
    k: float,
    deltas: Sequence[float],
    metric: Optional[Callable] = None,
) -> MeasureEstimate:
    """k-dimensional Hausdorff content over a delta ladder, extrapolated linearly to delta = 0"""
    if k <= 0:
        raise InputError("k must be positive")
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    deltas = sorted((float(d) for d in deltas), reverse=True)
    contents = [covering_content(points, k, d, metric) for d in deltas]
    monotone = all(b >= a * (1 - 1e-9) for a, b in zip(contents, contents[1:]))
    if len(deltas) >= 2:
        value = float(np.polyval(np.polyfit(deltas, contents, 1), 0.0))
    else:
        value = contents[0]
    if not monotone:
        logger.warning(f"Covering contents not monotone in delta: {contents}")
    logger.info(f"H^{k} estimate {value:.5g} from contents {contents}")
    return MeasureEstimate(value=value, k=k, deltas=deltas, contents=contents, monotone=monotone)


def distortion(source: Distances, target: Distances) -> float:
    """sup |d_Y(f(y), f(y')) - d_X(y, y')| for the correspondence i -> i"""
    DX, DY = _matrix(source), _matrix(target)
    if DX.shape != DY.shape:
        raise InputError(f"Distance matrices differ in shape: {DX.shape} vs {DY.shape}")
    return float(np.max(np.abs(DY - DX), initial=0.0))


def gh_upper_bound(
    source: Distances,
    target: Distances,
    mapping: Optional[Sequence[int]] = None,
    claimed_eps: Optional[float] = None,
) -> GHBound:
    """
    2 eps for the eps-isometry x_i -> y_{mapping[i]}, eps = max(distortion, net radius).

    If ``claimed_eps`` is too small the witness is not an eps-isometry for it; the
    actual eps is returned with ``claim_holds`` False.
    """
    DX, DY = _matrix(source), _matrix(target)
    mapping = np.arange(DX.shape[0]) if mapping is None else np.asarray(mapping, dtype=int)
    if mapping.size != DX.shape[0] or np.any(mapping >= DY.shape[0]) or np.any(mapping < 0):
        raise InputError("Mapping does not send the source points into the target")
    image = DY[np.ix_(mapping, mapping)]
    dis = distortion(DX, image)
    net_radius = float(np.max(np.min(DY[:, mapping], axis=1)))
    eps = max(dis, net_radius)
    claim_holds = claimed_eps is None or eps <= claimed_eps
    if not claim_holds:
        logger.warning(f"Witness is not a {claimed_eps}-isometry; actual eps is {eps:.4g}")
    return GHBound(
        distortion=dis,
        net_radius=net_radius,
        eps=eps,
        bound=2.0 * eps,
        claimed_eps=claimed_eps,
        claim_holds=claim_holds,
    )


def path_metric_midpoint_check(space: Distances, eps: float) -> MidpointReport:
    """Pairs (x, y) without z such that max(d(x,z), d(z,y)) <= d(x,y)/2 + eps"""
    D = _matrix(space)
    n = D.shape[0]
    failures: List[tuple] = []
    worst = -np.inf
    for i in range(n):
        best = np.min(np.maximum(D[i][None, :], D), axis=1)
        excess = best - 0.5 * D[i]
        excess[: i + 1] = -np.inf
        worst = max(worst, float(np.max(excess, initial=-np.inf)))
        failures.extend((i, int(j)) for j in np.flatnonzero(excess > eps))
    worst = 0.0 if not np.isfinite(worst) else worst
    report = MidpointReport(eps=eps, passed=not failures, failures=failures, worst_excess=worst)
    logger.info(f"Midpoint check at eps={eps}: {len(failures)} failing pairs")
    return report


def _rescaled_distances(carnot: CarnotStructure, points: np.ndarray, lam: float, distance: str) -> np.ndarray:
    """lam * d_G(delta_{1/lam} u, delta_{1/lam} v) under the group bracket"""
    shrunk = dilate(carnot, 1.0 / lam, points)
    n = points.shape[0]
    D = np.zeros((n, n))
    for i in range(n):
        if distance == "cc":
            for j in range(i + 1, n):
                D[i, j] = lam * cc_distance_upper(carnot, shrunk[i], shrunk[j], use_group_bracket=True).distance
        else:
            rel = bch_multiply(carnot, group_inverse(shrunk[i]), shrunk[i + 1 :], use_group_bracket=True)
            D[i, i + 1 :] = lam * homogeneous_norm(carnot, rel, NormKind.INF)
    return D + D.T


def _reference_distances(carnot: CarnotStructure, points: np.ndarray, distance: str) -> np.ndarray:
    n = points.shape[0]
    D = np.zeros((n, n))
    for i in range(n):
        if distance == "cc":
            for j in range(i + 1, n):
                D[i, j] = cc_distance_upper(carnot, points[i], points[j]).distance
        else:
            rel = bch_multiply(carnot, group_inverse(points[i]), points[i + 1 :])
            D[i, i + 1 :] = homogeneous_norm(carnot, rel, NormKind.INF)
    return D + D.T


def tangent_cone_experiment(
    carnot: CarnotStructure,
    lambdas: Sequence[float],
    points: Optional[np.ndarray] = None,
    reference: Optional[FiniteMetricSpace] = None,
    count: int = 40,
    radius: float = 1.0,
    seed: Optional[int] = None,
    distance: str = "quasi",
) -> ConeExperiment:
    """
    GH upper bounds between (G, lam d) near the identity and the nilpotentisation,
    matching points through shared adapted coordinates.

    ``distance`` is "quasi" (|p^-1 q|_inf, cheap) or "cc" (shooting upper bounds).
    """
    if distance not in ("quasi", "cc"):
        raise InputError(f"Unknown distance '{distance}'")
    seed = settings.seed if seed is None else seed
    if points is None:
        points = sample_box(carnot, np.random.default_rng(seed), count, radius)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != carnot.dim:
        raise InputError(f"Points have dimension {points.shape[1]}, algebra has {carnot.dim}")
    D_ref = _matrix(reference) if reference is not None else _reference_distances(carnot, points, distance)
    if D_ref.shape[0] != points.shape[0]:
        raise InputError("Reference space and sample differ in size")

    bounds = []
    for lam in lambdas:
        D_lam = _rescaled_distances(carnot, points, float(lam), distance)
        bounds.append(gh_upper_bound(D_lam, D_ref).bound)
        logger.debug(f"lambda={lam}: GH bound {bounds[-1]:.4g}")
    monotone = all(b <= a * 1.1 + 1e-12 for a, b in zip(bounds, bounds[1:]))
    logger.info(f"Tangent cone bounds {bounds} (monotone={monotone})")
    return ConeExperiment(lambdas=[float(v) for v in lambdas], bounds=bounds, monotone=monotone)
