"""Group arithmetic on a Carnot structure.

Points live in exponential coordinates of the first kind with respect to the
adapted basis, so the product is the truncated BCH series of whichever bracket
is selected (the nilpotentisation by default).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from scipy.optimize import minimize

from config.settings import settings
from src.exceptions import (
    DegenerateFitError,
    InputError,
    NoFeasiblePathError,
    OutOfChartRadiusError,
    UnsupportedStepError,
)
from src.models import (
    BoxConstants,
    CarnotStructure,
    CCDistanceResult,
    DimensionEstimate,
    GroupElement,
    HorizontalPath,
    NormKind,
    WordFactorization,
)
from src.services.algebra_core import dilate
from src.services.bch import bch, bch_chain

logger = logging.getLogger(__name__)

Letter = Tuple[float, int]


def _coords(x) -> np.ndarray:
    if isinstance(x, GroupElement):
        return x.coords
    return np.asarray(x, dtype=float)


def product_structure(
    carnot: CarnotStructure, use_group_bracket: bool = False, order: Optional[int] = None
) -> Tuple[np.ndarray, int]:
    """(structure tensor, BCH order) for the selected product

    Raises:
        UnsupportedStepError: If the step exceeds the supported BCH order
    """
    if carnot.step > settings.bch_max_order:
        raise UnsupportedStepError(carnot.step, settings.bch_max_order)
    if use_group_bracket:
        return carnot.group_structure, order or settings.bch_max_order
    return carnot.nilpotent_structure, order or carnot.step


def bch_multiply(
    carnot: CarnotStructure,
    x,
    y,
    use_group_bracket: bool = False,
    order: Optional[int] = None,
) -> np.ndarray:
    """x . y; leading axes of x and y broadcast"""
    C, order = product_structure(carnot, use_group_bracket, order)
    return bch(C, _coords(x), _coords(y), order)


def group_inverse(x) -> np.ndarray:
    return -_coords(x)


def homogeneous_norm(carnot: CarnotStructure, x, kind: NormKind = NormKind.ONE) -> np.ndarray:
    """|x|_1 = sum_i ||x_i||^(1/i) or |x|_inf = max_i ||x_i||^(1/i) over the layers x_i"""
    x = _coords(x)
    parts = [
        np.linalg.norm(x[..., carnot.layer_indices(i)], axis=-1) ** (1.0 / i)
        for i in range(1, carnot.step + 1)
    ]
    stacked = np.stack(parts, axis=-1)
    if NormKind(kind) == NormKind.INF:
        return stacked.max(axis=-1)
    return stacked.sum(axis=-1)


def quasi_distance(
    carnot: CarnotStructure, x, y, kind: NormKind = NormKind.INF, use_group_bracket: bool = False
) -> np.ndarray:
    """|x^-1 y|"""
    return homogeneous_norm(
        carnot, bch_multiply(carnot, group_inverse(x), y, use_group_bracket), kind
    )


def box_membership(carnot: CarnotStructure, r: float, x) -> bool:
    """x in Box(r), i.e. ||x_i|| <= r^i on every layer"""
    x = _coords(x)
    return all(
        np.linalg.norm(x[carnot.layer_indices(i)]) <= r**i for i in range(1, carnot.step + 1)
    )


def box_constants_estimate(
    carnot: CarnotStructure,
    samples: np.ndarray,
    distance_fn: Optional[Callable[[np.ndarray], float]] = None,
) -> BoxConstants:
    """
    Empirical Ball-Box constants: Box(c r) in B(0,r) in Box(C r) on the sample.

    ``distance_fn`` maps a point to d(0, x); it defaults to ``cc_distance_upper``.

    Raises:
        InputError: If the sample is empty
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise InputError("Box constants need at least one sample")
    if distance_fn is None:

        def distance_fn(p):
            return cc_distance_upper(carnot, np.zeros(carnot.dim), p).distance

    ratios = []
    violations = 0
    for p in samples:
        d = float(distance_fn(p))
        if not np.isfinite(d) or d <= 0:
            violations += 1
            continue
        ratios.append(float(homogeneous_norm(carnot, p, NormKind.INF)) / d)
    if not ratios:
        raise InputError("No sample has a positive finite distance")
    result = BoxConstants(
        c_hat=min(ratios), C_hat=max(ratios), samples=len(ratios), violations=violations
    )
    logger.info(f"Box constants: c={result.c_hat:.4f}, C={result.C_hat:.4f} on {result.samples} samples")
    return result


# --- word factorization ---------------------------------------------------


def _check_letters(carnot: CarnotStructure, letters: Sequence[Letter]) -> None:
    horizontal = set(int(g) for g in carnot.layer_indices(1))
    for t, g in letters:
        if int(g) not in horizontal:
            raise InputError(f"Letter generator {g} is not a horizontal basis index {sorted(horizontal)}")
        if not np.isfinite(t):
            raise InputError(f"Letter exponent {t} is not finite")


def word_product(
    carnot: CarnotStructure, letters: Sequence[Letter], use_group_bracket: bool = False
) -> np.ndarray:
    """Exponential coordinates of prod_k exp(t_k X_{g(k)})

    Raises:
        InputError: If a letter is not horizontal or its exponent is not finite
    """
    if not letters:
        return np.zeros(carnot.dim)
    _check_letters(carnot, letters)
    factors = np.zeros((len(letters), carnot.dim))
    for k, (t, g) in enumerate(letters):
        factors[k, g] = t
    C, order = product_structure(carnot, use_group_bracket)
    return bch_chain(C, factors, order)


def commutator_word(word: Tuple[int, ...], s: float) -> List[Letter]:
    """
    Letters of the iterated group commutator whose leading term is s^k times
    the right-nested bracket of ``word``; the sign of s goes on the first letter.
    """
    if not word or any(g < 0 for g in word):
        raise InputError(f"Commutator word needs nonnegative generator indices, got {word}")
    if not np.isfinite(s):
        raise InputError(f"Commutator exponent {s} is not finite")
    first = (s, word[0])
    if len(word) == 1:
        return [first]
    inner = commutator_word(word[1:], abs(s))
    inverse_inner = [(-t, g) for t, g in reversed(inner)]
    return [first] + inner + [(-s, word[0])] + inverse_inner


def _polish_letters(
    carnot: CarnotStructure,
    letters: List[Letter],
    target: np.ndarray,
    tolerance: float,
    use_group_bracket: bool,
) -> Tuple[List[Letter], float]:
    """Gauss-Newton on the letter exponents with the generator sequence held fixed"""
    gens = [g for _, g in letters]
    t = np.array([v for v, _ in letters], dtype=float)

    def error(values):
        return word_product(carnot, list(zip(values, gens)), use_group_bracket) - target

    residual = error(t)
    for iteration in range(settings.newton_max_iterations):
        norm = float(np.linalg.norm(residual))
        if norm <= 0.1 * tolerance:
            break
        jac = np.empty((carnot.dim, t.size))
        for k in range(t.size):
            h = 1e-7 * max(1.0, abs(t[k]))
            up, down = t.copy(), t.copy()
            up[k] += h
            down[k] -= h
            jac[:, k] = (error(up) - error(down)) / (2 * h)
        step, *_ = np.linalg.lstsq(jac, -residual, rcond=None)
        t = t + step
        if not np.all(np.isfinite(t)):
            return letters, float("inf")
        residual = error(t)
        logger.debug(f"Factorization Newton step {iteration}: residual {np.linalg.norm(residual):.3e}")
    return [(float(v), g) for v, g in zip(t, gens)], float(np.linalg.norm(residual))


def word_factorization(
    carnot: CarnotStructure,
    x,
    chart_radius: Optional[float] = None,
    tolerance: float = 1e-8,
    use_group_bracket: bool = False,
) -> WordFactorization:
    """
    Write x as a product of exponentials of generators.

    Horizontal letters first, then for each grade k one iterated commutator per
    adapted basis word of that grade, fed with the remainder of the partial
    product. Points beyond the chart radius are dilated into the chart (nilpotent
    product only) and the letters scaled back.

    Raises:
        OutOfChartRadiusError: If the residual does not reach ``tolerance``
    """
    chart_radius = settings.chart_radius if chart_radius is None else chart_radius
    x = _coords(x)
    if not np.any(x):
        return WordFactorization(letters=[], residual=0.0, bound_constant=0.0, rescaling=1.0)

    size = float(homogeneous_norm(carnot, x, NormKind.ONE))
    scale = 1.0
    if size > chart_radius:
        if use_group_bracket:
            raise OutOfChartRadiusError(float("nan"))
        scale = chart_radius / size
    target = dilate(carnot, scale, x)

    letters: List[Letter] = [
        (float(target[g]), int(g)) for g in carnot.layer_indices(1) if target[g] != 0.0
    ]
    for grade in range(2, carnot.step + 1):
        remainder = bch_multiply(
            carnot, group_inverse(word_product(carnot, letters, use_group_bracket)), target, use_group_bracket
        )
        for index in carnot.layer_indices(grade):
            c = float(remainder[index])
            if c == 0.0:
                continue
            s = np.sign(c) * abs(c) ** (1.0 / grade)
            letters.extend(commutator_word(carnot.words[index], s))

    residual = float(np.linalg.norm(word_product(carnot, letters, use_group_bracket) - target))
    if residual > tolerance:
        letters, residual = _polish_letters(carnot, letters, target, tolerance, use_group_bracket)
    if residual > tolerance:
        raise OutOfChartRadiusError(residual)

    letters = [(t / scale, g) for t, g in letters]
    residual = float(np.linalg.norm(word_product(carnot, letters, use_group_bracket) - x))
    magnitude = float(np.linalg.norm(x)) ** (1.0 / carnot.step)
    bound = max(abs(t) for t, _ in letters) / magnitude if letters else 0.0
    logger.info(f"Factorized into {len(letters)} letters, residual {residual:.2e}")
    return WordFactorization(letters=letters, residual=residual, bound_constant=bound, rescaling=scale)


# --- CC distance ----------------------------------------------------------


def _run_ordered(fn: Callable, items: Iterable) -> list:
    """Map over items, in parallel when settings.threads > 1, results in submission order"""
    items = list(items)
    workers = max(1, min(settings.threads, len(items)))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))


def _endpoint(carnot, C, order, controls: np.ndarray, tau: float) -> np.ndarray:
    horizontal = carnot.layer_indices(1)
    factors = np.zeros((controls.shape[0], carnot.dim))
    factors[:, horizontal] = controls * tau
    return bch_chain(C, factors, order)


def path_endpoint(carnot: CarnotStructure, path: HorizontalPath, use_group_bracket: bool = False) -> np.ndarray:
    """Exponential coordinates of the endpoint of a horizontal path from the identity

    Raises:
        InputError: If the path's horizontal layer does not match the structure
    """
    horizontal = carnot.layer_indices(1)
    if path.controls.shape[1] != carnot.dim or path.horizontal_dim != horizontal.size:
        raise InputError(
            f"Path with {path.controls.shape[1]} coordinates and dim V_1 = {path.horizontal_dim} "
            f"does not fit an algebra of dimension {carnot.dim} with dim V_1 = {horizontal.size}"
        )
    C, order = product_structure(carnot, use_group_bracket)
    return bch_chain(C, path.controls * path.durations[:, None], order)


def cc_distance_upper(
    carnot: CarnotStructure,
    x,
    y,
    n_segments: Optional[int] = None,
    optimizer_budget: Optional[int] = None,
    starts: Optional[int] = None,
    tolerance: Optional[float] = None,
    seed: Optional[int] = None,
    use_group_bracket: bool = False,
) -> CCDistanceResult:
    """
    Upper bound on d(x, y) by penalised shooting over piecewise-constant horizontal controls.

    Each start minimises energy + mu ||E(u) - x^-1 y||^2 with mu continued through
    1e1..1e7, then polishes with the endpoint as an equality constraint. The
    shortest path meeting the endpoint tolerance wins.

    Raises:
        InputError: If n_segments < 1
        NoFeasiblePathError: If no start reaches the endpoint
    """
    n_segments = settings.cc_segments if n_segments is None else n_segments
    budget = settings.cc_max_iterations if optimizer_budget is None else optimizer_budget
    starts = settings.cc_starts if starts is None else starts
    tolerance = settings.cc_endpoint_tolerance if tolerance is None else tolerance
    seed = settings.seed if seed is None else seed
    if n_segments < 1:
        raise InputError("n_segments must be >= 1")

    C, order = product_structure(carnot, use_group_bracket)
    target = bch(C, -_coords(x), _coords(y), order)
    horizontal = carnot.layer_indices(1)
    p = horizontal.size
    tau = 1.0 / n_segments

    if np.linalg.norm(target) == 0.0:
        path = HorizontalPath(
            controls=np.zeros((n_segments, carnot.dim)), durations=np.full(n_segments, tau), horizontal_dim=p
        )
        return CCDistanceResult(distance=0.0, residual=0.0, path=path, starts=0)

    def error(flat):
        return _endpoint(carnot, C, order, flat.reshape(n_segments, p), tau) - target

    def energy(flat):
        return float(np.sum(flat**2) * tau)

    rng = np.random.default_rng(seed)
    straight = np.tile(target[horizontal], (n_segments, 1)).ravel()
    spread = max(float(homogeneous_norm(carnot, target, NormKind.ONE)), 1e-3)
    initial = [straight] + [
        straight + spread * rng.normal(size=straight.size) for _ in range(max(starts, 1) - 1)
    ]

    def solve(u0):
        u = u0
        for mu in (1e1, 1e3, 1e5, 1e7):
            res = minimize(
                lambda v: energy(v) + mu * float(np.sum(error(v) ** 2)),
                u,
                method="BFGS",
                options={"maxiter": budget},
            )
            u = res.x
        polished = minimize(
            energy,
            u,
            method="SLSQP",
            constraints=[{"type": "eq", "fun": error}],
            options={"maxiter": budget, "ftol": 1e-12},
        )
        if float(np.linalg.norm(error(polished.x))) <= float(np.linalg.norm(error(u))):
            u = polished.x
        controls = u.reshape(n_segments, p)
        return float(np.sum(np.linalg.norm(controls, axis=1)) * tau), float(np.linalg.norm(error(u))), controls

    results = _run_ordered(solve, initial)
    feasible = [r for r in results if r[1] <= tolerance]
    if not feasible:
        best = min(r[1] for r in results)
        raise NoFeasiblePathError(best, tolerance)
    length, residual, controls = min(feasible, key=lambda r: r[0])

    full = np.zeros((n_segments, carnot.dim))
    full[:, horizontal] = controls
    path = HorizontalPath(controls=full, durations=np.full(n_segments, tau), horizontal_dim=p)
    logger.info(
        f"CC upper bound {length:.6f} ({len(feasible)}/{len(results)} starts feasible, residual {residual:.1e})"
    )
    return CCDistanceResult(distance=length, residual=residual, path=path, starts=len(results))


# --- Hausdorff dimension --------------------------------------------------


def sample_box(carnot: CarnotStructure, rng: np.random.Generator, count: int, radius: float) -> np.ndarray:
    """Uniform samples of Box(radius): layer i uniform in the Euclidean ball of radius radius^i"""
    points = np.zeros((count, carnot.dim))
    for grade in range(1, carnot.step + 1):
        idx = carnot.layer_indices(grade)
        d = idx.size
        directions = rng.normal(size=(count, d))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = radius**grade * rng.uniform(size=count) ** (1.0 / d)
        points[:, idx] = directions * radii[:, None]
    return points


def packing_count(
    carnot: CarnotStructure,
    samples: np.ndarray,
    eps: float,
    core_radius: float,
) -> int:
    """
    Greedy maximal eps-separated subset of the samples under |p^-1 q|_inf, in
    lexicographic order; counts the centers lying in Box(core_radius).
    """
    C, order = product_structure(carnot)
    samples = samples[np.lexsort(samples.T[::-1])]
    horizontal = carnot.layer_indices(1)
    cells = np.floor(samples[:, horizontal] / eps).astype(int)
    offsets = np.array(np.meshgrid(*[[-1, 0, 1]] * horizontal.size, indexing="ij")).reshape(horizontal.size, -1).T
    centers = np.empty_like(samples)
    buckets = {}
    total = 0
    count = 0
    for point, cell in zip(samples, cells):
        ids = [i for key in map(tuple, cell + offsets) for i in buckets.get(key, ())]
        if ids:
            gaps = homogeneous_norm(carnot, bch(C, -centers[ids], point, order), NormKind.INF)
            if np.min(gaps) < eps:
                continue
        centers[total] = point
        buckets.setdefault(tuple(cell), []).append(total)
        total += 1
        if homogeneous_norm(carnot, point, NormKind.INF) <= core_radius:
            count += 1
    return count


def hausdorff_dimension_estimate(
    carnot: CarnotStructure,
    scale_ladder: Sequence[float],
    region_sampler: Optional[Callable[[np.random.Generator, int, float], np.ndarray]] = None,
    samples_per_ball: Optional[int] = None,
    core_radius: Optional[float] = None,
    max_samples: Optional[int] = None,
    seed: Optional[int] = None,
) -> DimensionEstimate:
    """
    Slope of log N_eps against log(1/eps) for greedy packings of Box(core_radius).

    ``region_sampler(rng, count, radius)`` draws points covering Box(radius); the
    default samples it uniformly.

    Raises:
        InputError: If fewer than 4 scales are given
        DegenerateFitError: If fewer than 3 scales give a usable count
    """
    scales = sorted((float(e) for e in scale_ladder), reverse=True)
    if len(scales) < 4:
        raise InputError("Dimension estimate needs at least 4 scales")
    if scales[0] / scales[-1] < 10:
        logger.warning(f"Scale ladder spans only a factor {scales[0] / scales[-1]:.2f} (< 1 decade)")
    samples_per_ball = settings.packing_samples_per_ball if samples_per_ball is None else samples_per_ball
    core_radius = settings.packing_core_radius if core_radius is None else core_radius
    max_samples = settings.packing_max_samples if max_samples is None else max_samples
    seed = settings.seed if seed is None else seed
    sampler = region_sampler or (lambda rng, count, radius: sample_box(carnot, rng, count, radius))
    Q = carnot.homogeneous_dimension

    def count_at(indexed):
        k, eps = indexed
        rng = np.random.default_rng([seed, k])
        radius = core_radius + eps
        n = int(min(max_samples, samples_per_ball * (radius / eps) ** Q))
        if n == max_samples:
            logger.warning(f"Sample count capped at {max_samples} for eps={eps}")
        N = packing_count(carnot, sampler(rng, n, radius), eps, core_radius)
        logger.debug(f"eps={eps:.4g}: {n} samples, {N} centers")
        return N

    counts = _run_ordered(count_at, enumerate(scales))
    usable = [(e, c) for e, c in zip(scales, counts) if c > 1]
    if len(usable) < 3:
        raise DegenerateFitError(f"Only {len(usable)} scales produced usable packing counts")

    log_inv = np.log([1.0 / e for e, _ in usable])
    log_n = np.log([c for _, c in usable])
    fit = stats.linregress(log_inv, log_n)
    half = float(stats.t.ppf(0.975, len(usable) - 2)) * fit.stderr
    estimate = DimensionEstimate(
        estimate=float(fit.slope),
        stderr=float(fit.stderr),
        ci_low=float(fit.slope - half),
        ci_high=float(fit.slope + half),
        r_value=float(fit.rvalue),
        scales=scales,
        counts=[int(c) for c in counts],
    )
    logger.info(
        f"Hausdorff dimension estimate {estimate.estimate:.3f} "
        f"[{estimate.ci_low:.3f}, {estimate.ci_high:.3f}] (Q={Q})"
    )
    return estimate
