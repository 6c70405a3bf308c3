"""Invariant suite behind the ``report`` subcommand"""

import logging
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from config.settings import settings
from src.exceptions import CarnotKitError, NotSymplecticError
from src.models import (
    Convergence,
    HamiltonianKind,
    HamiltonianSpec,
    InvariantCheck,
    LinearClass,
    MetricCurve,
    NormKind,
    SampledCurve,
)
from src.services import catalog
from src.services.algebra_core import (
    bracket_n,
    carnot_structure,
    magic_identity_residual,
    nilpotent_bracket_limit,
)
from src.services.group_ops import (
    bch_multiply,
    box_constants_estimate,
    hausdorff_dimension_estimate,
    homogeneous_norm,
    sample_box,
)
from src.services.heisenberg import (
    LiftedMap,
    cc_norm_exact,
    hofer_lower_bound_check,
    lift_planar_curve,
    lift_symplectomorphism,
    vertical_flow_check,
)
from src.services.metric_lab import hausdorff_measure_estimate, tangent_cone_experiment, variation
from src.services.pansu import (
    beta_limit,
    classify_linear,
    develop_curve,
    i_area,
    named_map,
    pansu_derivative_estimate,
)

logger = logging.getLogger(__name__)

BETA_LADDER = [0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625]


def _check(id: str, name: str, residual: float, tolerance: float, detail: Optional[str] = None, passed=None):
    return InvariantCheck(
        id=id,
        name=name,
        residual=float(residual),
        tolerance=float(tolerance),
        passed=bool(residual <= tolerance) if passed is None else bool(passed),
        detail=detail,
    )


def check_nilpotentisation_oracle(rng: np.random.Generator) -> InvariantCheck:
    worst = 0.0
    for spec in (catalog.heisenberg(1), catalog.heisenberg(2), catalog.sussmann(), catalog.free_step2(3)):
        carnot = carnot_structure(spec)
        for _ in range(100):
            x, y = rng.normal(size=(2, carnot.dim))
            limit = nilpotent_bracket_limit(spec, carnot, x, y).value
            worst = max(worst, float(np.linalg.norm(limit - bracket_n(carnot, x, y))))
    return _check("AC-1", "nilpotentisation vs rescaled-bracket limit", worst, 1e-8)


def check_sussmann_nilpotentisation(rng: np.random.Generator) -> InvariantCheck:
    carnot = carnot_structure(catalog.sussmann())
    expected = np.zeros((4, 4, 4))
    expected[0, 1, 2], expected[1, 0, 2] = 1.0, -1.0
    expected[0, 2, 3], expected[2, 0, 3] = 1.0, -1.0
    residual = float(np.max(np.abs(carnot.nilpotent_structure - expected)))
    return _check("AC-2", "Sussmann nilpotent bracket table", residual, 1e-12, str(carnot.nilpotent_table()))


def check_homogeneous_dimension(rng: np.random.Generator) -> InvariantCheck:
    cases = [(catalog.heisenberg(n), 2 * n + 2) for n in (1, 2, 3)] + [(catalog.sussmann(), 7)]
    mismatches = [
        f"{spec.name}: {carnot_structure(spec).homogeneous_dimension} != {q}"
        for spec, q in cases
        if carnot_structure(spec).homogeneous_dimension != q
    ]
    return _check("AC-3", "homogeneous dimension", len(mismatches), 0, "; ".join(mismatches) or None)


def check_hausdorff_dimension(rng: np.random.Generator) -> InvariantCheck:
    carnot = carnot_structure(catalog.heisenberg(1))
    estimate = hausdorff_dimension_estimate(carnot, np.geomspace(0.24, 0.06, 5))
    return _check(
        "AC-4",
        "packing dimension of the h(1) box",
        abs(estimate.estimate - 4.0),
        0.3,
        f"estimate {estimate.estimate:.3f}, counts {estimate.counts}",
    )


def check_ball_box(rng: np.random.Generator) -> InvariantCheck:
    carnot = carnot_structure(catalog.heisenberg(1))
    samples = sample_box(carnot, rng, 500, 1.0)
    constants = box_constants_estimate(carnot, samples, distance_fn=lambda p: float(cc_norm_exact(p)))
    ratio = homogeneous_norm(carnot, samples, NormKind.INF) / cc_norm_exact(samples)
    violations = int(np.sum(ratio < constants.c_hat * (1 - 1e-12)) + np.sum(ratio > constants.C_hat * (1 + 1e-12)))
    finite = 0 < constants.c_hat <= constants.C_hat < np.inf
    return _check(
        "AC-5",
        "ball-box sandwich",
        violations,
        0,
        f"c={constants.c_hat:.4f}, C={constants.C_hat:.4f}",
        passed=violations == 0 and finite,
    )


def check_pansu_dichotomy(rng: np.random.Generator) -> InvariantCheck:
    carnot = carnot_structure(catalog.heisenberg(1))
    a = np.array([0.7, -0.4, 0.3])
    ladder = [0.2, 0.1, 0.05, 0.025, 0.0125]
    left = pansu_derivative_estimate(carnot, named_map(carnot, "left", a), rng.normal(size=3), ladder)
    right = pansu_derivative_estimate(carnot, named_map(carnot, "right", a), rng.normal(size=3), ladder)
    left_class = classify_linear(left.candidate, carnot, tolerance=1e-8)
    residual = max(
        float(np.max(np.abs(left.candidate.matrix - np.eye(carnot.dim)))), left.candidate.morphism_residual
    )
    passed = (
        left_class == LinearClass.HL
        and residual <= 1e-8
        and right.status == Convergence.DIVERGENT
        and right.discrepancies[-1] >= right.discrepancies[0]
    )
    detail = f"left={left_class.value}, right={right.status.value} {right.discrepancies}"
    return _check("AC-6", "Pansu derivative dichotomy", residual, 1e-8, detail, passed=passed)


def _horizontal_test_curves() -> List[Callable[[np.ndarray], np.ndarray]]:
    return [
        lambda s: np.column_stack([s, 0.5 * s**2]),
        lambda s: np.column_stack([s, s**2]),
        lambda s: np.column_stack([np.sin(s), 1 - np.cos(s)]),
        lambda s: np.column_stack([s + s**3, s**2 + s**4]),
        lambda s: np.column_stack([s - s**3, 2 * s**2]),
    ]


def _slope(s: np.ndarray, values: np.ndarray) -> float:
    return float(np.polyfit(np.log(s), np.log(values), 1)[0])


def check_development_order(rng: np.random.Generator) -> InvariantCheck:
    carnot = carnot_structure(catalog.heisenberg(1))
    times = np.linspace(0.0, 0.1, 2001)
    probe = np.flatnonzero(times >= 0.01)
    dev_slopes, area_slopes = [], []
    for planar in _horizontal_test_curves():
        curve = lift_planar_curve(SampledCurve(times=times, points=planar(times)))
        sigma = develop_curve(carnot, curve)
        error = np.linalg.norm(sigma.points - curve.points, axis=1)
        dev_slopes.append(_slope(times[probe], error[probe]))
        area = np.linalg.norm(i_area(carnot, sigma, 1).points, axis=1)
        area_slopes.append(_slope(times[probe], area[probe]))
    worst = max(max(1.9 - min(dev_slopes), 0.0), max(2.9 - min(area_slopes), 0.0))
    detail = f"development slopes {np.round(dev_slopes, 3).tolist()}, 1-area slopes {np.round(area_slopes, 3).tolist()}"
    return _check("AC-7", "development and i-area orders", worst, 0.0, detail)


def check_beta_limit(rng: np.random.Generator) -> InvariantCheck:
    carnot = carnot_structure(catalog.sussmann())
    worst = 0.0
    for _ in range(50):
        x, y = 0.5 * rng.normal(size=(2, carnot.dim))
        limit = beta_limit(carnot, x, y, BETA_LADDER).value
        worst = max(worst, float(np.linalg.norm(limit - bch_multiply(carnot, x, y))))
    return _check("AC-8", "beta limit equals the nilpotent product", worst, 1e-6)


def _symplectic_examples():
    shear = np.array([[1.0, 0.5], [0.0, 1.0]])
    rotation = np.array([[np.cos(0.3), np.sin(0.3)], [-np.sin(0.3), np.cos(0.3)]])
    squeeze = np.diag([2.0, 0.5])
    maps = [lambda X, A=A: X @ A.T for A in (shear, rotation, squeeze)]
    bumps = [
        HamiltonianSpec(kind=HamiltonianKind.QUADRATIC_BUMP, amplitude=1.0, support_radius=1.0),
        HamiltonianSpec(kind=HamiltonianKind.POLYNOMIAL_BUMP, amplitude=0.2, support_radius=0.8, center=[0.1, -0.2]),
    ]
    return maps, bumps


def check_symplectic_lift(rng: np.random.Generator, points: int = 100) -> InvariantCheck:
    maps, bumps = _symplectic_examples()
    lifts = [lift_symplectomorphism(phi, 1) for phi in maps]
    lifts += [lift_symplectomorphism(LiftedMap.from_flow(H).phi, 1) for H in bumps]
    P = np.column_stack([rng.uniform(-1, 1, size=(points, 2)), rng.uniform(-1, 1, size=points)])
    worst = max(abs(float(np.linalg.det(lifted.jacobian(p))) - 1.0) for lifted in lifts for p in P)
    try:
        lift_symplectomorphism(lambda X: X @ np.diag([2.0, 1.0]), 1)
        raised = False
    except NotSymplecticError:
        raised = True
    return _check(
        "AC-9",
        "lifted maps preserve volume",
        worst,
        1e-6,
        f"diag(2,1) rejected: {raised}",
        passed=worst <= 1e-6 and raised,
    )


def check_vertical_flow(rng: np.random.Generator) -> InvariantCheck:
    H = HamiltonianSpec(kind=HamiltonianKind.QUADRATIC_BUMP, amplitude=1.0, support_radius=1.0)
    residual = vertical_flow_check(H, np.array([0.3, -0.2]), T=1.0, steps=1000)
    return _check("AC-10", "vertical part of the lifted flow", residual, 1e-4)


def check_hofer_bound(rng: np.random.Generator) -> InvariantCheck:
    flows = [
        HamiltonianSpec(kind=HamiltonianKind.QUADRATIC_BUMP, amplitude=s, support_radius=1.0) for s in (0.1, 1.0, 10.0)
    ] + [
        HamiltonianSpec(kind=HamiltonianKind.POLYNOMIAL_BUMP, amplitude=1.0, support_radius=0.5, center=[0.2, 0.1]),
        HamiltonianSpec(kind=HamiltonianKind.QUADRATIC_BUMP, amplitude=1.0, support_radius=0.6, modulation=0.5),
    ]
    results = [hofer_lower_bound_check(H, region_radius=1.0) for H in flows]
    margin = max(r.lhs - r.rhs for r in results)
    detail = "; ".join(f"{r.lhs:.4g} <= {r.rhs:.4g}" for r in results)
    return _check("AC-11", "Hofer lower bound", margin, 0.0, detail, passed=all(r.passed for r in results))


def jump_curve(samples: int = 10_000) -> MetricCurve:
    t = np.linspace(-1.0, 1.0, samples + 1)
    return MetricCurve(times=t, points=np.column_stack([t, np.sign(t)]))


def check_variation_example(rng: np.random.Generator) -> InvariantCheck:
    curve = jump_curve()
    var = variation(curve)
    image = hausdorff_measure_estimate(curve.points, 1.0, [0.2, 0.1, 0.05]).value
    residual = max(abs(var - 4.0) / 4.0 / 0.01, abs(image - 2.0) / 2.0 / 0.05)
    return _check("AC-12", "variation vs image measure", residual, 1.0, f"Var={var:.5f}, H1(image)={image:.5f}")


def check_magic_identity(rng: np.random.Generator) -> InvariantCheck:
    carnot = carnot_structure(catalog.heisenberg(1))
    worst = max(
        magic_identity_residual(catalog.heisenberg(1), carnot, *rng.normal(size=(3, 3))).residual for _ in range(50)
    )
    sussmann = carnot_structure(catalog.sussmann())
    recorded = magic_identity_residual(catalog.sussmann(), sussmann, *rng.normal(size=(3, 4)))
    detail = f"Sussmann residual {recorded.residual:.6g}, dilation residual {recorded.dilation_residual:.6g}"
    return _check("AC-13", "magic identity on Carnot algebras", worst, 1e-12, detail)


def check_tangent_cone(rng: np.random.Generator) -> InvariantCheck:
    carnot = carnot_structure(catalog.sussmann())
    experiment = tangent_cone_experiment(carnot, [1, 2, 4, 8, 16], count=30)
    growth = max((b - 1.1 * a for a, b in zip(experiment.bounds, experiment.bounds[1:])), default=0.0)
    return _check(
        "AC-14",
        "tangent cone bounds decrease",
        max(growth, 0.0),
        0.0,
        str(np.round(experiment.bounds, 5).tolist()),
        passed=experiment.monotone,
    )


CHECKS: Dict[str, Callable[[np.random.Generator], InvariantCheck]] = {
    "AC-1": check_nilpotentisation_oracle,
    "AC-2": check_sussmann_nilpotentisation,
    "AC-3": check_homogeneous_dimension,
    "AC-4": check_hausdorff_dimension,
    "AC-5": check_ball_box,
    "AC-6": check_pansu_dichotomy,
    "AC-7": check_development_order,
    "AC-8": check_beta_limit,
    "AC-9": check_symplectic_lift,
    "AC-10": check_vertical_flow,
    "AC-11": check_hofer_bound,
    "AC-12": check_variation_example,
    "AC-13": check_magic_identity,
    "AC-14": check_tangent_cone,
}


def run_suite(ids: Optional[Sequence[str]] = None, seed: Optional[int] = None) -> List[InvariantCheck]:
    """Run the selected checks in order; a check that raises becomes a failed row"""
    seed = settings.seed if seed is None else seed
    selected = list(CHECKS) if ids is None else list(ids)
    results = []
    for index, check_id in enumerate(selected):
        if check_id not in CHECKS:
            results.append(_check(check_id, "unknown check", float("inf"), 0.0, "no such check", passed=False))
            continue
        rng = np.random.default_rng([seed, index])
        started = time.perf_counter()
        try:
            result = CHECKS[check_id](rng)
        except CarnotKitError as e:
            logger.error(f"{check_id} raised {type(e).__name__}: {e}")
            result = _check(check_id, CHECKS[check_id].__name__, float("inf"), 0.0, str(e), passed=False)
        except (np.linalg.LinAlgError, ValueError, ArithmeticError) as e:
            logger.exception(f"{check_id} crashed")
            detail = f"{type(e).__name__}: {e}"
            result = _check(check_id, CHECKS[check_id].__name__, float("inf"), 0.0, detail, passed=False)
        logger.info(
            f"{check_id} {'passed' if result.passed else 'FAILED'} "
            f"(residual {result.residual:.3g}, {time.perf_counter() - started:.1f}s)"
        )
        results.append(result)
    return results


def report_frame(checks: Sequence[InvariantCheck]) -> pd.DataFrame:
    columns = list(InvariantCheck.model_fields)
    return pd.DataFrame([c.model_dump() for c in checks], columns=columns)


def format_table(checks: Sequence[InvariantCheck]) -> str:
    if not checks:
        return "(no checks)"
    rows = [f"{'id':<6} {'status':<6} {'residual':>12} {'tolerance':>10}  name"]
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        rows.append(f"{c.id:<6} {status:<6} {c.residual:>12.4g} {c.tolerance:>10.3g}  {c.name}")
    return "\n".join(rows)


def write_report(checks: Sequence[InvariantCheck], out_dir: Path) -> List[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "report.csv"
    text_path = out_dir / "report.txt"
    report_frame(checks).to_csv(csv_path, index=False, float_format="%.17g")
    text_path.write_text(format_table(checks) + "\n", encoding="utf-8")
    logger.info(f"Report written to {csv_path}")
    return [csv_path, text_path]
