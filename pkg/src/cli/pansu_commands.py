"""pansu, develop, lift, iarea"""

import numpy as np
import pandas as pd

from config.settings import settings
from src.cli.common import (
    Run,
    curve_frame,
    format_point,
    ladder,
    load_carnot,
    parse_vector,
    read_algebra_curve,
    read_point,
)
from src.models import Convergence
from src.services.algebra_core import from_adapted, matrix_from_adapted, matrix_to_adapted, to_adapted
from src.services.pansu import (
    classify_linear,
    develop_curve,
    i_area,
    lift_curve,
    named_map,
    pansu_derivative_estimate,
)


def _map_parameters(args, carnot):
    """--params for translations and linear maps are given in the algebra file's basis"""
    if not args.params:
        return None
    params = parse_vector(args.params, name="--params")
    if args.map in ("left", "right") and params.size == carnot.dim:
        return to_adapted(carnot, params)
    if args.map == "linear" and params.size == carnot.dim**2:
        return matrix_to_adapted(carnot, params.reshape(carnot.dim, carnot.dim)).ravel()
    return params


def run_pansu(args, run: Run) -> int:
    carnot = load_carnot(args)
    x = read_point(args.at, carnot, "--at") if args.at else np.zeros(carnot.dim)
    f = named_map(carnot, args.map, _map_parameters(args, carnot))
    estimate = pansu_derivative_estimate(carnot, f, x, ladder(args.eps, settings.eps_ladder))
    label = classify_linear(estimate.candidate, carnot, args.tol)
    run.tolerances["linear"] = settings.linear_tolerance if args.tol is None else args.tol
    run.write_frame(
        "pansu_ladder.csv",
        pd.DataFrame({"eps": estimate.eps_ladder, "discrepancy": estimate.discrepancies}),
    )
    run.write_frame("pansu_matrix.csv", pd.DataFrame(matrix_from_adapted(carnot, estimate.candidate.matrix)))
    print(f"status: {estimate.status.value}")
    print(f"order: {estimate.order:.4g}")
    print(f"class: {label.value}")
    print(f"morphism residual: {estimate.candidate.morphism_residual:.3e}")
    print(f"dilation residual: {estimate.candidate.dilation_residual:.3e}")
    return 0 if estimate.status == Convergence.CONVERGED else 3


def _curve(args, run: Run, carnot):
    return read_algebra_curve(run.record_input(args.curve), carnot)


def run_develop(args, run: Run) -> int:
    carnot = load_carnot(args)
    sigma = develop_curve(carnot, _curve(args, run, carnot))
    run.write_frame("development.csv", curve_frame(sigma.times, from_adapted(carnot, sigma.points), "s"))
    print(f"endpoint: {format_point(carnot, sigma.points[-1])}")
    print(f"mesh: {sigma.diagnostics['mesh']:.4g}")
    return 0


def run_lift(args, run: Run) -> int:
    carnot = load_carnot(args)
    curve = lift_curve(carnot, _curve(args, run, carnot))
    run.write_frame("lift.csv", curve_frame(curve.times, from_adapted(carnot, curve.points)))
    print(f"endpoint: {format_point(carnot, curve.points[-1])}")
    print(f"vertical velocity: {curve.diagnostics['vertical_velocity']:.3e}")
    return 0


def run_iarea(args, run: Run) -> int:
    carnot = load_carnot(args)
    area = i_area(carnot, _curve(args, run, carnot), args.i)
    run.write_frame(f"area_{args.i}.csv", curve_frame(area.times, from_adapted(carnot, area.points), "a"))
    print(f"A^{args.i}(end): {format_point(carnot, area.points[-1])}")
    return 0


def register(subparsers, parent) -> None:
    p = subparsers.add_parser("pansu", parents=[parent], help="Pansu derivative of a named map")
    p.add_argument("--map", choices=["identity", "left", "right", "dilation", "linear"], default="identity")
    p.add_argument("--params", default=None, help="Translation point, dilation factor or row-major matrix, in the algebra file's basis")
    p.add_argument("--at", default=None, help="Base point (identity if omitted)")
    p.add_argument("--eps", default=None, help="Comma separated eps ladder")
    p.set_defaults(handler=run_pansu)

    for name, handler, text in (
        ("develop", run_develop, "Development of a sampled curve"),
        ("lift", run_lift, "Lift of a sampled algebra curve"),
        ("iarea", run_iarea, "i-area of a sampled algebra curve"),
    ):
        p = subparsers.add_parser(name, parents=[parent], help=text)
        p.add_argument("--curve", required=True, help="CSV with column t and one column per coordinate")
        if name == "iarea":
            p.add_argument("--i", type=int, default=1)
        p.set_defaults(handler=handler)
