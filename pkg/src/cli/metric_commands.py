"""var, hmeas, ghbound, midpoint, cone"""

import pandas as pd

from src.cli.common import Run, ladder, load_carnot, parse_vector, read_curve, read_matrix, read_points
from src.models import FiniteMetricSpace, MetricCurve
from src.services.metric_lab import (
    gh_upper_bound,
    hausdorff_measure_estimate,
    length_via_dilatation,
    path_metric_midpoint_check,
    quotient_profile,
    tangent_cone_experiment,
    variation,
)


def run_var(args, run: Run) -> int:
    times, points = read_curve(run.record_input(args.curve))
    curve = MetricCurve(times=times, points=points)
    profile = quotient_profile(curve)
    run.write_frame("quotient_profile.csv", pd.DataFrame({"stride": [1, 2, 4, 8][: profile.size], "quotient": profile}))
    print(f"variation: {variation(curve):.10g}")
    print(f"length via dilatation: {length_via_dilatation(curve):.10g}")
    return 0


def run_hmeas(args, run: Run) -> int:
    points = read_points(run.record_input(args.points))
    estimate = hausdorff_measure_estimate(points, args.k, ladder(args.deltas, [0.1, 0.05, 0.02, 0.01]))
    run.write_frame("covering_contents.csv", pd.DataFrame({"delta": estimate.deltas, "content": estimate.contents}))
    print(f"H^{args.k:g} estimate: {estimate.value:.8g}")
    print(f"monotone: {estimate.monotone}")
    return 0


def _space(path, run: Run, quasi: bool) -> FiniteMetricSpace:
    return FiniteMetricSpace(distances=read_matrix(run.record_input(path)), quasi=quasi)


def run_ghbound(args, run: Run) -> int:
    source = _space(args.source, run, args.quasi)
    target = _space(args.target, run, args.quasi)
    mapping = [int(v) for v in parse_vector(args.mapping, name="--mapping")] if args.mapping else None
    bound = gh_upper_bound(source, target, mapping, args.eps)
    run.write_frame("gh_bound.csv", pd.DataFrame([bound.model_dump()]))
    print(f"distortion: {bound.distortion:.8g}")
    print(f"net radius: {bound.net_radius:.8g}")
    print(f"GH upper bound: {bound.bound:.8g}")
    if bound.claimed_eps is not None:
        print(f"claim eps={bound.claimed_eps:g} holds: {bound.claim_holds}")
    return 0


def run_midpoint(args, run: Run) -> int:
    space = _space(args.space, run, args.quasi)
    report = path_metric_midpoint_check(space, args.eps)
    run.write_frame("midpoint_failures.csv", pd.DataFrame(report.failures, columns=["i", "j"]))
    print(f"passed: {report.passed}")
    print(f"failing pairs: {len(report.failures)}")
    print(f"worst excess: {report.worst_excess:.6g}")
    return 0


def run_cone(args, run: Run) -> int:
    carnot = load_carnot(args)
    experiment = tangent_cone_experiment(
        carnot,
        ladder(args.lambdas, [1, 2, 4, 8, 16]),
        count=args.count,
        radius=args.radius,
        seed=run.seed,
        distance=args.distance,
    )
    run.write_frame("cone_bounds.csv", pd.DataFrame({"lambda": experiment.lambdas, "bound": experiment.bounds}))
    for lam, b in zip(experiment.lambdas, experiment.bounds):
        print(f"lambda={lam:g}: GH bound {b:.6g}")
    print(f"monotone: {experiment.monotone}")
    return 0


def register(subparsers, parent) -> None:
    p = subparsers.add_parser("var", parents=[parent], help="Variation and length of a sampled curve")
    p.add_argument("--curve", required=True, help="CSV with column t and one column per coordinate")
    p.set_defaults(handler=run_var)

    p = subparsers.add_parser("hmeas", parents=[parent], help="k-dimensional Hausdorff measure of a point set")
    p.add_argument("--points", required=True)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--deltas", default=None)
    p.set_defaults(handler=run_hmeas)

    p = subparsers.add_parser("ghbound", parents=[parent], help="GH upper bound from an eps-isometry")
    p.add_argument("--source", required=True, help="Distance matrix CSV without header")
    p.add_argument("--target", required=True)
    p.add_argument("--mapping", default=None, help="Target index of each source point")
    p.add_argument("--eps", type=float, default=None, help="Claimed eps")
    p.add_argument("--quasi", action="store_true", help="Skip the triangle inequality check")
    p.set_defaults(handler=run_ghbound)

    p = subparsers.add_parser("midpoint", parents=[parent], help="Approximate midpoint criterion")
    p.add_argument("--space", required=True, help="Distance matrix CSV without header")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--quasi", action="store_true")
    p.set_defaults(handler=run_midpoint)

    p = subparsers.add_parser("cone", parents=[parent], help="Tangent cone rescaling experiment")
    p.add_argument("--lambdas", default=None)
    p.add_argument("--count", type=int, default=40)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--distance", choices=["quasi", "cc"], default="quasi")
    p.set_defaults(handler=run_cone)
