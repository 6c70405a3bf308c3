"""mul, norm, ccdist, hausdim, factorize"""

import numpy as np
import pandas as pd

from config.settings import settings
from src.cli.common import Run, format_point, ladder, load_carnot, read_point
from src.models import NormKind
from src.services.algebra_core import from_adapted
from src.services.group_ops import (
    bch_multiply,
    cc_distance_upper,
    hausdorff_dimension_estimate,
    homogeneous_norm,
    word_factorization,
)


def run_mul(args, run: Run) -> int:
    carnot = load_carnot(args)
    x = read_point(args.x, carnot, "x")
    y = read_point(args.y, carnot, "y")
    z = bch_multiply(carnot, x, y, use_group_bracket=args.group)
    print(format_point(carnot, z))
    return 0


def run_norm(args, run: Run) -> int:
    carnot = load_carnot(args)
    x = read_point(args.x, carnot, "x")
    value = float(homogeneous_norm(carnot, x, NormKind(args.kind)))
    print(f"{value:.17g}")
    return 0


def run_ccdist(args, run: Run) -> int:
    carnot = load_carnot(args)
    x = read_point(args.x, carnot, "x")
    y = read_point(args.y, carnot, "y") if args.y else np.zeros(carnot.dim)
    result = cc_distance_upper(
        carnot,
        x,
        y,
        n_segments=args.segments,
        starts=args.starts,
        tolerance=args.tol,
        seed=run.seed,
        use_group_bracket=args.group,
    )
    run.tolerances["endpoint"] = settings.cc_endpoint_tolerance if args.tol is None else args.tol
    path = pd.DataFrame(from_adapted(carnot, result.path.controls), columns=[f"u{i}" for i in range(carnot.dim)])
    path.insert(0, "duration", result.path.durations)
    run.write_frame("cc_path.csv", path)
    print(f"distance upper bound: {result.distance:.10g}")
    print(f"endpoint residual: {result.residual:.3e}")
    print(f"starts: {result.starts}")
    return 0


def run_hausdim(args, run: Run) -> int:
    carnot = load_carnot(args)
    if args.ladder:
        scales = ladder(args.ladder, [])
    else:
        scales = list(np.geomspace(args.max_scale, args.min_scale, args.scales))
    estimate = hausdorff_dimension_estimate(carnot, scales, seed=run.seed)
    frame = pd.DataFrame({"scale": estimate.scales, "count": estimate.counts})
    run.write_frame("packing_counts.csv", frame)
    print(f"Hausdorff dimension estimate: {estimate.estimate:.4f} +- {estimate.stderr:.4f}")
    print(f"95% interval: [{estimate.ci_low:.4f}, {estimate.ci_high:.4f}]")
    print(f"homogeneous dimension Q: {carnot.homogeneous_dimension}")
    return 0


def run_factorize(args, run: Run) -> int:
    carnot = load_carnot(args)
    x = read_point(args.x, carnot, "x")
    kwargs = {} if args.tol is None else {"tolerance": args.tol}
    factorization = word_factorization(carnot, x, use_group_bracket=args.group, **kwargs)
    letters = pd.DataFrame(factorization.letters, columns=["time", "generator"])
    # basis vector of the algebra file that each generator letter exponentiates
    letters["basis_index"] = [int(np.argmax(np.abs(carnot.graded_basis[:, g]))) for g in letters["generator"]]
    run.write_frame("letters.csv", letters)
    print(f"letters: {len(factorization.letters)}")
    print(f"residual: {factorization.residual:.3e}")
    print(f"bound constant: {factorization.bound_constant:.6g}")
    print(f"rescaling: {factorization.rescaling:.6g}")
    return 0


def register(subparsers, parent) -> None:
    p = subparsers.add_parser("mul", parents=[parent], help="Group product x . y, coordinates in the algebra file's basis")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--group", action="store_true", help="Use the G bracket instead of the nilpotent one")
    p.set_defaults(handler=run_mul)

    p = subparsers.add_parser("norm", parents=[parent], help="Homogeneous norm of x")
    p.add_argument("--x", required=True)
    p.add_argument("--kind", choices=[k.value for k in NormKind], default=NormKind.ONE.value)
    p.set_defaults(handler=run_norm)

    p = subparsers.add_parser("ccdist", parents=[parent], help="Upper bound on the CC distance")
    p.add_argument("--x", required=True)
    p.add_argument("--y", default=None, help="Second point (identity if omitted)")
    p.add_argument("--segments", type=int, default=None)
    p.add_argument("--starts", type=int, default=None)
    p.add_argument("--group", action="store_true")
    p.set_defaults(handler=run_ccdist)

    p = subparsers.add_parser("hausdim", parents=[parent], help="Packing estimate of the Hausdorff dimension")
    p.add_argument("--scales", type=int, default=6, help="Number of geometric scales")
    p.add_argument("--max-scale", type=float, default=0.24)
    p.add_argument("--min-scale", type=float, default=0.03)
    p.add_argument("--ladder", default=None, help="Explicit comma separated scales")
    p.set_defaults(handler=run_hausdim)

    p = subparsers.add_parser("factorize", parents=[parent], help="Word factorization into generators")
    p.add_argument("--x", required=True)
    p.add_argument("--group", action="store_true")
    p.set_defaults(handler=run_factorize)
