"""hlift, symplift, hamflow, hofer-check"""

import numpy as np
import pandas as pd

from config.settings import settings
from src.cli.common import (
    Run,
    curve_frame,
    hamiltonian_from_args,
    hamiltonian_options,
    parse_vector,
    read_curve,
    read_points,
)
from src.exceptions import InputError
from src.models import SampledCurve
from src.services.heisenberg import (
    hamiltonian_flow,
    hofer_lower_bound_check,
    lift_planar_curve,
    lift_symplectomorphism,
    time_one_map,
    vertical_flow_check,
)


def run_hlift(args, run: Run) -> int:
    times, points = read_curve(run.record_input(args.curve))
    lifted = lift_planar_curve(SampledCurve(times=times, points=points), xbar0=args.xbar0)
    frame = curve_frame(lifted.times, lifted.points[:, :-1])
    frame["xbar"] = lifted.points[:, -1]
    run.write_frame("horizontal_lift.csv", frame)
    print(f"vertical endpoint: {lifted.points[-1, -1]:.12g}")
    print(f"area change: {lifted.diagnostics['area_change']:.12g}")
    print(f"quadrature error: {lifted.diagnostics['quadrature_error']:.3e}")
    return 0


def _planar_map(args):
    if args.matrix:
        d = 2 * args.n
        A = parse_vector(args.matrix, d * d, "--matrix").reshape(d, d)
        return lambda X: np.asarray(X, dtype=float) @ A.T
    H = hamiltonian_from_args(args)
    return time_one_map(H, args.time, args.steps)


def run_symplift(args, run: Run) -> int:
    d = 2 * args.n
    phi = _planar_map(args)
    lifted = lift_symplectomorphism(phi, args.n, a=args.a, tolerance=args.tol, seed=run.seed)
    run.tolerances["loop"] = settings.loop_tolerance if args.tol is None else args.tol
    if args.points:
        P = read_points(run.record_input(args.points))
        if P.shape[1] == d:
            P = np.column_stack([P, np.zeros(P.shape[0])])
        if P.shape[1] != d + 1:
            raise InputError(f"Points need {d} or {d + 1} columns")
    else:
        rng = np.random.default_rng(run.seed)
        P = rng.uniform(-1.0, 1.0, size=(args.count, d + 1))
    images = lifted(P)
    dets = np.array([np.linalg.det(lifted.jacobian(p)) for p in P])
    columns = [f"x{i}" for i in range(d)] + ["xbar"]
    frame = pd.DataFrame(np.hstack([P, images]), columns=columns + [f"image_{c}" for c in columns])
    frame["jacobian_det"] = dets
    run.write_frame("symplectic_lift.csv", frame)
    print(f"loop residual: {lifted.loop_residual:.3e}")
    print(f"max |det - 1|: {float(np.max(np.abs(dets - 1.0))):.3e}")
    return 0


def run_hamflow(args, run: Run) -> int:
    H = hamiltonian_from_args(args)
    x0 = parse_vector(args.x0, 2 * args.n, "--x0")
    flow = hamiltonian_flow(H, x0, args.time, args.steps)
    run.write_frame("flow.csv", curve_frame(flow.times, flow.points))
    print(f"endpoint: {','.join(f'{v:.12g}' for v in flow.points[-1])}")
    if "energy_drift" in flow.diagnostics:
        print(f"energy drift: {flow.diagnostics['energy_drift']:.3e}")
    if args.check_vertical:
        residual = vertical_flow_check(H, x0, args.time, args.steps)
        print(f"vertical flow residual: {residual:.3e}")
    return 0


def run_hofer_check(args, run: Run) -> int:
    H = hamiltonian_from_args(args)
    center = parse_vector(args.region_center, 2 * args.n, "--region-center") if args.region_center else None
    check = hofer_lower_bound_check(
        H, center, args.region_radius, samples=args.samples, steps=args.steps, seed=run.seed
    )
    run.write_frame("hofer_check.csv", pd.DataFrame([check.model_dump()]))
    print(f"C * V(phi, A): {check.lhs:.6g}")
    print(f"vol(A) * Hofer length: {check.rhs:.6g}")
    print(f"ball ratio C: {check.ball_ratio:.5f} +- {check.ball_ratio_stderr:.1e}")
    print(f"passed: {check.passed}")
    return 0 if check.passed else 3


def register(subparsers, parent) -> None:
    p = subparsers.add_parser("hlift", parents=[parent], help="Horizontal lift of a planar curve to H(n)")
    p.add_argument("--curve", required=True, help="CSV with column t and 2n coordinate columns")
    p.add_argument("--xbar0", type=float, default=0.0)
    p.set_defaults(handler=run_hlift)

    p = subparsers.add_parser("symplift", parents=[parent], help="Lift a symplectomorphism to H(n)")
    hamiltonian_options(p)
    p.add_argument("--matrix", default=None, help="Row-major 2n x 2n linear map instead of a flow")
    p.add_argument("--time", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--a", type=float, default=0.0, help="Value of F at the base point")
    p.add_argument("--points", default=None, help="CSV of points of H(n) to map")
    p.add_argument("--count", type=int, default=20, help="Random points when --points is absent")
    p.set_defaults(handler=run_symplift)

    p = subparsers.add_parser("hamflow", parents=[parent], help="Hamiltonian trajectory")
    hamiltonian_options(p)
    p.add_argument("--x0", required=True)
    p.add_argument("--time", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--check-vertical", action="store_true", help="Also run the vertical flow check")
    p.set_defaults(handler=run_hamflow)

    p = subparsers.add_parser("hofer-check", parents=[parent], help="Hofer lower bound inequality")
    hamiltonian_options(p)
    p.add_argument("--region-center", default=None)
    p.add_argument("--region-radius", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.set_defaults(handler=run_hofer_check)
