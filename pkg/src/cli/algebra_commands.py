"""validate, filtration, nilpotentize"""

import pandas as pd

from src.cli.common import Run, load_carnot, load_spec
from src.models import LieAlgebraSpec
from src.services.algebra_core import build_filtration, validate_algebra


def run_validate(args, run: Run) -> int:
    spec = load_spec(args)
    report = validate_algebra(spec, tolerance=args.tol)
    run.tolerances["validation"] = report.tolerance
    run.write_frame("validation.csv", pd.DataFrame([report.model_dump()]))
    print(f"algebra: {spec.name}")
    print(f"antisymmetry residual: {report.antisymmetry_residual:.3e}")
    print(f"jacobi residual: {report.jacobi_residual:.3e}")
    print(f"passed: {report.passed}")
    return 0 if report.passed else 2


def run_filtration(args, run: Run) -> int:
    spec = load_spec(args)
    filt = build_filtration(spec)
    carnot = load_carnot(args)
    basis = pd.DataFrame(carnot.graded_basis.T, columns=[f"e{i}" for i in range(spec.dim)])
    basis.insert(0, "grade", carnot.layer_of)
    basis.insert(1, "word", ["".join(str(g) for g in w) for w in carnot.words])
    run.write_frame("graded_basis.csv", basis)
    print(f"filtration dims: {filt.dims}")
    print(f"step: {carnot.step}")
    print(f"layer dims: {carnot.layer_dims}")
    print(f"homogeneous dimension Q: {carnot.homogeneous_dimension}")
    return 0


def run_nilpotentize(args, run: Run) -> int:
    carnot = load_carnot(args)
    table = carnot.nilpotent_table()
    frame = pd.DataFrame(table, columns=["i", "j", "k", "coefficient"])
    run.write_frame("nilpotent_brackets.csv", frame)
    run.write_algebra(
        "nilpotentisation.yaml",
        LieAlgebraSpec(
            name=f"{carnot.name or 'algebra'}_nilpotent",
            dim=carnot.dim,
            brackets=table,
            generators=[int(g) for g in carnot.layer_indices(1)],
        ),
    )
    print(f"nilpotentisation of {carnot.name} (Q={carnot.homogeneous_dimension})")
    for i, j, k, c in table:
        coefficient = "" if abs(c - 1.0) <= 1e-12 else f"{c:.12g} "
        print(f"[X{i + 1},X{j + 1}] = {coefficient}X{k + 1}")
    if not table:
        print("abelian")
    return 0


def register(subparsers, parent) -> None:
    p = subparsers.add_parser("validate", parents=[parent], help="Check antisymmetry and Jacobi")
    p.set_defaults(handler=run_validate)

    p = subparsers.add_parser("filtration", parents=[parent], help="Filtration and adapted basis")
    p.set_defaults(handler=run_filtration)

    p = subparsers.add_parser("nilpotentize", parents=[parent], help="Nilpotent bracket table")
    p.set_defaults(handler=run_nilpotentize)
