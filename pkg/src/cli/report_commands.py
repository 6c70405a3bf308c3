"""report: run the invariant suite and write the pass/fail table"""

from pathlib import Path

from src.cli.common import Run
from src.services.acceptance import CHECKS, format_table, run_suite, write_report


def run_report(args, run: Run) -> int:
    if args.ids is None:
        ids = list(CHECKS)
    else:
        ids = [v.strip() for v in args.ids.split(",") if v.strip()]
    checks = run_suite(ids, seed=run.seed)
    out_dir = run.out_dir or Path(".")
    run.outputs.extend(str(p) for p in write_report(checks, out_dir))
    print(format_table(checks))
    return 0 if all(c.passed for c in checks) else 3


def register(subparsers, parent) -> None:
    p = subparsers.add_parser("report", parents=[parent], help="Run the invariant suite")
    p.add_argument("--ids", default=None, help=f"Comma separated subset of {', '.join(CHECKS)}")
    p.set_defaults(handler=run_report)
