"""Shared plumbing for the subcommands: argument parsing, CSV I/O and the run manifest"""

import argparse
import logging
import time
from importlib import metadata
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from config.settings import settings
from src.exceptions import InputError
from src.models import CarnotStructure, HamiltonianKind, HamiltonianSpec, LieAlgebraSpec, RunManifest, SampledCurve
from src.services.algebra_core import carnot_structure, from_adapted, to_adapted
from src.services.algebra_io import load_algebra, save_algebra
from src.services.catalog import CATALOG, builtin

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def tool_version() -> str:
    try:
        return metadata.version("carnot-kit")
    except metadata.PackageNotFoundError:
        return "0.1.0"


def common_options() -> argparse.ArgumentParser:
    """Flags every subcommand accepts"""
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--algebra", help="Algebra spec file (.toml/.yaml/.json) or built-in name")
    parent.add_argument("--seed", type=int, default=None, help="Random seed (default from settings)")
    parent.add_argument("--tol", type=float, default=None, help="Tolerance override")
    parent.add_argument("--out", type=Path, default=None, help="Output directory for CSV files")
    return parent


def parse_vector(text: str, size: Optional[int] = None, name: str = "vector") -> np.ndarray:
    try:
        values = np.array([float(v) for v in text.replace(" ", "").split(",") if v != ""])
    except ValueError:
        raise InputError(f"Cannot parse {name} '{text}'")
    if size is not None and values.size != size:
        raise InputError(f"{name} needs {size} entries, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise InputError(f"{name} has non-finite entries")
    return values


def format_vector(values) -> str:
    return ",".join(f"{float(v):.17g}" for v in np.ravel(values))


def read_point(text: str, carnot: CarnotStructure, name: str = "point") -> np.ndarray:
    """Point written in the algebra file's basis, returned in adapted coordinates"""
    return to_adapted(carnot, parse_vector(text, carnot.dim, name))


def format_point(carnot: CarnotStructure, x) -> str:
    """Adapted coordinates printed back in the algebra file's basis"""
    return format_vector(from_adapted(carnot, x))


def load_spec(args) -> LieAlgebraSpec:
    if not args.algebra:
        raise InputError("--algebra is required for this subcommand")
    path = Path(args.algebra)
    if path.exists():
        return load_algebra(path)
    if args.algebra in CATALOG:
        return builtin(args.algebra)
    raise InputError(f"No algebra file or built-in named '{args.algebra}'")


def load_carnot(args) -> CarnotStructure:
    return carnot_structure(load_spec(args))


def read_table(path: Path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InputError(f"Cannot read {path}: {e}")
    if frame.empty:
        raise InputError(f"{path} holds no rows")
    non_numeric = [c for c in frame.columns if not pd.api.types.is_numeric_dtype(frame[c])]
    if non_numeric:
        raise InputError(f"{path}: non-numeric columns {non_numeric}")
    return frame


def read_curve(path: Path):
    """(times, points) from a CSV whose column ``t`` holds the parameter"""
    frame = read_table(path)
    if "t" not in frame.columns:
        raise InputError(f"{path}: curve files need a 't' column")
    points = frame.drop(columns=["t"]).to_numpy(dtype=float)
    return frame["t"].to_numpy(dtype=float), points


def read_algebra_curve(path: Path, carnot: CarnotStructure) -> SampledCurve:
    """Curve in the algebra file's basis, returned with adapted coordinates"""
    times, points = read_curve(path)
    if points.shape[1] != carnot.dim:
        raise InputError(f"{path}: curve needs {carnot.dim} coordinate columns, got {points.shape[1]}")
    return SampledCurve(times=times, points=to_adapted(carnot, points))


def read_points(path: Path) -> np.ndarray:
    return read_table(path).to_numpy(dtype=float)


def read_matrix(path: Path) -> np.ndarray:
    """Square distance matrix, no header"""
    try:
        return pd.read_csv(path, header=None).to_numpy(dtype=float)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, ValueError) as e:
        raise InputError(f"Cannot read distance matrix {path}: {e}")


def curve_frame(times, points, prefix: str = "x") -> pd.DataFrame:
    points = np.atleast_2d(points)
    frame = pd.DataFrame(points, columns=[f"{prefix}{i}" for i in range(points.shape[1])])
    frame.insert(0, "t", times)
    return frame


def hamiltonian_from_args(args) -> HamiltonianSpec:
    return HamiltonianSpec(
        kind=HamiltonianKind(args.hamiltonian),
        n=args.n,
        amplitude=args.amplitude,
        support_radius=args.radius,
        center=list(parse_vector(args.center, 2 * args.n, "center")) if args.center else None,
        direction=list(parse_vector(args.direction, 2 * args.n, "direction")) if args.direction else None,
        modulation=args.modulation,
    )


def hamiltonian_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--hamiltonian",
        choices=[k.value for k in HamiltonianKind if k != HamiltonianKind.CUSTOM],
        default=HamiltonianKind.QUADRATIC_BUMP.value,
    )
    parser.add_argument("--n", type=int, default=1, help="H(n): phase space R^{2n}")
    parser.add_argument("--amplitude", type=float, default=1.0)
    parser.add_argument("--radius", type=float, default=1.0, help="Support radius")
    parser.add_argument("--center", default=None, help="Support center, comma separated")
    parser.add_argument("--direction", default=None, help="Gradient of a linear Hamiltonian")
    parser.add_argument("--modulation", type=float, default=0.0, help="Time modulation m in 1 + m sin(2 pi t)")


class Run:
    """One CLI invocation: collects written files and emits the manifest"""

    def __init__(self, subcommand: str, args: argparse.Namespace):
        self.subcommand = subcommand
        self.args = args
        self.out_dir: Optional[Path] = args.out
        self.seed = settings.seed if args.seed is None else args.seed
        self.inputs: List[str] = []
        self.outputs: List[str] = []
        self.tolerances: Dict[str, float] = {}
        self._started = time.perf_counter()

    def record_input(self, path) -> Path:
        path = Path(path)
        self.inputs.append(str(path))
        return path

    def write_frame(self, name: str, frame: pd.DataFrame, index: bool = False) -> Optional[Path]:
        if self.out_dir is None:
            return None
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        frame.to_csv(path, index=index, float_format=FLOAT_FORMAT, lineterminator="\n")
        self.outputs.append(str(path))
        logger.info(f"Wrote {path}")
        return path

    def write_algebra(self, name: str, spec: LieAlgebraSpec) -> Optional[Path]:
        if self.out_dir is None:
            return None
        path = save_algebra(spec, self.out_dir / name)
        self.outputs.append(str(path))
        return path

    def manifest(self) -> RunManifest:
        arguments = {
            k: str(v)
            for k, v in sorted(vars(self.args).items())
            if k not in ("handler", "command") and v is not None
        }
        if getattr(self.args, "algebra", None) and Path(self.args.algebra).exists():
            self.inputs.insert(0, str(self.args.algebra))
        return RunManifest(
            subcommand=self.subcommand,
            inputs=self.inputs,
            arguments=arguments,
            seed=self.seed,
            tolerances=self.tolerances,
            tool_version=tool_version(),
            wall_time=time.perf_counter() - self._started,
            outputs=list(self.outputs),
        )

    def finish(self) -> Optional[Path]:
        if self.out_dir is None:
            return None
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / "manifest.json"
        path.write_text(self.manifest().model_dump_json(indent=2), encoding="utf-8")
        return path


def ladder(text: Optional[str], default: Sequence[float]) -> List[float]:
    if not text:
        return list(default)
    return [float(v) for v in parse_vector(text, name="ladder")]
