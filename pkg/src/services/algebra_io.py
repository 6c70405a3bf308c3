"""Algebra spec files with keys dim, brackets, generators, name.

TOML, YAML and JSON are read; YAML and JSON are written.
"""

import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Union

import yaml

from src.exceptions import InputError
from src.models import LieAlgebraSpec

logger = logging.getLogger(__name__)


def _coefficient(value: Any) -> float:
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            raise InputError(f"Cannot parse coefficient {value!r}")
    return float(value)


def spec_from_dict(data: Dict[str, Any]) -> LieAlgebraSpec:
    try:
        brackets = [
            (int(i), int(j), int(k), _coefficient(c)) for i, j, k, c in data.get("brackets", [])
        ]
        return LieAlgebraSpec(
            name=data.get("name"),
            dim=int(data["dim"]),
            brackets=brackets,
            generators=[int(g) for g in data["generators"]],
        )
    except KeyError as e:
        raise InputError(f"Algebra spec missing key {e}")
    except (TypeError, ValueError) as e:
        raise InputError(f"Malformed algebra spec: {e}")


def load_algebra(path: Union[str, Path]) -> LieAlgebraSpec:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    suffix = path.suffix.lower()
    try:
        if suffix == ".toml":
            data = tomllib.loads(text)
        elif suffix in (".yaml", ".yml"):
            data = yaml.safe_load(text)
        elif suffix == ".json":
            data = json.loads(text)
        else:
            raise InputError(f"Unsupported algebra file type '{suffix}'")
    except (tomllib.TOMLDecodeError, yaml.YAMLError, json.JSONDecodeError) as e:
        raise InputError(f"Cannot parse {path}: {e}")
    spec = spec_from_dict(data)
    if spec.name is None:
        spec = spec.model_copy(update={"name": path.stem})
    logger.info(f"Loaded algebra {spec.name} (dim {spec.dim}) from {path}")
    return spec


def spec_to_dict(spec: LieAlgebraSpec) -> Dict[str, Any]:
    """Coefficients become repr strings so the float round-trips bit-exactly"""
    return {
        "name": spec.name,
        "dim": spec.dim,
        "generators": list(spec.generators),
        "brackets": [[i, j, k, repr(float(c))] for i, j, k, c in spec.brackets],
    }


def save_algebra(spec: LieAlgebraSpec, path: Union[str, Path]) -> Path:
    path = Path(path)
    data = spec_to_dict(spec)
    suffix = path.suffix.lower()
    if suffix in (".yaml", ".yml"):
        text = yaml.safe_dump(data, sort_keys=False)
    elif suffix == ".json":
        text = json.dumps(data, indent=2)
    else:
        raise InputError(f"Cannot write algebra files of type '{suffix}', use .yaml or .json")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info(f"Saved algebra {spec.name} to {path}")
    return path
