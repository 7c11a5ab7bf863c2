"""JSON run configuration with exact rational numbers and schema checks."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

from .approx import DEFAULT_GRID_SIZE, DEFAULT_P_VALUES, Target
from .errors import ConfigError
from .polybasis import DEFAULT_PRECISION_BITS, KernelFamily, KernelSpec, as_rational
from .sequences import ProviderKind, ScatteredProvider
from .solvers import MAX_PRECISION_BITS

logger = logging.getLogger(__name__)

PRECISION_ENV = "SCATTER_PRECISION_BITS"

# a rational may be written as a JSON number or as a "p/q" string
RATIONAL = (int, Fraction, str)


class SectionSchema:
    """Required fields, types, ranges and choices for one config section."""

    def __init__(self, name: str, required=(), types: dict = None, ranges: dict = None,
                 choices: dict = None):
        self.name = name
        self.required_parameters = list(required)
        self.parameter_types = types or {}
        self.parameter_ranges = ranges or {}
        self.parameter_choices = choices or {}

    def path(self, param: str) -> str:
        return f"{self.name}.{param}" if self.name else param

    def validate_parameters(self, params: dict) -> Tuple[bool, str]:
        """Validate a section against the schema"""
        if not isinstance(params, dict):
            return False, f"{self.name or 'config'}: expected an object"

        for param in self.required_parameters:
            if param not in params:
                return False, f"Missing required parameter: {self.path(param)}"

        for param, value in params.items():
            if param not in self.parameter_types:
                return False, f"Unknown parameter: {self.path(param)}"
            expected = self.parameter_types[param]
            if isinstance(value, bool) and bool not in _as_tuple(expected):
                return False, f"Invalid type for parameter {self.path(param)}: booleans are not allowed"
            if not isinstance(value, expected):
                names = "/".join(t.__name__ for t in _as_tuple(expected))
                return False, f"Invalid type for parameter {self.path(param)}: expected {names}"
            if expected is RATIONAL or expected == RATIONAL:
                try:
                    as_rational(value)
                except (ValueError, ZeroDivisionError):
                    return False, f"Parameter {self.path(param)} is not a rational number: {value!r}"

        for param, (min_val, max_val) in self.parameter_ranges.items():
            if param not in params:
                continue
            value = params[param]
            if isinstance(value, (str, Fraction, int)):
                value = as_rational(value)
            if (min_val is not None and value < min_val) or (max_val is not None and value > max_val):
                low = "-inf" if min_val is None else min_val
                high = "inf" if max_val is None else max_val
                return False, f"Parameter {self.path(param)} out of range: {low} <= {value} <= {high}"

        for param, allowed in self.parameter_choices.items():
            if param in params and params[param] not in allowed:
                return False, f"Parameter {self.path(param)} must be one of {', '.join(allowed)}"

        return True, "Parameters valid"

    def check(self, params: dict) -> dict:
        is_valid, message = self.validate_parameters(params)
        if not is_valid:
            raise ConfigError(message, stage="config")
        return params


def _as_tuple(expected) -> tuple:
    return expected if isinstance(expected, tuple) else (expected,)


TOP_LEVEL = SectionSchema(
    "",
    required=["kernel"],
    types={
        "kernel": dict, "provider": dict, "target": dict, "interval": list,
        "epsilon": RATIONAL, "grid": int, "precision_bits": int, "p": list, "output": dict,
    },
    ranges={
        "epsilon": (Fraction(0), None),
        "grid": (2, 10 ** 6),
        "precision_bits": (53, MAX_PRECISION_BITS),
    },
)

KERNEL = SectionSchema(
    "kernel",
    required=["family"],
    types={"family": str, "q": int, "r": RATIONAL, "c": RATIONAL, "L": int},
    ranges={"q": (1, 64), "L": (1, 64), "c": (Fraction(0), None)},
    choices={"family": [family.value for family in KernelFamily]},
)

PROVIDER = SectionSchema(
    "provider",
    required=["kind"],
    types={
        "kind": str, "delta": RATIONAL, "jitter": RATIONAL, "seed": int,
        "step": RATIONAL, "offset": RATIONAL, "list": list, "extension": RATIONAL,
    },
    ranges={"jitter": (Fraction(0), Fraction(1, 3)), "seed": (0, None), "delta": (Fraction(0), None)},
    choices={"kind": [kind.value for kind in ProviderKind]},
)

TARGET = SectionSchema(
    "target",
    types={"builtin": str, "polynomial": list, "samples": dict},
    choices={"builtin": ["sin", "cos", "exp", "abs", "runge"]},
)

SAMPLES = SectionSchema("target.samples", required=["x", "y"], types={"x": list, "y": list})

OUTPUT = SectionSchema(
    "output",
    types={"certificate": str, "samples": str, "solution": str, "expansion": str},
)


@dataclass
class RunConfig:
    """Validated run configuration."""

    kernel: KernelSpec
    provider: Optional[ScatteredProvider] = None
    target: Optional[Target] = None
    interval: Tuple[Fraction, Fraction] = (Fraction(-1), Fraction(1))
    epsilon: Optional[Fraction] = None
    grid: int = DEFAULT_GRID_SIZE
    precision_bits: int = DEFAULT_PRECISION_BITS
    p: Tuple[float, ...] = DEFAULT_P_VALUES
    output: Dict[str, str] = field(default_factory=dict)

    def require(self, *sections: str) -> "RunConfig":
        """Raise ConfigError unless the named optional sections are present"""
        for section in sections:
            if getattr(self, section) is None:
                raise ConfigError(f"Missing required parameter: {section}", stage="config")
        return self


def default_precision_bits() -> int:
    """Precision from SCATTER_PRECISION_BITS, else the library default"""
    raw = os.environ.get(PRECISION_ENV)
    if raw is None or not raw.strip():
        return DEFAULT_PRECISION_BITS
    try:
        bits = int(raw)
    except ValueError:
        raise ConfigError(f"{PRECISION_ENV} must be an integer, got {raw!r}", stage="config")
    if not 53 <= bits <= MAX_PRECISION_BITS:
        raise ConfigError(f"{PRECISION_ENV} out of range: 53 <= {bits} <= {MAX_PRECISION_BITS}", stage="config")
    return bits


def _rational_list(values: list, path: str) -> list:
    result = []
    for i, value in enumerate(values):
        if isinstance(value, bool) or not isinstance(value, RATIONAL):
            raise ConfigError(f"Invalid type for parameter {path}[{i}]: expected a rational", stage="config")
        try:
            result.append(as_rational(value))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"Parameter {path}[{i}] is not a rational number: {value!r}", stage="config")
    return result


def _build_kernel(section: dict) -> KernelSpec:
    KERNEL.check(section)
    options = {key: section[key] for key in ("q", "r", "c", "L") if key in section}
    try:
        return KernelSpec(section["family"], **options)
    except ConfigError as error:
        error.stage = "config"
        raise


def _build_provider(section: dict) -> ScatteredProvider:
    PROVIDER.check(section)
    kind = ProviderKind(section["kind"])
    delta = section.get("delta")
    try:
        if kind is ProviderKind.EXPLICIT:
            if "list" not in section:
                raise ConfigError("Missing required parameter: provider.list", stage="config")
            nodes = _rational_list(section["list"], "provider.list")
            return ScatteredProvider.explicit(nodes, delta=delta, period=section.get("extension"))
        if kind is ProviderKind.JITTERED:
            return ScatteredProvider(kind, delta=delta, jitter=section.get("jitter", 0),
                                     seed=section.get("seed", 0))
        if kind is ProviderKind.AFFINE:
            return ScatteredProvider(kind, delta=delta, step=section.get("step", 1),
                                     offset=section.get("offset", 0))
        return ScatteredProvider(kind, delta=delta)
    except ValueError as error:
        raise ConfigError(f"provider: {error}", stage="config")


def _build_target(section: dict) -> Target:
    TARGET.check(section)
    if len(section) != 1:
        raise ConfigError("target needs exactly one of builtin, polynomial, samples", stage="config")
    if "builtin" in section:
        return Target.builtin(section["builtin"])
    if "polynomial" in section:
        return Target.from_polynomial(_rational_list(section["polynomial"], "target.polynomial"))
    samples = SAMPLES.check(section["samples"])
    xs = _rational_list(samples["x"], "target.samples.x")
    ys = _rational_list(samples["y"], "target.samples.y")
    try:
        return Target.from_samples([float(v) for v in xs], [float(v) for v in ys])
    except ValueError as error:
        raise ConfigError(f"target.samples: {error}", stage="config")


def parse_config(document: Union[str, dict]) -> RunConfig:
    """Validate a JSON document (text or already-decoded) into a RunConfig"""
    if isinstance(document, str):
        try:
            document = json.loads(document, parse_float=Fraction)
        except json.JSONDecodeError as error:
            raise ConfigError(
                f"invalid JSON at line {error.lineno}, column {error.colno}: {error.msg}",
                stage="config",
            )
    TOP_LEVEL.check(document)

    config = RunConfig(kernel=_build_kernel(document["kernel"]))
    if "provider" in document:
        config.provider = _build_provider(document["provider"])
    if "target" in document:
        config.target = _build_target(document["target"])
    if "interval" in document:
        bounds = _rational_list(document["interval"], "interval")
        if len(bounds) != 2 or not bounds[0] < bounds[1]:
            raise ConfigError("interval must be [a, b] with a < b", stage="config")
        config.interval = (bounds[0], bounds[1])
    if "epsilon" in document:
        config.epsilon = as_rational(document["epsilon"])
        if config.epsilon <= 0:
            raise ConfigError("Parameter epsilon must be positive", stage="config")
    config.grid = document.get("grid", DEFAULT_GRID_SIZE)
    config.precision_bits = document.get("precision_bits", default_precision_bits())
    if "p" in document:
        p_values = _rational_list(document["p"], "p")
        if not p_values or any(p < 1 for p in p_values):
            raise ConfigError("Parameter p must be a non-empty list of values >= 1", stage="config")
        config.p = tuple(float(p) for p in p_values)
    if "output" in document:
        config.output = dict(OUTPUT.check(document["output"]))
    return config


def load_config(path: Union[str, Path]) -> RunConfig:
    """Read and validate a config file"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as error:
        raise ConfigError(f"cannot read config {path}: {error.strerror}", stage="config")
    logger.debug("loaded config from %s", path)
    return parse_config(text)
