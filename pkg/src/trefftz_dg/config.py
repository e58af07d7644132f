"""
Run configuration files.

A configuration is a UTF-8 text file of ``key = value`` lines with ``#``
comments, dotted keys (``flux.alpha = 1.0``) and comma-separated lists::

    case = hom2d_hat
    method = method1
    p = 2
    levels = 1, 2, 3
    tensor.lambda1 = 0.5616   # rho = 2
"""

import configparser
import logging
import re
from dataclasses import dataclass, field

import numpy as np

from trefftz_dg.assembly import DEFAULT_PATCH_SIZE, LOCAL_MODES, OVERLAPPING, FluxParameters
from trefftz_dg.cases import CASES
from trefftz_dg.errors import ConfigError
from trefftz_dg.io import read_text
from trefftz_dg.mesh import BOUNDARY_MODES

log = logging.getLogger(__name__)

SECTION = "run"
METHODS = ("method1", "method2", "combined")
STEP_RULES = ("dyadic",)


@dataclass(frozen=True)
class RunConfig:
    case: str
    method: str = "method1"
    p: int = 1
    q: int | None = None
    mode: str = OVERLAPPING
    local_size: int = DEFAULT_PATCH_SIZE
    local_enlargement: float = 1.0
    lambda1: tuple[float, ...] = (1.0,)
    lambda2: float = 1.0
    lambda3: float = 1.0
    a: float = float(1 / np.sqrt(2))
    b: float = float(1 / np.sqrt(2))
    random_tensor: bool = False
    max_rho: float = 100.0
    boundary: str | None = None
    levels: tuple[int, ...] = (1, 2, 3)
    level: int | None = None
    steps_rule: str = "dyadic"
    flux: FluxParameters = field(default_factory=FluxParameters)
    quadrature_order: int | None = None
    output: str | None = None
    seed: int = 42
    samples: int = 20

    def __post_init__(self):
        if self.case not in CASES:
            raise ConfigError(f"unknown case '{self.case}', expected one of {sorted(CASES)}", "case")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method '{self.method}', expected one of {METHODS}", "method")
        if self.p < 0:
            raise ConfigError(f"degree must be >= 0, got {self.p}", "p")
        if self.method == "combined":
            if self.q is None:
                raise ConfigError("the combined method needs a local degree", "q")
            if self.q < 0:
                raise ConfigError(f"local degree must be >= 0, got {self.q}", "q")
        if self.mode not in LOCAL_MODES:
            raise ConfigError(f"unknown mode '{self.mode}', expected one of {LOCAL_MODES}", "mode")
        if self.local_size < 1 or self.local_size % 2 == 0:
            raise ConfigError(
                f"local patch size must be a positive odd number of cells, got {self.local_size}",
                "local.size",
            )
        if self.local_enlargement < 1.0:
            raise ConfigError(
                f"fictitious box enlargement must be >= 1, got {self.local_enlargement}",
                "local.enlargement",
            )
        if not self.lambda1 or any(value <= 0 for value in self.lambda1):
            raise ConfigError(f"lambda1 values must be positive, got {self.lambda1}", "tensor.lambda1")
        if self.boundary is not None and self.boundary not in BOUNDARY_MODES:
            raise ConfigError(
                f"unknown boundary mode '{self.boundary}', expected one of {BOUNDARY_MODES}", "boundary"
            )
        if not self.levels or any(level < 0 for level in self.levels):
            raise ConfigError(f"levels must be non-negative, got {self.levels}", "levels")
        if list(self.levels) != sorted(set(self.levels)):
            raise ConfigError(f"levels must be strictly ascending, got {self.levels}", "levels")
        if self.steps_rule not in STEP_RULES:
            raise ConfigError(f"unknown time step rule '{self.steps_rule}'", "time.steps_rule")
        if self.quadrature_order is not None and not 1 <= self.quadrature_order <= 32:
            raise ConfigError(
                f"quadrature order must be in 1..32, got {self.quadrature_order}", "quadrature.order"
            )
        if self.samples < 1:
            raise ConfigError(f"samples must be >= 1, got {self.samples}", "properties.samples")

    @property
    def sweep_level(self) -> int:
        """Level of a rho sweep: ``level`` if given, else the finest of ``levels``."""
        return self.level if self.level is not None else self.levels[-1]

    def n_steps(self, level: int) -> int:
        return 2**level


def _key_lines(text: str) -> dict[str, int]:
    lines = {}
    pattern = re.compile(r"^\s*([^#=\s][^=]*?)\s*=")
    for number, line in enumerate(text.splitlines(), start=1):
        match = pattern.match(line)
        if match:
            lines.setdefault(match.group(1).strip(), number)
    return lines


def _convert(key: str, raw: str, kind, line: int | None):
    try:
        if kind is bool:
            lowered = raw.strip().lower()
            if lowered not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return lowered in ("true", "yes", "1")
        if kind == "int_list":
            return tuple(int(item) for item in raw.split(",") if item.strip())
        if kind == "float_list":
            return tuple(float(item) for item in raw.split(",") if item.strip())
        return kind(raw.strip())
    except ValueError as e:
        raise ConfigError(f"cannot parse '{raw}' as {getattr(kind, '__name__', kind)}", key, line) from e


KEYS = {
    "case": ("case", str),
    "method": ("method", str),
    "p": ("p", int),
    "q": ("q", int),
    "mode": ("mode", str),
    "local.size": ("local_size", int),
    "local.enlargement": ("local_enlargement", float),
    "tensor.lambda1": ("lambda1", "float_list"),
    "tensor.lambda2": ("lambda2", float),
    "tensor.lambda3": ("lambda3", float),
    "tensor.a": ("a", float),
    "tensor.b": ("b", float),
    "tensor.random": ("random_tensor", bool),
    "tensor.max_rho": ("max_rho", float),
    "boundary": ("boundary", str),
    "levels": ("levels", "int_list"),
    "level": ("level", int),
    "time.steps_rule": ("steps_rule", str),
    "quadrature.order": ("quadrature_order", int),
    "output": ("output", str),
    "seed": ("seed", int),
    "properties.samples": ("samples", int),
}
FLUX_KEYS = {"flux.alpha": "alpha", "flux.beta": "beta", "flux.delta": "delta"}


def parse_config(text: str) -> RunConfig:
    """Parse configuration text into a validated RunConfig."""
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#",), comment_prefixes=("#",)
    )
    parser.optionxform = str
    try:
        parser.read_string(f"[{SECTION}]\n{text}")
    except configparser.Error as e:
        line = getattr(e, "lineno", None)
        if line is None and getattr(e, "errors", None):
            line = e.errors[0][0]
        raise ConfigError(str(e).splitlines()[0], line=None if line is None else line - 1) from e

    lines = _key_lines(text)
    values = {}
    flux = {}
    for key, raw in parser[SECTION].items():
        line = lines.get(key)
        if key in FLUX_KEYS:
            flux[FLUX_KEYS[key]] = _convert(key, raw, float, line)
        elif key in KEYS:
            name, kind = KEYS[key]
            values[name] = _convert(key, raw, kind, line)
        else:
            raise ConfigError(f"unknown key '{key}'", key, line)
    if "case" not in values:
        raise ConfigError("missing required key", "case")

    try:
        values["flux"] = FluxParameters(**flux)
    except ValueError as e:
        name = next((name for name in ("alpha", "beta") if name in str(e)), "alpha")
        key = f"flux.{name}"
        raise ConfigError(str(e), key, lines.get(key)) from e
    try:
        return RunConfig(**values)
    except ConfigError as e:
        if e.line is None and e.field is not None and e.field in lines:
            raise ConfigError(str(e).split(": ", 1)[-1], e.field, lines[e.field]) from e
        raise


def load_config(path: str) -> RunConfig:
    """Read and validate a configuration file (local path or fsspec URL)."""
    try:
        text = read_text(path)
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot read configuration '{path}': {e}") from e
    config = parse_config(text)
    log.info(f"Loaded configuration {path}: case={config.case}, method={config.method}")
    return config
