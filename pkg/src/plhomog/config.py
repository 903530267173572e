"""Run configuration: INI-style config files, validation that collects every
violation, and the reproducibility manifest emitted next to run outputs."""

from __future__ import annotations

import configparser
import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import coeffs
from .oned import RHS_CATALOG, Problem1D, QuadratureSpec, Rhs1D

PERIODIC_CATALOG = ("constant", "cosine", "laminate", "tabulated")
DEFECT_CATALOG = ("none", "exponential", "gaussian")
FORMATS = ("csv", "json")


class ConfigError(Exception):
    """Invalid configuration; carries every violation, not just the first."""

    def __init__(self, violations: list[tuple[str, str]]):
        self.violations = violations
        lines = "; ".join(f"{fieldname}: {reason}" for fieldname, reason in violations)
        super().__init__(f"invalid configuration: {lines}")


@dataclass
class RunConfig:
    periodic_name: str
    periodic_params: tuple[float, ...]
    defect_name: str
    defect_params: tuple[float, ...]
    lam: float
    dim: int
    p: float
    rhs_name: str
    rhs_params: tuple[float, ...]
    grid_file: str | None = None
    cells_per_period: int = 64
    quad_order: int = 8
    cell_grid: int = 256
    cell_grid_2d: int = 64
    tol: float = 1e-9
    max_iter: int = 500
    half_width: float = 20.0
    defect_cells_per_unit: int = 64
    seed: int = 0
    out_format: str = "csv"
    precision: int = 6
    raw: dict = field(default_factory=dict, repr=False)

    def content_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()


def _params(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(tok) for tok in text.replace(",", " ").split())


def parse_config(path) -> RunConfig:
    """Parse and validate a config file, collecting all violations."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError([("file", f"cannot read config file {path}")])
    violations: list[tuple[str, str]] = []

    def get(section, key, default=None, required=False):
        if parser.has_option(section, key):
            return parser.get(section, key)
        if required:
            violations.append((f"{section}.{key}", "missing required field"))
        return default

    if not parser.has_section("coefficient"):
        violations.append(("coefficient", "missing coefficient block"))
    periodic_name = (get("coefficient", "periodic", required=True) or "").strip() \
        if parser.has_section("coefficient") else ""
    defect_name = (get("coefficient", "defect", "none") or "none").strip() \
        if parser.has_section("coefficient") else "none"

    def number(section, key, default, required=False, cast=float):
        text = get(section, key, None, required)
        if text is None:
            return default
        try:
            return cast(float(text)) if cast is int else cast(text)
        except ValueError:
            violations.append((f"{section}.{key}", f"not a number: {text!r}"))
            return default

    lam = number("coefficient", "lambda", 0.0, required=parser.has_section("coefficient"))
    dim = number("coefficient", "dim", 1, cast=int)
    p = number("problem", "p", 0.0, required=True)
    rhs_name = (get("problem", "rhs", "zero") or "zero").strip()

    cfg = RunConfig(
        periodic_name=periodic_name,
        periodic_params=_params(get("coefficient", "periodic_params", "") or ""),
        defect_name=defect_name,
        defect_params=_params(get("coefficient", "defect_params", "") or ""),
        lam=lam, dim=dim, p=p, rhs_name=rhs_name,
        rhs_params=_params(get("problem", "rhs_params", "") or ""),
        grid_file=get("coefficient", "grid_file"),
        cells_per_period=number("solver", "cells_per_period", 64, cast=int),
        quad_order=number("solver", "quad_order", 8, cast=int),
        cell_grid=number("solver", "cell_grid", 256, cast=int),
        cell_grid_2d=number("solver", "cell_grid_2d", 64, cast=int),
        tol=number("solver", "tol", 1e-9),
        max_iter=number("solver", "max_iter", 500, cast=int),
        half_width=number("solver", "half_width", 20.0),
        defect_cells_per_unit=number("solver", "defect_cells_per_unit", 64, cast=int),
        seed=number("solver", "seed", 0, cast=int),
        out_format=(get("output", "format", "csv") or "csv").strip(),
        precision=number("output", "precision", 6, cast=int),
        raw={s: dict(parser.items(s)) for s in parser.sections()},
    )

    if cfg.periodic_name and cfg.periodic_name not in PERIODIC_CATALOG:
        violations.append(("coefficient.periodic",
                           f"unknown catalog entry {cfg.periodic_name!r}"))
    if cfg.defect_name not in DEFECT_CATALOG:
        violations.append(("coefficient.defect",
                           f"unknown catalog entry {cfg.defect_name!r}"))
    if cfg.periodic_name == "tabulated" and not cfg.grid_file:
        violations.append(("coefficient.grid_file",
                           "tabulated coefficient requires grid_file"))
    if cfg.rhs_name not in RHS_CATALOG:
        violations.append(("problem.rhs", f"unknown catalog entry {cfg.rhs_name!r}"))
    if parser.has_option("problem", "p") and cfg.p < 2.0:
        violations.append(("problem.p", f"requires p >= 2, got {cfg.p}"))
    if cfg.lam is not None and parser.has_option("coefficient", "lambda") and cfg.lam <= 0:
        violations.append(("coefficient.lambda", "must be positive"))
    if cfg.dim not in (1, 2):
        violations.append(("coefficient.dim", f"must be 1 or 2, got {cfg.dim}"))
    if cfg.tol <= 0:
        violations.append(("solver.tol", "must be positive"))
    if cfg.max_iter < 1:
        violations.append(("solver.max_iter", "must be at least 1"))
    if cfg.half_width <= 0:
        violations.append(("solver.half_width", "must be positive"))
    if cfg.out_format not in FORMATS:
        violations.append(("output.format", f"must be one of {FORMATS}"))
    if cfg.precision < 1:
        violations.append(("output.precision", "must be at least 1"))

    if violations:
        raise ConfigError(violations)
    return cfg


def build_coefficient(cfg: RunConfig) -> coeffs.Coefficient:
    name, params = cfg.periodic_name, cfg.periodic_params
    if name == "constant":
        periodic = coeffs.constant_coefficient(params[0], lam=cfg.lam, dim=cfg.dim)
    elif name == "cosine":
        periodic = coeffs.cosine_coefficient(params[0], params[1], lam=cfg.lam,
                                             dim=cfg.dim)
    elif name == "laminate":
        periodic = coeffs.laminate_coefficient(params[0], params[1], lam=cfg.lam,
                                               dim=cfg.dim)
    elif name == "tabulated":
        periodic = coeffs.read_tabulated(cfg.grid_file, lam=cfg.lam)
    else:
        raise ConfigError([("coefficient.periodic", f"unknown entry {name!r}")])

    defect = None
    if cfg.defect_name == "exponential":
        defect = coeffs.exponential_defect(*cfg.defect_params, dim=cfg.dim)
    elif cfg.defect_name == "gaussian":
        defect = coeffs.gaussian_defect(*cfg.defect_params, dim=cfg.dim)
    return coeffs.Coefficient(periodic, defect, cfg.p)


def build_rhs(cfg: RunConfig) -> Rhs1D:
    return RHS_CATALOG[cfg.rhs_name](cfg.rhs_params)


def build_quadrature(cfg: RunConfig) -> QuadratureSpec:
    return QuadratureSpec(order=cfg.quad_order, cells_per_period=cfg.cells_per_period)


def build_problem(cfg: RunConfig, epsilon: float) -> Problem1D:
    return Problem1D(build_coefficient(cfg), build_rhs(cfg), epsilon, cfg.p,
                     build_quadrature(cfg))


@dataclass
class RunManifest:
    """Provenance record; identical config + seed implies identical payload."""

    config_hash: str
    version: str
    seed: int
    stages: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "config_hash": self.config_hash,
            "version": self.version,
            "seed": self.seed,
            "stages": {k: round(v, 6) for k, v in self.stages.items()},
            "warnings": self.warnings,
        }, sort_keys=True, indent=2)


class StageTimer:
    def __init__(self, manifest: RunManifest, name: str):
        self.manifest = manifest
        self.name = name

    def __enter__(self):
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.manifest.stages[self.name] = time.perf_counter() - self._t0
        return False


def format_number(value, precision: int) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.{precision}g}"


def write_csv(path, columns, rows, precision: int) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(format_number(v, precision) for v in row) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2, default=_json_default)
        fh.write("\n")
