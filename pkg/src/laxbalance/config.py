"""Run configuration from TOML or JSON files and CLI overrides."""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .flux import FluxModel
from .functional import Problem, Tolerances
from .piecewise import PiecewisePolynomial
from .presets import PRESETS, preset
from .source import SourceModel


class ConfigError(ValueError):
    pass


@dataclass
class Grids:
    table_n: int = 1024
    cells: int = 400
    levels: int = 1
    t: float | None = None
    oracle_cells: int = 800


@dataclass
class TraceParams:
    x0: float = 0.5
    t0: float = 0.5
    t1: float | None = None
    dt: float = 0.01
    method: str = "euler"


@dataclass
class CheckParams:
    names: tuple = ("bln", "entropy")
    samples: int = 50
    bumps: int = 10


@dataclass
class RunConfig:
    preset: str | None = None
    problem: dict | None = None
    grids: Grids = field(default_factory=Grids)
    tolerances: Tolerances = field(default_factory=Tolerances)
    trace: TraceParams = field(default_factory=TraceParams)
    checks: CheckParams = field(default_factory=CheckParams)
    out: str = "out"
    seed: int = 0
    t_max: float | None = None
    x_max: float | None = None

    def __post_init__(self):
        if (self.preset is None) == (self.problem is None):
            raise ConfigError("give exactly one of 'preset' or a [problem] table")
        if self.preset is not None and self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from {', '.join(PRESETS)}")
        for name in ("table_n", "cells", "levels", "oracle_cells"):
            if getattr(self.grids, name) < 1:
                raise ConfigError(f"grids.{name} must be positive")
        for name in ("t_max", "x_max"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive")
        if self.trace.dt <= 0:
            raise ConfigError("trace.dt must be positive")
        bad = set(self.checks.names) - set(CHECK_NAMES)
        if bad:
            raise ConfigError(f"unknown checks {sorted(bad)}; choose from {', '.join(CHECK_NAMES)}")

    def build_problem(self) -> Problem:
        try:
            if self.preset is not None:
                return preset(self.preset, self.t_max, self.x_max, self.tolerances)
            spec = self.problem
            t_max = float(self.t_max or spec["t_max"])
            x_max = float(self.x_max or spec["x_max"])
            flux = FluxModel.from_config(spec.get("flux", {"family": "shifted_quadratic", "a": 1.0, "c": 0.0}))
            source = SourceModel.from_config(spec.get("alpha", {"kind": "constant", "value": 0.0}), t_max)
            u0 = PiecewisePolynomial.from_config(spec.get("u0", 0.0))
            ub = PiecewisePolynomial.from_config(spec.get("ub", 0.0))
            return Problem(flux, source, u0, ub, x_max, spec.get("name", "custom"), self.tolerances)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid problem specification: {exc}") from exc

    def as_dict(self) -> dict:
        d = asdict(self)
        d["checks"]["names"] = list(self.checks.names)
        return d


CHECK_NAMES = ("bln", "entropy", "monotone", "dpp", "weak", "nip")


def _section(cls, data: dict | None, where: str):
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown keys in [{where}]: {sorted(extra)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from exc


def from_mapping(data: dict) -> RunConfig:
    data = dict(data)
    allowed = {"preset", "problem", "grids", "tolerances", "trace", "checks", "out", "seed", "t_max", "x_max"}
    extra = set(data) - allowed
    if extra:
        raise ConfigError(f"unknown top-level keys: {sorted(extra)}")
    checks = dict(data.get("checks") or {})
    if "names" in checks:
        checks["names"] = tuple(checks["names"])
    try:
        return RunConfig(
            preset=data.get("preset"),
            problem=data.get("problem"),
            grids=_section(Grids, data.get("grids"), "grids"),
            tolerances=_section(Tolerances, data.get("tolerances"), "tolerances"),
            trace=_section(TraceParams, data.get("trace"), "trace"),
            checks=_section(CheckParams, checks, "checks"),
            out=str(data.get("out", "out")),
            seed=int(data.get("seed", 0)),
            t_max=data.get("t_max"),
            x_max=data.get("x_max"),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text.decode("utf-8"))
        else:
            data = tomllib.loads(text.decode("utf-8"))
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table")
    return from_mapping(data)


def with_overrides(cfg: RunConfig, **kw) -> RunConfig:
    """Apply CLI overrides; ``None`` values are ignored."""
    top = {k: v for k, v in kw.items() if v is not None and k in ("preset", "out", "t_max", "x_max", "seed")}
    grids = {k: v for k, v in kw.items() if v is not None and k in {f.name for f in fields(Grids)}}
    checks = kw.get("checks")
    if "preset" in top:
        top["problem"] = None
    return replace(cfg, grids=replace(cfg.grids, **grids),
                   checks=replace(cfg.checks, names=tuple(checks)) if checks else cfg.checks, **top)
