"""Flat ``section.key = value`` experiment configuration.

Every key has a default except ``problem.n`` and ``problem.m``; unknown keys
and malformed values are hard errors naming the offending key.
"""
from __future__ import annotations

import dataclasses
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .functionals import Field
from .io import read_snapshot
from .model import ProblemParams
from .solver import SolverConfig

INITIAL_KINDS = ("constant", "cosine-bump", "parabolic-droplet", "file")


@dataclass
class InitialSpec:
    kind: str = "constant"
    C: float = 1.0
    A: float = 1.0
    r0: float = 1.0
    center: str = "0"  # a number, or "random" for a seeded placement
    path: str = ""
    perturb: float = 0.0
    perturb_mode: int = 1


@dataclass
class RunOptions:
    seed: int = 0
    output_dir: str = "out"


@dataclass
class SimulateOptions:
    mode: str = "segment"  # or "global"
    tol_ineq: float = 0.05
    severity: str = "error"  # "warn" keeps exit status 0 on inequality violations
    snapshots: int = 5
    eps_interp: float = 0.1


@dataclass
class DispersionOptions:
    hbar: float = 1.0
    amplitude: float = 1e-6
    modes: str = ""  # comma-separated mode numbers; empty selects automatically
    t_end: float = 2.0
    fit_tol: float = 1e-3


@dataclass
class SpreadingOptions:
    t_a: float = 100.0
    t_b: float = 1000.0
    allow_a1: bool = False
    min_samples: int = 10


@dataclass
class RegimeOptions:
    n_min: str = ""
    n_max: str = ""
    n_step: str = "1"
    m_min: str = ""
    m_max: str = ""
    m_step: str = "1"


@dataclass
class CertifyOptions:
    force: bool = False
    tol_ineq: float = 0.05
    h1_factor: float = 1000.0
    eps_interp: float = 0.1


_PROBLEM_KEYS = {"n": str, "m": str, "a0": float, "a1": float, "a": float, "Nx": int}
_SECTIONS = {
    "initial": InitialSpec,
    "run": RunOptions,
    "simulate": SimulateOptions,
    "dispersion": DispersionOptions,
    "spreading": SpreadingOptions,
    "regime": RegimeOptions,
    "certify": CertifyOptions,
    "solver": SolverConfig,
}


@dataclass
class ExperimentConfig:
    problem: ProblemParams
    solver: SolverConfig
    initial: InitialSpec = field(default_factory=InitialSpec)
    run: RunOptions = field(default_factory=RunOptions)
    simulate: SimulateOptions = field(default_factory=SimulateOptions)
    dispersion: DispersionOptions = field(default_factory=DispersionOptions)
    spreading: SpreadingOptions = field(default_factory=SpreadingOptions)
    regime: RegimeOptions = field(default_factory=RegimeOptions)
    certify: CertifyOptions = field(default_factory=CertifyOptions)
    source: str = ""

    @property
    def seed(self) -> int:
        return self.run.seed

    @property
    def output_dir(self) -> str:
        return self.run.output_dir


def _convert(key: str, raw: str, typ):
    raw = raw.strip()
    origin = typing.get_origin(typ)
    if origin is typing.Union or (origin is not None and type(None) in typing.get_args(typ)):
        args = [a for a in typing.get_args(typ) if a is not type(None)]
        if raw.lower() in ("none", ""):
            return None
        typ = args[0]
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {typ.__name__}") from None


def _field_types(cls) -> dict:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls) if f.init}


def parse_config_text(text: str, source: str = "<string>") -> ExperimentConfig:
    values: dict[str, dict[str, typing.Any]] = {"problem": {}}
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key}")
        seen.add(key)
        if "." not in key:
            raise ConfigError(f"{source}:{lineno}: key {key!r} needs a section prefix")
        section, name = key.split(".", 1)
        if section == "problem":
            if name not in _PROBLEM_KEYS:
                raise ConfigError(f"unknown key {key}")
            values["problem"][name] = _convert(key, raw, _PROBLEM_KEYS[name])
            continue
        if section not in _SECTIONS:
            raise ConfigError(f"unknown key {key}")
        types = _field_types(_SECTIONS[section])
        if name not in types:
            raise ConfigError(f"unknown key {key}")
        values.setdefault(section, {})[name] = _convert(key, raw, types[name])

    for req in ("n", "m"):
        if req not in values["problem"]:
            raise ConfigError(f"missing required key problem.{req}")
    try:
        problem = ProblemParams(**values["problem"])
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"problem: {exc}") from None
    built = {}
    for section, cls in _SECTIONS.items():
        try:
            built[section] = cls(**values.get(section, {}))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{section}: {exc}") from None
    cfg = ExperimentConfig(problem=problem, source=source, **built)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig):
    if cfg.initial.kind not in INITIAL_KINDS:
        raise ConfigError(f"initial.kind must be one of {', '.join(INITIAL_KINDS)}")
    if cfg.simulate.mode not in ("segment", "global"):
        raise ConfigError("simulate.mode must be 'segment' or 'global'")
    if cfg.simulate.severity not in ("error", "warn"):
        raise ConfigError("simulate.severity must be 'error' or 'warn'")
    if cfg.initial.kind == "file" and not cfg.initial.path:
        raise ConfigError("initial.path is required for initial.kind = file")
    if cfg.initial.r0 <= 0:
        raise ConfigError("initial.r0 must be positive")
    if cfg.spreading.t_b <= cfg.spreading.t_a:
        raise ConfigError("spreading.t_b must exceed spreading.t_a")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, str(path))


def resolve_center(cfg: ExperimentConfig) -> float:
    raw = cfg.initial.center.strip().lower()
    p = cfg.problem
    if raw == "random":
        rng = np.random.default_rng(cfg.seed)
        half = max(0.0, 0.5 * p.a - cfg.initial.r0)
        return float(rng.uniform(-half, half))
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"initial.center: cannot read {raw!r}") from None


def build_initial(cfg: ExperimentConfig) -> Field:
    """Unlifted initial datum on the problem grid."""
    p = cfg.problem
    spec = cfg.initial
    x = p.grid()
    if spec.kind == "constant":
        h = np.full_like(x, spec.C)
    elif spec.kind == "cosine-bump":
        u = (x - resolve_center(cfg)) / spec.r0
        h = np.where(np.abs(u) < 1, spec.A * (1.0 + np.cos(math.pi * u)), 0.0)
    elif spec.kind == "parabolic-droplet":
        u = (x - resolve_center(cfg)) / spec.r0
        h = spec.A * np.clip(1.0 - u * u, 0.0, None)
    else:
        path = Path(spec.path)
        if not path.is_absolute() and cfg.source and cfg.source != "<string>":
            path = Path(cfg.source).parent / path
        try:
            _, xs, h = read_snapshot(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"initial.path: {exc}") from None
        if h.size != p.Nx:
            raise ConfigError(f"initial.path: {h.size} values but problem.Nx = {p.Nx}")
    if spec.perturb:
        h = h + spec.perturb * np.cos(math.pi * spec.perturb_mode * x / p.a)
    if np.any(h < 0):
        raise ConfigError("initial data must be nonnegative")
    return Field.on_grid(h, p)
