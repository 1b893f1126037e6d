"""TOML run configuration with a strict schema.

Every key lives in one of the sections below, carries its unit in its name
where it has one, and has a default.  Unknown sections or keys are errors.

    [molecule]   omega_10_cm, d0_over_omega_10, mu_amu, q_e, dipole_mean_square,
                 dipole_decay, dipole_origin
    [cavity]     omega_c_cm, lambda_g, flavor
    [cap]        enabled, q_start, strength, order
    [drive]      scenario, e_d_aJ, omega_L_cm
    [grid]       q_min, q_max, n_q, x_half_width, n_x
    [propagation] dt_fs, t_final_fs, record_stride, frame
    [relax]      dt_imag, tolerance, state_tolerance, max_steps
    [sweep]      scenario, e_d_aJ, lambda_g, level, workers
    [output]     directory

``dipole_origin`` and ``omega_c_cm`` accept the string "auto" (q_e and the
molecular fundamental, respectively).
"""
from __future__ import annotations

import hashlib
import math
import re
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import tomli
import tomli_w

from . import units
from .experiments import GridSpec, molecular_d10, scenario_system
from .model import (
    CapSpec,
    CavityParams,
    DriveSpec,
    Flavor,
    ModelError,
    Scenario,
    SystemSpec,
    calibrate_dipole,
    default_morse,
)
from .propagate import FRAMES, PropagationSpec


class ConfigError(Exception):
    """Base class for configuration problems."""


class ConfigNotFoundError(ConfigError):
    pass


class ConfigParseError(ConfigError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class UnknownKeyError(ConfigError):
    pass


class ConfigValidationError(ConfigError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class MoleculeSection:
    omega_10_cm: float = 1514.9
    d0_over_omega_10: float = 28.0
    mu_amu: float = 8.7247
    q_e: float = 2.9
    dipole_mean_square: float = 0.85
    dipole_decay: float = 1.0
    dipole_origin: float | str = "auto"


@dataclass
class CavitySection:
    omega_c_cm: float | str = "auto"
    lambda_g: float = 0.0
    flavor: str = "multipolar"


@dataclass
class CapSection:
    enabled: bool = True
    q_start: float = CapSpec.q_start
    strength: float = CapSpec.strength
    order: int = CapSpec.order


@dataclass
class DriveSection:
    scenario: str = "none"
    e_d_aJ: float = 0.0
    omega_L_cm: float | str = "auto"


@dataclass
class GridSection:
    q_min: float = GridSpec.q_min
    q_max: float = GridSpec.q_max
    n_q: int = GridSpec.n_q
    x_half_width: float = GridSpec.x_half_width
    n_x: int = GridSpec.n_x


@dataclass
class PropagationSection:
    dt_fs: float = 0.05
    t_final_fs: float = 1500.0
    record_stride: int = 20
    frame: str = "comoving"


@dataclass
class RelaxSection:
    dt_imag: float = 0.5
    tolerance: float = 1e-12
    state_tolerance: float = 1e-10
    max_steps: int = 50_000


@dataclass
class SweepSection:
    scenario: str = "molecule"
    e_d_aJ: list = field(default_factory=lambda: [0.01, 0.02, 0.03, 0.045, 0.06, 0.08])
    lambda_g: list = field(default_factory=lambda: [0.005, 0.0125, 0.025, 0.0375, 0.05])
    level: float = 1e-3
    workers: int = 1  # $CAVDISS_WORKERS, then --workers, take precedence


@dataclass
class OutputSection:
    directory: str = "out"


SECTIONS = {
    "molecule": MoleculeSection,
    "cavity": CavitySection,
    "cap": CapSection,
    "drive": DriveSection,
    "grid": GridSection,
    "propagation": PropagationSection,
    "relax": RelaxSection,
    "sweep": SweepSection,
    "output": OutputSection,
}


@dataclass
class RunConfig:
    molecule: MoleculeSection = field(default_factory=MoleculeSection)
    cavity: CavitySection = field(default_factory=CavitySection)
    cap: CapSection = field(default_factory=CapSection)
    drive: DriveSection = field(default_factory=DriveSection)
    grid: GridSection = field(default_factory=GridSection)
    propagation: PropagationSection = field(default_factory=PropagationSection)
    relax: RelaxSection = field(default_factory=RelaxSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    output: OutputSection = field(default_factory=OutputSection)

    # --- serialization ---

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def digest(self) -> str:
        """Hash of everything that can change results (the worker count cannot)."""
        doc = self.to_dict()
        doc["sweep"].pop("workers")
        return hashlib.sha256(tomli_w.dumps(doc).encode()).hexdigest()[:16]

    # --- physics objects ---

    def system(self) -> SystemSpec:
        m = self.molecule
        morse = default_morse(
            units.to_au(m.omega_10_cm, "cm-1"), m.d0_over_omega_10, units.to_au(m.mu_amu, "amu"), m.q_e
        )
        origin = m.q_e if m.dipole_origin == "auto" else float(m.dipole_origin)
        dipole = calibrate_dipole(m.dipole_decay, m.dipole_mean_square, origin=origin)
        d10 = molecular_d10(morse, dipole, self.grid_spec())
        c = self.cavity
        w_c = morse.fundamental if c.omega_c_cm == "auto" else units.to_au(c.omega_c_cm, "cm-1")
        w_l = morse.fundamental if self.drive.omega_L_cm == "auto" else units.to_au(self.drive.omega_L_cm, "cm-1")
        cap = None
        if self.cap.enabled:
            cap = CapSpec(self.cap.q_start, self.cap.strength, self.cap.order)
        base = SystemSpec(
            morse,
            dipole,
            CavityParams(w_c, 0.0, d10),
            cap,
            DriveSpec(Scenario.NONE, 0.0, w_l),
            Flavor(c.flavor),
        )
        return scenario_system(
            base, self.drive.scenario, units.to_au(self.drive.e_d_aJ, "aJ"), c.lambda_g, self.propagation_spec().t_final
        )

    def grid_spec(self) -> GridSpec:
        g = self.grid
        return GridSpec(g.q_min, g.q_max, g.n_q, g.x_half_width, g.n_x)

    def propagation_spec(self) -> PropagationSpec:
        p = self.propagation
        return PropagationSpec(
            units.to_au(p.dt_fs, "fs"), units.to_au(p.t_final_fs, "fs"), p.record_stride, p.frame
        )

    def relax_options(self) -> dict:
        return asdict(self.relax)


_TYPE_CHECKS = {
    "float": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
    "int": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "bool": lambda v: isinstance(v, bool),
    "str": lambda v: isinstance(v, str),
    "list": lambda v: isinstance(v, list),
    "float | str": lambda v: isinstance(v, str) or (isinstance(v, (int, float)) and not isinstance(v, bool)),
}


def _coerce(section: str, name: str, ftype: str, value):
    if not _TYPE_CHECKS[ftype](value):
        raise ConfigValidationError(f"{section}.{name}", f"expected {ftype}, got {type(value).__name__}")
    if ftype == "float":
        return float(value)
    if ftype == "float | str" and isinstance(value, str) and value != "auto":
        raise ConfigValidationError(f"{section}.{name}", f"expected a number or 'auto', got {value!r}")
    if ftype == "list":
        if not all(_TYPE_CHECKS["float"](v) for v in value):
            raise ConfigValidationError(f"{section}.{name}", "expected a list of numbers")
        return [float(v) for v in value]
    return value


def from_dict(doc: dict) -> RunConfig:
    cfg = RunConfig()
    for sname, body in doc.items():
        if sname not in SECTIONS:
            raise UnknownKeyError(f"unknown section [{sname}]; known: {', '.join(SECTIONS)}")
        if not isinstance(body, dict):
            raise ConfigValidationError(sname, "expected a table")
        sec = getattr(cfg, sname)
        known = {f.name: f.type for f in fields(sec)}
        for key, value in body.items():
            if key not in known:
                raise UnknownKeyError(f"unknown key {sname}.{key}; known: {', '.join(known)}")
            setattr(sec, key, _coerce(sname, key, known[key], value))
    validate(cfg)
    return cfg


def _check(cond: bool, name: str, message: str):
    if not cond:
        raise ConfigValidationError(name, message)


def validate(cfg: RunConfig) -> None:
    m, c, d, g, p, r, s = cfg.molecule, cfg.cavity, cfg.drive, cfg.grid, cfg.propagation, cfg.relax, cfg.sweep
    for name, v in [
        ("molecule.omega_10_cm", m.omega_10_cm),
        ("molecule.d0_over_omega_10", m.d0_over_omega_10),
        ("molecule.mu_amu", m.mu_amu),
        ("molecule.q_e", m.q_e),
        ("molecule.dipole_decay", m.dipole_decay),
        ("propagation.dt_fs", p.dt_fs),
        ("propagation.t_final_fs", p.t_final_fs),
        ("relax.dt_imag", r.dt_imag),
        ("relax.tolerance", r.tolerance),
        ("relax.state_tolerance", r.state_tolerance),
    ]:
        _check(math.isfinite(v) and v > 0, name, f"must be positive, got {v}")
    _check(m.dipole_mean_square >= 0, "molecule.dipole_mean_square", "must be non-negative")
    _check(c.lambda_g >= 0, "cavity.lambda_g", f"must be non-negative, got {c.lambda_g}")
    _check(c.flavor in [f.value for f in Flavor], "cavity.flavor", f"unknown flavor {c.flavor!r}")
    for name, v in [("cavity.omega_c_cm", c.omega_c_cm), ("drive.omega_L_cm", d.omega_L_cm)]:
        _check(v == "auto" or v > 0, name, "must be positive or 'auto'")
    _check(cfg.cap.strength >= 0, "cap.strength", "must be non-negative")
    _check(cfg.cap.order >= 2, "cap.order", "must be an integer >= 2")
    _check(d.scenario in [x.value for x in Scenario], "drive.scenario", f"unknown scenario {d.scenario!r}")
    _check(d.e_d_aJ >= 0, "drive.e_d_aJ", "must be non-negative")
    _check(g.q_max > g.q_min, "grid.q_max", "must exceed grid.q_min")
    _check(g.n_q >= 8, "grid.n_q", "must be >= 8")
    _check(g.n_x >= 8, "grid.n_x", "must be >= 8")
    _check(g.x_half_width > 0, "grid.x_half_width", "must be positive")
    _check(p.t_final_fs >= p.dt_fs, "propagation.t_final_fs", "must be at least one time step")
    _check(p.record_stride >= 1, "propagation.record_stride", "must be >= 1")
    _check(p.frame in FRAMES, "propagation.frame", f"must be one of {FRAMES}")
    _check(r.max_steps >= 1, "relax.max_steps", "must be >= 1")
    _check(s.scenario in ("molecule", "cavity"), "sweep.scenario", "must be 'molecule' or 'cavity'")
    for name, vals in (("sweep.e_d_aJ", s.e_d_aJ), ("sweep.lambda_g", s.lambda_g)):
        _check(len(vals) > 0, name, "must not be empty")
        _check(all(b > a for a, b in zip(vals, vals[1:])), name, "must be strictly ascending")
        _check(all(v >= 0 for v in vals), name, "must be non-negative")
    _check(0 < s.level < 1, "sweep.level", "must lie in (0, 1)")
    _check(s.workers >= 1, "sweep.workers", "must be >= 1")
    try:
        cfg.system()
    except (ModelError, ValueError) as exc:
        raise ConfigValidationError("model", str(exc)) from exc


_LINE_RE = re.compile(r"line (\d+)")


def loads(text: str) -> RunConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = _LINE_RE.search(str(exc))
        raise ConfigParseError(str(exc), int(m.group(1)) if m else None) from exc
    return from_dict(doc)


def parse_config(path: str | Path | None) -> RunConfig:
    if path is None:
        cfg = RunConfig()
        validate(cfg)
        return cfg
    path = Path(path)
    if not path.is_file():
        raise ConfigNotFoundError(f"config file not found: {path}")
    return loads(path.read_text())


def with_overrides(cfg: RunConfig, **sections) -> RunConfig:
    """Copy of `cfg` with selected keys replaced, e.g. ``cavity={"lambda_g": 0.02}``."""
    doc = cfg.to_dict()
    for sname, body in sections.items():
        doc.setdefault(sname, {}).update(body)
    return from_dict(doc)
