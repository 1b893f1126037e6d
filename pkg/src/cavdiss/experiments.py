"""Driving energies, dissociation maps, threshold contours and activation times.

Drive strengths are compared through the driving energy E_D = sqrt(<H_L^2>):

* molecule driving: E_D = sqrt(<d^2>/2) E_L, with <d^2> the boxed average
  of the dipole over the propagation window;
* cavity driving: E_D = F0 sqrt(w_c xbar2) where
  xbar2 = (1 / 2 w_c) [1 + (F0^2 / t_f) I(w_c, t_f)] and
  I = int_0^t_f t^2 cos^2(w_c t) dt.

I has the antiderivative (a = 2 w_c)

    t^3/6 + (1/2) [ (t^2/a) sin(a t) + (2 t/a^2) cos(a t) - (2/a^3) sin(a t) ]

which is what :func:`cavity_time_integral` evaluates.
"""
from __future__ import annotations

import enum
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import integrate

from . import __version__, units
from .eigensolve import relax_ground, transition_dipole, vibrational_eigen
from .grids import Grid1D, Grid2D
from .model import (
    DIPOLE_INTERVAL,
    CapSpec,
    CavityParams,
    DipoleParams,
    DriveSpec,
    Flavor,
    Scenario,
    SystemSpec,
    default_dipole,
    default_morse,
    dipole_mean_square,
    static_displacement,
)
from .propagate import (
    P_DISS_FLOOR,
    PropagationSpec,
    Trace,
    dissociation_probability,
    load_trace,
    propagate,
    save_trace,
    write_csv,
)

log = logging.getLogger(__name__)

WORKERS_ENV = "CAVDISS_WORKERS"
T_FINAL_MAP = 1500.0 * units.FS
THRESHOLD_LEVEL = 1e-3


# --- driving energies ---------------------------------------------------------


def driving_energy_molecule(E_L: float, dipole: DipoleParams, interval=DIPOLE_INTERVAL) -> float:
    if E_L < 0:
        raise ValueError("E_L must be non-negative")
    return math.sqrt(0.5 * dipole_mean_square(dipole, interval)) * E_L


def field_for_molecule_energy(E_D: float, dipole: DipoleParams, interval=DIPOLE_INTERVAL) -> float:
    if E_D < 0:
        raise ValueError("E_D must be non-negative")
    return E_D / math.sqrt(0.5 * dipole_mean_square(dipole, interval))


def cavity_time_integral(omega_c: float, t_f: float) -> float:
    """Closed form of int_0^t_f t^2 cos^2(w_c t) dt."""
    a = 2.0 * omega_c
    s, c = math.sin(a * t_f), math.cos(a * t_f)
    osc = (t_f**2 / a) * s + (2.0 * t_f / a**2) * c - (2.0 / a**3) * s
    return t_f**3 / 6.0 + 0.5 * osc


def cavity_time_integral_quadrature(omega_c: float, t_f: float) -> float:
    """Adaptive quadrature of the same integral, one panel per half period."""
    half = math.pi / omega_c
    edges = np.append(np.arange(0.0, t_f, half), t_f)
    f = lambda t: t * t * math.cos(omega_c * t) ** 2  # noqa: E731
    return math.fsum(
        integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-13, limit=200)[0] for a, b in zip(edges[:-1], edges[1:])
    )


def driving_energy_cavity(F0: float, omega_c: float, t_f: float = T_FINAL_MAP) -> float:
    if F0 < 0 or not t_f > 0:
        raise ValueError("need F0 >= 0 and t_f > 0")
    k = cavity_time_integral(omega_c, t_f) / t_f
    return F0 * math.sqrt(0.5 * (1.0 + F0**2 * k))


def field_for_cavity_energy(E_D: float, omega_c: float, t_f: float = T_FINAL_MAP) -> float:
    """Inverse of :func:`driving_energy_cavity` (positive root of a quadratic in F0^2)."""
    if E_D < 0:
        raise ValueError("E_D must be non-negative")
    k = cavity_time_integral(omega_c, t_f) / t_f
    u = 4.0 * E_D**2 / (1.0 + math.sqrt(1.0 + 8.0 * k * E_D**2))
    return math.sqrt(u)


# --- system assembly ----------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    q_min: float = 2.1
    q_max: float = 12.0
    n_q: int = 384
    x_half_width: float = 300.0  # comoving frame: holds the quantum spread only
    n_x: int = 256

    def q_grid(self) -> Grid1D:
        return Grid1D(self.q_min, self.q_max, self.n_q, "q")

    def build(self, spec: SystemSpec):
        """q grid for free space, (q, x) grid otherwise; x is centred on the static shift."""
        if spec.cavity is None:
            return self.q_grid()
        x = Grid1D.centered(static_displacement(spec), self.x_half_width, self.n_x, "x")
        return Grid2D(self.q_grid(), x)


def molecular_d10(spec_or_morse, dipole: DipoleParams | None = None, grid: GridSpec = GridSpec()) -> float:
    if isinstance(spec_or_morse, SystemSpec):
        morse, dipole = spec_or_morse.morse, spec_or_morse.dipole
    else:
        morse = spec_or_morse
    eig = vibrational_eigen(grid.q_grid(), morse, 2)
    return transition_dipole(eig, 1, 0, dipole)


def base_system(
    grid: GridSpec = GridSpec(),
    flavor: Flavor = Flavor.MULTIPOLAR,
    cap: CapSpec | None = CapSpec(),
    morse=None,
    dipole=None,
    omega_c: float | None = None,
) -> SystemSpec:
    """Undriven, uncoupled (lambda_g = 0) system with the default molecule and a resonant cavity."""
    morse = default_morse() if morse is None else morse
    dipole = default_dipole(morse.q_e) if dipole is None else dipole
    d10 = molecular_d10(morse, dipole, grid)
    w = morse.fundamental if omega_c is None else omega_c
    drive = DriveSpec(Scenario.NONE, 0.0, morse.fundamental)
    return SystemSpec(morse, dipole, CavityParams(w, 0.0, d10), cap, drive, flavor)


def scenario_system(
    base: SystemSpec, scenario: Scenario | str, e_d: float, lambda_g: float = 0.0, t_f: float = T_FINAL_MAP
) -> SystemSpec:
    """`base` with coupling `lambda_g` and a drive whose driving energy is `e_d` (a.u.)."""
    scenario = Scenario(scenario)
    if scenario is Scenario.FREE_SPACE:
        amp = field_for_molecule_energy(e_d, base.dipole)
        return replace(base, cavity=None, drive=replace(base.drive, scenario=scenario, amplitude=amp))
    spec = base.with_lambda(lambda_g)
    if scenario is Scenario.MOLECULE:
        amp = field_for_molecule_energy(e_d, base.dipole)
    elif scenario is Scenario.CAVITY:
        amp = field_for_cavity_energy(e_d, spec.cavity.omega_c, t_f)
    else:
        amp = 0.0
    return spec.with_drive(scenario, amp)


def run_key(spec: SystemSpec, grid: GridSpec, prop: PropagationSpec) -> str:
    """Hash identifying a run: package version, system, grid and propagation settings."""
    return spec_provenance(spec, grid, prop)["hash"]


def run_system(
    spec: SystemSpec,
    grid: GridSpec = GridSpec(),
    prop: PropagationSpec = PropagationSpec(),
    cache_dir: str | Path | None = None,
) -> Trace:
    """Relax the undriven system on its grid, then propagate it with the drive on.

    With `cache_dir` the trace (without the final state) is stored under its
    run key and reused by later calls with identical inputs.
    """
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"trace-{run_key(spec, grid, prop)}.npz"
        if path.is_file():
            return load_trace(path)
    g = grid.build(spec)
    gs = relax_ground(spec.undriven(), g)
    tr = propagate(gs.psi, spec, prop)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_trace(tr, path)
    return tr


# --- maps -----------------------------------------------------------------------


@dataclass
class DissociationMap:
    scenario: str
    e_d_values: np.ndarray  # aJ
    lambda_values: np.ndarray
    p_diss: np.ndarray  # (len(lambda_values), len(e_d_values)); floor-clamped, NaN for failed cells
    below_floor: np.ndarray  # bool, same shape
    floor: float = P_DISS_FLOOR
    provenance: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)  # "i,j" -> message

    def __post_init__(self):
        self.e_d_values = np.asarray(self.e_d_values, dtype=float)
        self.lambda_values = np.asarray(self.lambda_values, dtype=float)
        self.p_diss = np.asarray(self.p_diss, dtype=float)
        self.below_floor = np.asarray(self.below_floor, dtype=bool)
        shape = (self.lambda_values.size, self.e_d_values.size)
        if self.p_diss.shape != shape or self.below_floor.shape != shape:
            raise ValueError(f"map matrix must have shape {shape}")
        ok = np.isfinite(self.p_diss)
        if np.any((self.p_diss[ok] < 0) | (self.p_diss[ok] > 1)):
            raise ValueError("dissociation probabilities must lie in [0, 1]")

    @property
    def failed(self) -> np.ndarray:
        return ~np.isfinite(self.p_diss)

    def row(self, lambda_g: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.lambda_values - lambda_g)))
        if not math.isclose(self.lambda_values[i], lambda_g, rel_tol=1e-12, abs_tol=1e-15):
            raise KeyError(f"lambda_g = {lambda_g} not in map")
        return self.p_diss[i]

    def to_json(self, path: str | Path | None = None) -> str:
        doc = {
            "scenario": self.scenario,
            "floor": self.floor,
            "lambda_g": self.lambda_values.tolist(),
            "E_D_aJ": self.e_d_values.tolist(),
            "P_diss": [[None if not math.isfinite(v) else float(v) for v in r] for r in self.p_diss],
            "below_floor": self.below_floor.tolist(),
            "errors": self.errors,
            "provenance": self.provenance,
        }
        text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, text: str) -> "DissociationMap":
        doc = json.loads(text)
        p = np.array([[np.nan if v is None else v for v in r] for r in doc["P_diss"]], dtype=float)
        return cls(
            doc["scenario"],
            doc["E_D_aJ"],
            doc["lambda_g"],
            p,
            doc["below_floor"],
            doc["floor"],
            doc["provenance"],
            doc["errors"],
        )

    def to_csv(self, path: str | Path, header: list[str] | None = None) -> None:
        rows = (
            (lam, e, self.p_diss[i, j])
            for i, lam in enumerate(self.lambda_values)
            for j, e in enumerate(self.e_d_values)
        )
        write_csv(path, ("lambda_g", "E_D_aJ", "P_diss"), rows, header)


@dataclass
class ThresholdContour:
    level: float
    points: list[tuple[float, float]]  # (lambda_g, E_D in aJ)
    missing: dict[float, str] = field(default_factory=dict)  # lambda_g -> "below" | "above" | "failed"

    def threshold(self, lambda_g: float) -> float | None:
        for lam, e in self.points:
            if math.isclose(lam, lambda_g, rel_tol=1e-12, abs_tol=1e-15):
                return e
        return None

    def to_csv(self, path: str | Path, header: list[str] | None = None) -> None:
        write_csv(path, ("lambda_g", "E_D_aJ"), self.points, header)


def _row_crossing(e: np.ndarray, p: np.ndarray, level: float):
    if np.any(~np.isfinite(p)):
        return None, "failed"
    above = np.flatnonzero(p >= level)
    if above.size == 0:
        return None, "below"
    k = int(above[0])
    if k == 0:
        return None, "above"
    l1, l2 = math.log(p[k - 1]), math.log(p[k])
    frac = (math.log(level) - l1) / (l2 - l1)
    return float(e[k - 1] + frac * (e[k] - e[k - 1])), None


def threshold_contour(dmap: DissociationMap, level: float = THRESHOLD_LEVEL) -> ThresholdContour:
    """First crossing of `level` along each lambda_g row, log-linear in P_diss.

    Rows that never reach the level, start above it, or contain failed cells
    are listed in ``missing``.
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    pts, missing = [], {}
    for i, lam in enumerate(dmap.lambda_values):
        e, why = _row_crossing(dmap.e_d_values, dmap.p_diss[i], level)
        if e is None:
            missing[float(lam)] = why
        else:
            pts.append((float(lam), e))
    return ThresholdContour(level, pts, missing)


def activation_time(
    trace: Trace, reference: Trace, factor: float = 10.0, floor: float = P_DISS_FLOOR
) -> float | None:
    """Earliest sample time where P_diss >= factor * max(P_diss_ref, floor); None if never."""
    if trace.times.shape != reference.times.shape or not np.allclose(
        trace.times, reference.times, rtol=0, atol=1e-9 * max(1.0, float(trace.times[-1]))
    ):
        raise ValueError("activation time needs traces sampled at the same times")
    hit = np.flatnonzero(trace.p_diss >= factor * np.maximum(reference.p_diss, floor))
    return float(trace.times[hit[0]]) if hit.size else None


# --- sweep ----------------------------------------------------------------------


@dataclass(frozen=True)
class CellResult:
    index: tuple[int, int]
    p_diss: float
    error: str | None = None


def _run_cell(args) -> CellResult:
    index, scenario, e_d_aj, lam, base, grid, prop, cache_dir = args
    try:
        spec = scenario_system(base, scenario, e_d_aj * units.AJ, lam, prop.t_final)
        tr = run_system(spec, grid, prop, cache_dir)
        p = float(tr.p_diss[-1])
        if not math.isfinite(p):
            raise RuntimeError("non-finite dissociation probability")
        return CellResult(index, p)
    except Exception as exc:  # recorded per cell, the sweep carries on
        return CellResult(index, math.nan, f"{type(exc).__name__}: {exc}")


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None or raw == "":
        return default
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be >= 1")
    return n


def spec_provenance(base: SystemSpec, grid: GridSpec, prop: PropagationSpec) -> dict:
    def clean(obj):
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [clean(v) for v in obj]
        if isinstance(obj, enum.Enum):
            return obj.value
        return obj

    doc = {
        "version": __version__,
        "system": clean(asdict(base)),
        "grid": asdict(grid),
        "propagation": asdict(prop),
    }
    doc["hash"] = hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]
    return doc


def sweep(
    scenario: Scenario | str,
    e_d_list,
    lambda_list,
    base: SystemSpec | None = None,
    prop: PropagationSpec = PropagationSpec(t_final=T_FINAL_MAP),
    grid: GridSpec = GridSpec(),
    workers: int | None = None,
    cache_dir: str | Path | None = None,
) -> DissociationMap:
    """P_diss(t_final) on the (lambda_g, E_D) lattice; E_D values in aJ.

    Cells run independently (in `workers` processes when > 1) and are
    assembled in lattice order, so the map does not depend on the worker
    count.  `cache_dir` is handed to :func:`run_system` for every cell.
    """
    scenario = Scenario(scenario)
    if scenario not in (Scenario.MOLECULE, Scenario.CAVITY):
        raise ValueError("maps are defined for molecule or cavity driving")
    e_d = np.asarray(e_d_list, dtype=float)
    lams = np.asarray(lambda_list, dtype=float)
    for name, arr in (("E_D", e_d), ("lambda_g", lams)):
        if arr.size == 0 or np.any(np.diff(arr) <= 0):
            raise ValueError(f"{name} list must be non-empty and strictly ascending")
    base = base_system(grid) if base is None else base
    tasks = [
        ((i, j), scenario, float(e), float(lam), base, grid, prop, cache_dir)
        for i, lam in enumerate(lams)
        for j, e in enumerate(e_d)
    ]
    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, tasks))
    else:
        results = [_run_cell(t) for t in tasks]

    p = np.full((lams.size, e_d.size), np.nan)
    errors = {}
    for r in sorted(results, key=lambda r: r.index):
        p[r.index] = r.p_diss
        if r.error:
            errors[f"{r.index[0]},{r.index[1]}"] = r.error
            log.warning("cell lambda_g=%g E_D=%g aJ failed: %s", lams[r.index[0]], e_d[r.index[1]], r.error)
    below = np.isfinite(p) & (p < P_DISS_FLOOR)
    p = np.where(below, P_DISS_FLOOR, p)
    return DissociationMap(
        scenario.value, e_d, lams, p, below, P_DISS_FLOOR, spec_provenance(base, grid, prop), errors
    )
