"""Semi-classical (mean-field) runs: the photon mode replaced by a classical <x(t)>.

Molecule driving is done in two stages.  The full (q, x) problem is
propagated first and <x(t)> is recorded after every step; the bare molecule
is then propagated under

    H_M - d(q) [E_L sin(w_L t) - sqrt(2 w_c) E0 <x(t)>]

For cavity driving the classical quadrature of the pumped empty cavity is
known analytically and the molecule feels sqrt(2 w_c) E0 d(q) x_C(t).
The coupling is one-way in both cases: the molecule never acts back on the
classical field.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from . import units
from .eigensolve import relax_ground, vibrational_eigen
from .grids import Grid1D, Grid2D, Wavefunction
from .model import (
    Potential,
    Scenario,
    SystemSpec,
    assemble_potential,
    dipole_value,
    driven_cavity_quadrature,
    morse_energy,
)
from .propagate import (
    PropagationError,
    PropagationSpec,
    Trace,
    potential_frame,
    run_split_operator,
    write_csv,
)


class MeanFieldError(ValueError):
    pass


@dataclass
class QuadratureTrace:
    """<x(t)> sampled on the propagation time grid (one sample per step).

    Values between samples come from a cubic spline: stage 2 needs the field at
    step midpoints, where linear interpolation would be off by (w dt)^2 / 8,
    about 6e-6 relative at the default step.
    """

    times: np.ndarray
    x_expect: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.x_expect = np.asarray(self.x_expect, dtype=float)
        if self.times.shape != self.x_expect.shape or self.times.size < 2:
            raise MeanFieldError("quadrature trace needs matching time and value arrays (>= 2 samples)")
        if np.any(np.diff(self.times) <= 0):
            raise MeanFieldError("quadrature samples must be strictly increasing in time")
        self._spline = CubicSpline(self.times, self.x_expect)

    def __call__(self, t):
        """Spline value; outside the sampled window the end values are held."""
        return self._spline(np.clip(t, self.times[0], self.times[-1]))

    def to_csv(self, path: str | Path, header: list[str] | None = None) -> None:
        rows = zip(self.times / units.FS, self.x_expect)
        write_csv(path, ("time_fs", "x_expect"), rows, header)


@dataclass
class MeanFieldResult:
    trace: Trace  # the mean-field (1D molecular) run
    quadrature: QuadratureTrace
    effective_drive: np.ndarray  # E_eff(t) on quadrature.times; the molecule feels -d(q) E_eff(t)
    quantum: Trace | None = None  # stage-1 full quantum run (molecule driving only)


def _molecule_grid(grid) -> Grid1D:
    if isinstance(grid, Grid2D):
        return grid.q_axis
    if isinstance(grid, Grid1D) and grid.name == "q":
        return grid
    raise MeanFieldError("mean-field runs need the molecular q axis")


def _shifted_ground(spec: SystemSpec, qgrid: Grid1D, field0: float) -> Wavefunction:
    """Ground state of H_M - d(q) field0 on the q grid (FGH, exact on the grid)."""
    d = dipole_value(spec.dipole, qgrid.points)
    vm = morse_energy(spec.morse, qgrid.points)
    eig = vibrational_eigen(qgrid, None, 1, potential=lambda _q: vm - field0 * d, mass=spec.morse.mu)
    return eig.wavefunction(0)


def _stage2(spec: SystemSpec, qgrid: Grid1D, prop: PropagationSpec, field, psi0=None) -> Trace:
    """Propagate the bare molecule under H_M - d(q) field(t), CAP as in `spec`."""
    mol = replace(spec, cavity=None, drive=replace(spec.drive, scenario=Scenario.NONE, amplitude=0.0))
    base = assemble_potential(mol, qgrid)
    pot = Potential(base.static, -dipole_value(spec.dipole, qgrid.points), field)
    if psi0 is None:
        psi0 = _shifted_ground(spec, qgrid, float(field(0.0)))
    return run_split_operator(psi0, mol, prop, pot)


def meanfield_molecule_run(
    spec: SystemSpec,
    prop: PropagationSpec,
    grid: Grid2D,
    psi0: Wavefunction | None = None,
) -> MeanFieldResult:
    """Two-stage mean-field treatment of laser driving through the molecular dipole.

    Stage 1 is the full quantum (q, x) run with the CAP as configured; <x> is
    normalized by the surviving norm.  Stage 2 starts from the ground state of
    the stage-2 Hamiltonian at t = 0, i.e. of H_M + sqrt(2 w_c) E0 d(q) <x(0)>.
    """
    if spec.drive.scenario is not Scenario.MOLECULE or spec.cavity is None:
        raise MeanFieldError("molecule mean-field runs need a molecule-driven cavity system")
    if not isinstance(grid, Grid2D):
        raise MeanFieldError("stage 1 needs a (q, x) grid")
    if psi0 is None:
        psi0 = relax_ground(spec.undriven(), grid).psi
    x = grid.x_axis.points
    dv = psi0.dv
    n = prop.n_steps
    times = psi0.time + prop.dt * np.arange(n + 1)
    xs = np.empty(n + 1)

    def mean_x(psi):
        rho_x = (np.abs(psi) ** 2).sum(axis=0)
        return float(np.dot(rho_x, x) / rho_x.sum())

    xs[0] = mean_x(psi0.amplitudes)

    def record(step, t, psi, x_shift):
        xs[step] = mean_x(psi) + x_shift

    potential = assemble_potential(spec, grid, frame=potential_frame(prop))
    quantum = run_split_operator(psi0, spec, prop, potential, step_callback=record)
    if not np.all(np.isfinite(xs)):
        raise PropagationError("stage 1 produced a non-finite <x>")
    quad = QuadratureTrace(times, xs)

    c = spec.cavity.coupling
    drive = spec.drive

    def field(t):
        return drive.amplitude * math.sin(drive.omega_L * t) - c * float(quad(t))

    q_prop = replace(prop, frame="lab")
    trace = _stage2(spec, grid.q_axis, q_prop, field)
    eff = drive.amplitude * np.sin(drive.omega_L * times) - c * xs
    return MeanFieldResult(trace, quad, eff, quantum)


def meanfield_cavity_run(spec: SystemSpec, prop: PropagationSpec, grid) -> MeanFieldResult:
    """Molecule driven by the analytic classical quadrature of the pumped empty cavity."""
    if spec.drive.scenario is not Scenario.CAVITY or spec.cavity is None:
        raise MeanFieldError("cavity mean-field runs need a cavity-driven system")
    qgrid = _molecule_grid(grid)
    cav, drive = spec.cavity, spec.drive
    c = cav.coupling

    def xc(t):
        return driven_cavity_quadrature(drive.amplitude, cav.omega_c, t, drive.omega_L)

    def field(t):
        return -c * float(xc(t))

    times = prop.dt * np.arange(prop.n_steps + 1)
    quad = QuadratureTrace(times, xc(times))
    trace = _stage2(spec, qgrid, replace(prop, frame="lab"), field)
    return MeanFieldResult(trace, quad, -c * quad.x_expect, None)
