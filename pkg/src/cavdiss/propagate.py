"""Real-time split-operator propagation with observables.

One step of length dt is the symmetric (Strang) product

    exp(-i V(t + dt/2) dt/2) exp(-i T dt) exp(-i V(t + dt/2) dt/2)

with V the complex diagonal potential (the CAP contributes the damping
factor exp(-CAP dt/2) to each half).  The wavefunction is therefore
synchronized in coordinate space after every step and observables need no
extra transforms besides the q-kinetic energy.

On a (q, x) grid the default ``frame="comoving"`` carries the wavefunction
in a frame translated by a classical cavity trajectory x0(t), p0(t).  x0
obeys the classical cavity equation driven by the pump (if any) and by the
mean dipole <d>, held constant over each step.  The translation is unitary
and exact for any such trajectory; its only purpose is to keep the coherent
part of the photon displacement off the grid, so the x axis has to hold the
quantum spread alone.  In the frame the potential gains
sqrt(2 w_c) E0 d(q) x0(t) - sqrt(2 w_c) E0 (f - f_0) x, with f the dipole
that drove x0 during the step and f_0 = <d> at the start.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.fft as sfft

from . import units
from .grids import AnyGrid, Wavefunction, grid_axes, volume_element
from .model import (
    Potential,
    SystemSpec,
    assemble_potential,
    dipole_value,
    kinetic_energy,
    morse_energy,
)

P_DISS_FLOOR = 1e-7
NORM_LIMIT = 1.0 + 1e-9

DEFAULT_DT = units.FS / 20.0
DEFAULT_T_FINAL = 1500.0 * units.FS


class PropagationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PropagationSpec:
    dt: float = DEFAULT_DT
    t_final: float = DEFAULT_T_FINAL
    record_stride: int = 20
    frame: str = "comoving"  # only matters on (q, x) grids

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_final >= self.dt:
            raise ValueError("t_final must be at least one time step")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer")
        if self.frame not in FRAMES:
            raise ValueError(f"unknown frame {self.frame!r}")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_final / self.dt)))


FRAMES = ("lab", "displaced", "comoving")

TRACE_COLUMNS = ("time_fs", "norm2", "P_diss", "H_M_over_omega10", "mean_x", "mean_x2", "mean_d")


@dataclass
class Trace:
    times: np.ndarray
    norm2: np.ndarray
    mean_H_M: np.ndarray
    mean_x: np.ndarray
    mean_x2: np.ndarray
    mean_d: np.ndarray
    omega_10: float = float("nan")
    final_state: Wavefunction | None = field(default=None, repr=False)

    @property
    def p_diss(self) -> np.ndarray:
        return 1.0 - self.norm2

    def rows(self):
        for i in range(len(self.times)):
            yield (
                self.times[i] / units.FS,
                self.norm2[i],
                1.0 - self.norm2[i],
                self.mean_H_M[i] / self.omega_10,
                self.mean_x[i],
                self.mean_x2[i],
                self.mean_d[i],
            )

    def to_csv(self, path: str | Path, header: list[str] | None = None) -> None:
        write_csv(path, TRACE_COLUMNS, self.rows(), header)


_TRACE_ARRAYS = ("times", "norm2", "mean_H_M", "mean_x", "mean_x2", "mean_d")


def save_trace(trace: Trace, path: str | Path) -> None:
    """Binary copy of the recorded arrays (not the final state); written atomically."""
    path = Path(path)
    tmp = path.with_name(path.name + ".part")
    with open(tmp, "wb") as fh:
        np.savez(fh, omega_10=trace.omega_10, **{k: getattr(trace, k) for k in _TRACE_ARRAYS})
    tmp.replace(path)


def load_trace(path: str | Path) -> Trace:
    with np.load(path) as z:
        return Trace(**{k: z[k] for k in _TRACE_ARRAYS}, omega_10=float(z["omega_10"]))


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_csv(path, columns, rows, header: list[str] | None = None) -> None:
    with open(path, "w", newline="") as fh:
        for line in header or []:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_trace_csv(path: str | Path) -> Trace:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    data = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
    return Trace(
        times=data[:, 0] * units.FS,
        norm2=data[:, 1],
        mean_H_M=data[:, 3],
        mean_x=data[:, 4],
        mean_x2=data[:, 5],
        mean_d=data[:, 6],
        omega_10=1.0,
    )


class _Observer:
    """Computes the recorded observables from coordinate-space amplitudes."""

    def __init__(self, spec: SystemSpec, grid: AnyGrid, potential: Potential):
        self.axes = grid_axes(grid)
        self.names = tuple(ax.name for ax in self.axes)
        self.dv = volume_element(grid)
        self.potential = potential
        self.has_q = "q" in self.names
        self.has_x = "x" in self.names
        if self.has_q:
            qa = self.axes[0]
            self.mu = spec.morse.mu
            self.vm = morse_energy(spec.morse, qa.points)
            self.tq = 0.5 * qa.momenta**2 / self.mu
            self.d = dipole_value(spec.dipole, qa.points)
            self.nq = qa.n
        if self.has_x:
            self.x = self.axes[-1].points

    def __call__(self, psi: np.ndarray, t: float, extra_shift: float = 0.0):
        rho = np.abs(psi) ** 2
        n2 = float(rho.sum() * self.dv)
        if not math.isfinite(n2) or n2 <= 0:
            return n2, math.nan, math.nan, math.nan, math.nan
        hm = xm = x2 = dm = math.nan
        if self.has_q:
            rho_q = rho.sum(axis=1) if rho.ndim == 2 else rho
            kq = np.abs(sfft.fft(psi, axis=0)) ** 2
            kq = kq.sum(axis=1) if kq.ndim == 2 else kq
            kin = float(np.dot(kq, self.tq)) / self.nq
            hm = (kin + float(np.dot(rho_q, self.vm))) * self.dv / n2
            dm = float(np.dot(rho_q, self.d)) * self.dv / n2
        if self.has_x:
            rho_x = rho.sum(axis=0) if rho.ndim == 2 else rho
            s = self.potential.x_shift(t) if self.potential.x_shift is not None else 0.0
            s += extra_shift
            xs = self.x + s
            xm = float(np.dot(rho_x, xs)) * self.dv / n2
            x2 = float(np.dot(rho_x, xs * xs)) * self.dv / n2
        return n2, hm, xm, x2, dm


class _Comoving:
    """Classical cavity response to the mean dipole, advanced exactly between steps."""

    def __init__(self, spec: SystemSpec, grid, psi: np.ndarray):
        qa, xa = grid_axes(grid)
        cav = spec.cavity
        self.w = cav.omega_c
        self.c = cav.coupling
        self.d = dipole_value(spec.dipole, qa.points)
        self.x = xa.points
        self.x1 = 0.0
        self.p1 = 0.0
        self.f0 = self.mean_d(psi)

    def mean_d(self, psi: np.ndarray) -> float:
        rho_q = np.einsum("ij,ij->i", psi.real, psi.real) + np.einsum("ij,ij->i", psi.imag, psi.imag)
        return float(rho_q @ self.d / rho_q.sum())

    def advance(self, df: float, tau: float) -> None:
        # x1'' = -w^2 x1 - c df with df constant: rotation about the shifted equilibrium
        w = self.w
        x_eq = -self.c * df / w**2
        u = self.x1 - x_eq
        cs, sn = math.cos(w * tau), math.sin(w * tau)
        self.x1 = x_eq + u * cs + self.p1 * sn / w
        self.p1 = -u * w * sn + self.p1 * cs

    def half_phase(self, df: float, dt: float) -> np.ndarray:
        a = np.exp((-0.5j * dt * self.c * self.x1) * self.d)
        b = np.exp((0.5j * dt * self.c * df) * self.x)
        return np.multiply.outer(a, b)


def run_split_operator(
    psi0: Wavefunction,
    spec: SystemSpec,
    prop: PropagationSpec,
    potential: Potential,
    step_callback: Callable[[int, float, np.ndarray, float], None] | None = None,
) -> Trace:
    grid = psi0.grid
    dt = prop.dt
    n_steps = prop.n_steps
    kin = kinetic_energy(grid, spec.morse.mu)
    k_phase = np.exp(-1j * dt * kin)
    v_half = np.exp(-0.5j * dt * potential.static)
    profile = potential.profile
    ndim = psi0.amplitudes.ndim
    observe = _Observer(spec, grid, potential)

    psi = psi0.amplitudes.copy()
    t0 = psi0.time
    rec_t, rec = [], []
    comoving = None
    if prop.frame == "comoving" and observe.has_q and observe.has_x:
        comoving = _Comoving(spec, grid, psi)

    def record(step, t):
        obs = observe(psi, t, comoving.x1 if comoving is not None else 0.0)
        if not all(math.isfinite(v) for v in obs[:1]) or not math.isfinite(obs[0]):
            raise PropagationError(f"non-finite wavefunction at step {step} (t = {t:.6g} a.u.)")
        if obs[0] > NORM_LIMIT:
            raise PropagationError(f"norm {obs[0]!r} exceeds 1 at step {step}: unstable propagation")
        rec_t.append(t)
        rec.append(obs)

    record(0, t0)
    for n in range(n_steps):
        t_mid = t0 + (n + 0.5) * dt
        if profile is not None:
            half = v_half * np.exp((-0.5j * dt * potential.amplitude(t_mid)) * profile)
        else:
            half = v_half
        if comoving is not None:
            df = comoving.mean_d(psi) - comoving.f0
            comoving.advance(df, 0.5 * dt)
            half = half * comoving.half_phase(df, dt)
        psi *= half
        psi = sfft.ifftn(k_phase * sfft.fftn(psi, overwrite_x=True), overwrite_x=True)
        psi *= half
        if comoving is not None:
            comoving.advance(df, 0.5 * dt)
        t = t0 + (n + 1) * dt
        if step_callback is not None:
            shift = potential.x_shift(t) if potential.x_shift is not None else 0.0
            step_callback(n + 1, t, psi, shift + (comoving.x1 if comoving is not None else 0.0))
        if (n + 1) % prop.record_stride == 0 or n + 1 == n_steps:
            record(n + 1, t)

    arr = np.array(rec)
    return Trace(
        times=np.array(rec_t),
        norm2=arr[:, 0],
        mean_H_M=arr[:, 1],
        mean_x=arr[:, 2],
        mean_x2=arr[:, 3],
        mean_d=arr[:, 4],
        omega_10=spec.omega_10,
        final_state=Wavefunction(grid, psi, t0 + n_steps * dt),
    )


def potential_frame(prop: PropagationSpec) -> str:
    """Frame in which to assemble the potential for `prop`.

    The comoving frame starts from the displaced one; the extra classical
    response is added step by step inside the propagator.
    """
    return "displaced" if prop.frame == "comoving" else prop.frame


def propagate(
    psi0: Wavefunction,
    spec: SystemSpec,
    prop: PropagationSpec = PropagationSpec(),
    step_callback: Callable[[int, float, np.ndarray, float], None] | None = None,
) -> Trace:
    """Propagate `psi0` under `spec` and record observables every ``record_stride`` steps.

    The grid of `psi0` selects the problem: (q, x) for the coupled system, q
    alone for the bare molecule, x alone for the empty cavity.  Expectation
    values are normalized by the surviving norm; photon moments are reported
    in the laboratory frame whatever ``prop.frame`` is.
    """
    n0 = psi0.norm2()
    if abs(n0 - 1.0) > 1e-8:
        raise PropagationError(f"initial state is not normalized (norm^2 = {n0!r})")
    potential = assemble_potential(spec, psi0.grid, frame=potential_frame(prop))
    return run_split_operator(psi0, spec, prop, potential, step_callback)


def mean_molecular_energy(psi: Wavefunction, morse, mu: float | None = None) -> float:
    """<H_M> / <psi|psi> with the q kinetic energy applied spectrally."""
    mu = morse.mu if mu is None else mu
    qa = grid_axes(psi.grid)[0]
    if qa.name != "q":
        raise ValueError("wavefunction has no q axis")
    a = psi.amplitudes
    rho = np.abs(a) ** 2
    n2 = rho.sum()
    if n2 == 0:
        raise ValueError("zero wavefunction has no mean energy")
    kq = np.abs(sfft.fft(a, axis=0)) ** 2
    kin = np.sum(kq.T * (0.5 * qa.momenta**2 / mu)) / qa.n
    pot = np.sum(rho.T * morse_energy(morse, qa.points))
    return float((kin + pot) / n2)


def dissociation_probability(trace: Trace, t: float, floor: float = P_DISS_FLOOR) -> float:
    """1 - norm^2 at time t (linear interpolation between samples), clamped at `floor`."""
    times = trace.times
    tol = 1e-9 * max(1.0, abs(times[-1]))
    if t < times[0] - tol or t > times[-1] + tol:
        raise ValueError(f"t = {t} outside the trace [{times[0]}, {times[-1]}]")
    p = float(np.interp(t, times, trace.p_diss))
    return max(p, floor)
