"""Vibrational eigenstates (dense Fourier-grid Hamiltonian) and polariton ground states.

The 1D kinetic matrix is built from the same periodic FFT representation the
propagator uses, so eigenvectors here are stationary states of the real-time
kinetic step to machine precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft

from .grids import AnyGrid, Grid1D, Grid2D, Wavefunction, coordinates, grid_axes
from .model import (
    DipoleParams,
    Flavor,
    MorseParams,
    Scenario,
    SystemSpec,
    assemble_potential,
    dipole_value,
    kinetic_energy,
    morse_energy,
)


class EigenError(RuntimeError):
    pass


class RelaxationError(RuntimeError):
    pass


@dataclass
class EigenSet:
    grid: Grid1D
    energies: np.ndarray
    states: np.ndarray  # shape (count, n); real, sum(phi^2) * dq = 1

    def wavefunction(self, k: int) -> Wavefunction:
        return Wavefunction(self.grid, self.states[k].astype(complex))

    def __len__(self):
        return len(self.energies)


def fourier_kinetic_matrix(grid: Grid1D, mass: float) -> np.ndarray:
    """Dense matrix of p^2/2m in the periodic Fourier-grid representation."""
    t = 0.5 * grid.momenta**2 / mass
    eye = np.eye(grid.n)
    return sfft.ifft(t[:, None] * sfft.fft(eye, axis=0), axis=0).real


def _fix_sign(phi: np.ndarray) -> np.ndarray:
    # positive on the outermost lobe (the one nearest the dissociation side)
    big = np.flatnonzero(np.abs(phi) > 0.1 * np.abs(phi).max())
    return phi if phi[big[-1]] > 0 else -phi


def vibrational_eigen(
    grid: Grid1D,
    morse: MorseParams | None,
    count: int,
    potential=None,
    mass: float | None = None,
) -> EigenSet:
    """Lowest `count` eigenpairs of -(1/2 mu) d^2/dq^2 + V(q) on `grid`.

    `potential` (callable of q) replaces the Morse curve, e.g. for harmonic
    checks or effective potentials; `mass` then defaults to ``morse.mu``.
    """
    if mass is None:
        if morse is None:
            raise EigenError("a mass is needed when no Morse parameters are given")
        mass = morse.mu
    if potential is None:
        if morse is None:
            raise EigenError("need Morse parameters or an explicit potential")
        if count > morse.n_bound:
            raise EigenError(f"requested {count} states but the Morse curve binds {morse.n_bound}")
        potential = lambda q: morse_energy(morse, q)  # noqa: E731
    if not 1 <= count <= grid.n:
        raise EigenError(f"invalid state count {count} for a {grid.n}-point grid")

    q = grid.points
    h = fourier_kinetic_matrix(grid, mass) + np.diag(potential(q))
    try:
        energies, vecs = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise EigenError(f"diagonalization failed: {exc}") from exc
    energies = energies[:count]
    states = vecs[:, :count].T / math.sqrt(grid.spacing)
    states = np.array([_fix_sign(s) for s in states])

    # the top requested state must vanish at the box edges and below Nyquist
    top = states[-1]
    edge = max(abs(top[0]), abs(top[-1])) / np.abs(top).max()
    spec = np.abs(sfft.fft(top)) ** 2
    hi = np.abs(grid.momenta) > 0.8 * grid.p_max
    if edge > 1e-4 or spec[hi].sum() > 1e-8 * spec.sum():
        raise EigenError(
            f"grid does not resolve state {count - 1} (edge ratio {edge:.1e}); enlarge or refine the grid"
        )
    return EigenSet(grid, energies, states)


def transition_dipole(eig: EigenSet, i: int, j: int, dipole: DipoleParams) -> float:
    n = len(eig)
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"state index out of range: ({i}, {j}) with {n} states")
    d = dipole_value(dipole, eig.grid.points)
    return float(np.sum(eig.states[i] * d * eig.states[j]) * eig.grid.spacing)


def eigen_residuals(eig: EigenSet, morse: MorseParams) -> np.ndarray:
    """|| H phi - E phi || for each state (grid norm)."""
    h = fourier_kinetic_matrix(eig.grid, morse.mu) + np.diag(morse_energy(morse, eig.grid.points))
    r = h @ eig.states.T - eig.states.T * eig.energies[None, :]
    return np.sqrt(np.sum(r**2, axis=0) * eig.grid.spacing)


# --- imaginary-time relaxation ----------------------------------------------


@dataclass
class GroundState:
    psi: Wavefunction
    energy: float
    energies: list[float] = field(default_factory=list)
    steps: int = 0


def energy_expectation(psi: np.ndarray, kinetic: np.ndarray, potential: np.ndarray, dv: float) -> float:
    """<psi|T + V|psi> / <psi|psi> for real `potential`."""
    rho = np.abs(psi) ** 2
    n2 = rho.sum()
    t = np.sum(np.abs(sfft.fftn(psi)) ** 2 * kinetic) / psi.size
    return float((t + np.sum(rho * potential)) / n2)


def _initial_guess(spec: SystemSpec, grid: AnyGrid) -> np.ndarray:
    axes = grid_axes(grid)
    morse = spec.morse
    if axes[0].name != "q":
        raise RelaxationError("relaxation grids must start with the q axis")
    cav = spec.cavity if len(axes) == 2 else None
    q = axes[0].points
    d = dipole_value(spec.dipole, q)
    veff = morse_energy(morse, q)
    if cav is not None:
        if spec.flavor is not Flavor.PAULI_FIERZ:
            veff = veff - cav.dse_prefactor * d**2
    phi = vibrational_eigen(axes[0], None, 1, potential=lambda _q: veff, mass=morse.mu).states[0]
    if cav is None:
        return phi.astype(complex)
    x = axes[1].points[None, :]
    w = cav.omega_c
    x_eq = (-cav.coupling * d / w**2)[:, None]
    chi = (w / math.pi) ** 0.25 * np.exp(-0.5 * w * (x - x_eq) ** 2)
    return (phi[:, None] * chi).astype(complex)


def relax_ground(
    spec: SystemSpec,
    grid: AnyGrid,
    dt_imag: float = 0.5,
    tolerance: float = 1e-12,
    state_tolerance: float = 1e-10,
    max_steps: int = 50_000,
    initial: np.ndarray | None = None,
) -> GroundState:
    """Ground state by imaginary-time split-operator relaxation.

    Each step applies exp(-V dtau/2) exp(-T dtau) exp(-V dtau/2) and
    renormalizes.  Stops when the energy changes by less than `tolerance`
    and the state by less than `state_tolerance` (grid 2-norm) in one step.
    """
    if spec.drive.scenario is not Scenario.NONE and spec.drive.amplitude != 0:
        raise RelaxationError("relaxation needs an undriven system")
    if spec.cap is not None:
        raise RelaxationError("relaxation needs the CAP switched off")
    pot = assemble_potential(spec, grid)
    v = pot.static.real
    kin = kinetic_energy(grid, spec.morse.mu)
    half_v = np.exp(-0.5 * dt_imag * v)
    full_t = np.exp(-dt_imag * kin)
    dv = float(np.prod([ax.spacing for ax in grid_axes(grid)]))

    psi = _initial_guess(spec, grid) if initial is None else np.array(initial, dtype=complex)
    psi /= math.sqrt(np.vdot(psi, psi).real * dv)
    energies = [energy_expectation(psi, kin, v, dv)]
    for step in range(1, max_steps + 1):
        new = half_v * sfft.ifftn(full_t * sfft.fftn(half_v * psi))
        new /= math.sqrt(np.vdot(new, new).real * dv)
        energies.append(energy_expectation(new, kin, v, dv))
        change = math.sqrt(np.vdot(new - psi, new - psi).real * dv)
        psi = new
        if abs(energies[-1] - energies[-2]) < tolerance and change < state_tolerance:
            # fix the arbitrary global sign: real and positive at the density maximum
            k = np.argmax(np.abs(psi))
            psi *= np.conj(psi.flat[k]) / abs(psi.flat[k])
            wf = Wavefunction(grid, psi)
            return GroundState(wf, energies[-1], energies, step)
    raise RelaxationError(
        f"no convergence after {max_steps} steps: last energy change "
        f"{energies[-1] - energies[-2]:.3e}, state change {change:.3e}"
    )
