from dataclasses import replace

import numpy as np
import pytest

from cavdiss import units
from cavdiss.eigensolve import relax_ground, vibrational_eigen
from cavdiss.grids import Grid1D, Grid2D, Wavefunction
from cavdiss.meanfield import (
    MeanFieldError,
    QuadratureTrace,
    _stage2,
    meanfield_cavity_run,
    meanfield_molecule_run,
)
from cavdiss.model import (
    CapSpec,
    CavityParams,
    DriveSpec,
    Scenario,
    SystemSpec,
    default_dipole,
    default_morse,
    driven_cavity_quadrature,
)
from cavdiss.propagate import PropagationSpec, propagate

MORSE = default_morse()
DIPOLE = default_dipole(MORSE.q_e)
W10 = MORSE.fundamental
QG = Grid1D(2.1, 12.0, 256)
G2 = Grid2D(QG, Grid1D(-60.0, 60.0, 48, "x"))
PROP = PropagationSpec(t_final=100 * units.FS, record_stride=40)


def cavity_system(lam, scenario, amp, cap=None):
    return SystemSpec(MORSE, DIPOLE, CavityParams(W10, lam, 0.16), cap, DriveSpec(scenario, amp, W10))


def test_decoupled_molecule_run_is_free_space():
    spec = cavity_system(0.0, Scenario.MOLECULE, 0.02)
    res = meanfield_molecule_run(spec, PROP, G2)
    assert np.abs(res.quadrature.x_expect).max() < 1e-10
    free = SystemSpec(MORSE, DIPOLE, None, None, DriveSpec(Scenario.FREE_SPACE, 0.02, W10))
    phi0 = vibrational_eigen(QG, MORSE, 1).wavefunction(0)
    ref = propagate(phi0, free, PROP)
    assert np.allclose(res.trace.mean_H_M, ref.mean_H_M, rtol=1e-9, atol=0)
    assert np.allclose(res.trace.norm2, ref.norm2, rtol=0, atol=1e-12)


def test_effective_drive_matches_bracket():
    spec = cavity_system(0.05, Scenario.MOLECULE, 0.02)
    res = meanfield_molecule_run(spec, PROP, G2)
    t = res.quadrature.times
    assert len(t) == PROP.n_steps + 1
    expect = 0.02 * np.sin(W10 * t) - spec.cavity.coupling * res.quadrature.x_expect
    assert np.array_equal(res.effective_drive, expect)
    # the quadrature is the lab-frame <x> of the quantum run at the recorded times
    idx = np.searchsorted(t, res.quantum.times)
    assert np.allclose(res.quadrature.x_expect[idx], res.quantum.mean_x, rtol=1e-12, atol=1e-12)
    assert np.abs(res.quadrature.x_expect).max() > 0.1
    # CAP off: stage 2 is a unitary 1D evolution
    assert np.abs(res.trace.norm2 - 1).max() < 1e-10


def test_cavity_run_without_pump_is_stationary():
    spec = cavity_system(0.02, Scenario.CAVITY, 0.0)
    res = meanfield_cavity_run(spec, PROP, G2)
    h = res.trace.mean_H_M
    assert np.abs(h - h[0]).max() < 1e-8 * abs(h[0])
    assert np.all(res.effective_drive == 0)


def test_cavity_run_uses_analytic_quadrature():
    F0 = 2e-4
    spec = cavity_system(0.02, Scenario.CAVITY, F0, CapSpec())
    res = meanfield_cavity_run(spec, PROP, G2)
    t = res.quadrature.times
    assert np.array_equal(res.quadrature.x_expect, driven_cavity_quadrature(F0, W10, t))
    assert np.array_equal(res.effective_drive, -spec.cavity.coupling * res.quadrature.x_expect)
    assert res.trace.mean_H_M[-1] > res.trace.mean_H_M[0]


def test_interpolation_error_is_small():
    # stage 2 evaluates the field at step midpoints, between the stored samples
    F0 = 3e-4
    spec = cavity_system(0.02, Scenario.CAVITY, F0)
    c = spec.cavity.coupling
    t = PROP.dt * np.arange(PROP.n_steps + 1)
    quad = QuadratureTrace(t, driven_cavity_quadrature(F0, W10, t))
    exact = _stage2(spec, QG, PROP, lambda s: -c * float(driven_cavity_quadrature(F0, W10, s)))
    interp = _stage2(spec, QG, PROP, lambda s: -c * float(quad(s)))
    rise = exact.mean_H_M - exact.mean_H_M[0]
    err = np.abs(interp.mean_H_M - exact.mean_H_M).max()
    assert err < 1e-6 * np.abs(rise).max()


def test_quadrature_trace_io(tmp_path):
    q = QuadratureTrace([0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 8.0, 27.0])
    assert q(0.5) == pytest.approx(0.125, rel=1e-12)  # cubics are reproduced
    assert q(5.0) == 27.0
    q.to_csv(tmp_path / "q.csv", ["x"])
    lines = (tmp_path / "q.csv").read_text().splitlines()
    assert lines[:2] == ["# x", "time_fs,x_expect"]
    assert len(lines) == 6
    with pytest.raises(MeanFieldError):
        QuadratureTrace([0.0, 0.0], [1.0, 2.0])
    with pytest.raises(MeanFieldError):
        QuadratureTrace([0.0], [1.0])


def test_scenario_checks():
    with pytest.raises(MeanFieldError):
        meanfield_molecule_run(cavity_system(0.02, Scenario.CAVITY, 1e-4), PROP, G2)
    with pytest.raises(MeanFieldError):
        meanfield_cavity_run(cavity_system(0.02, Scenario.MOLECULE, 1e-2), PROP, G2)
    with pytest.raises(MeanFieldError):
        meanfield_molecule_run(cavity_system(0.02, Scenario.MOLECULE, 1e-2), PROP, QG)


def test_stage2_starts_in_its_own_ground_state():
    # with the coupled ground state <x(0)> != 0 the t = 0 mean-field Hamiltonian is shifted
    spec = cavity_system(0.05, Scenario.MOLECULE, 0.0)
    spec = replace(spec, drive=DriveSpec(Scenario.MOLECULE, 1e-12, W10))
    res = meanfield_molecule_run(spec, PROP, G2, relax_ground(spec.undriven(), G2).psi)
    h = res.trace.mean_H_M
    assert np.abs(h - h[0]).max() < 1e-8 * abs(h[0])
