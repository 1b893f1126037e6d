import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from cavdiss import units
from cavdiss.grids import Grid1D, Grid2D, Wavefunction
from cavdiss.model import (
    CapSpec,
    CavityParams,
    DipoleParams,
    DriveSpec,
    Flavor,
    ModelError,
    MorseParams,
    Scenario,
    SystemSpec,
    assemble_potential,
    calibrate_dipole,
    calibrate_morse,
    cap_value,
    default_dipole,
    default_morse,
    dipole_mean_square,
    dipole_value,
    driven_cavity_momentum,
    driven_cavity_quadrature,
    morse_energy,
)
from cavdiss.propagate import PropagationSpec, run_split_operator

W10 = units.to_au(1514.9, "cm-1")


@pytest.fixture(scope="module")
def morse():
    return default_morse()


def test_morse_shape(morse):
    assert morse_energy(morse, morse.q_e) == 0.0
    assert morse_energy(morse, 200.0) == pytest.approx(28 * W10, rel=1e-12)
    h = 1e-4
    q = morse.q_e
    second = (morse_energy(morse, q + h) - 2 * morse_energy(morse, q) + morse_energy(morse, q - h)) / h**2
    assert second == pytest.approx(2 * morse.D0 * morse.alpha**2, rel=1e-6)
    assert 2 * morse.D0 * morse.alpha**2 == pytest.approx(morse.mu * morse.omega_e**2, rel=1e-12)


def test_calibration_hits_fundamental(morse):
    assert morse.fundamental == pytest.approx(W10, rel=1e-10)
    assert morse.level(2) - morse.level(1) < morse.level(1) - morse.level(0)
    assert morse.n_bound >= 29


def test_calibration_harmonic_limit():
    mu = 15000.0
    for d0 in (1e2, 1e4):
        a = calibrate_morse(W10, d0, mu)
        assert a == pytest.approx(W10 * math.sqrt(mu / (2 * d0)), rel=2 * W10 / d0)


def test_calibration_without_root():
    with pytest.raises(ModelError):
        calibrate_morse(W10, 0.5 * W10, 15000.0)


def test_literal_mecke_form():
    p = DipoleParams(1.7, 0.4)
    assert dipole_value(p, 0.0) == 0.0
    assert dipole_value(p, 1 / 0.4) == pytest.approx(1.7 / (0.4 * math.e))
    q = np.linspace(0.1, 20, 2001)
    assert q[np.argmax(dipole_value(p, q))] == pytest.approx(p.peak_position, abs=0.01)


def test_default_dipole_vanishes_at_equilibrium(morse):
    p = default_dipole(morse.q_e)
    assert dipole_value(p, morse.q_e) == 0.0
    assert p.peak_position == pytest.approx(morse.q_e + 1.0)
    assert dipole_value(p, 60.0) < 1e-20


@pytest.mark.parametrize("decay,origin", [(1.0, 2.9), (1 / 3.9, 0.0), (0.6, 1.5)])
def test_dipole_calibration_against_quad(decay, origin):
    p = calibrate_dipole(decay, origin=origin)
    oracle = integrate.quad(lambda q: dipole_value(p, q) ** 2, 2.1, 8.0, epsabs=0, epsrel=1e-13)[0] / 5.9
    assert oracle == pytest.approx(0.85, abs=1e-6)
    assert dipole_mean_square(p) == pytest.approx(0.85, abs=1e-12)


def test_dipole_calibration_scaling():
    assert calibrate_dipole(0.5, 0.0).amplitude == 0.0
    a1 = calibrate_dipole(0.5, 0.85).amplitude
    assert calibrate_dipole(0.5, 1.7).amplitude == pytest.approx(math.sqrt(2) * a1, rel=1e-14)


def test_cavity_coupling_identity():
    c = CavityParams(W10, 0.025, 0.16)
    assert c.g == pytest.approx(0.025 * W10, rel=1e-15)
    with pytest.raises(ModelError):
        CavityParams(W10, -1.0, 0.16)


@given(st.floats(-5, 30))
def test_cap_profile(q):
    spec = CapSpec(8.0, 2e-3, 2)
    v = cap_value(spec, q)
    assert v >= 0
    if q <= 8.0:
        assert v == 0
    else:
        assert v == pytest.approx(2e-3 * (q - 8.0) ** 2)


def _system(morse, lam=0.02, flavor=Flavor.MULTIPOLAR, drive=DriveSpec(), cap=None):
    return SystemSpec(morse, default_dipole(), CavityParams(W10, lam, 0.16), cap, drive, flavor)


@pytest.fixture(scope="module")
def grid2d():
    return Grid2D(Grid1D(2.1, 12.0, 64), Grid1D(-40, 40, 32, "x"))


def test_decoupled_potential_is_separable(morse, grid2d):
    pot = assemble_potential(_system(morse, lam=0.0), grid2d)
    q = grid2d.q_axis.points[:, None]
    x = grid2d.x_axis.points[None, :]
    assert np.allclose(pot(0.3), morse_energy(morse, q) + 0.5 * W10**2 * x**2, rtol=0, atol=1e-15)


@pytest.mark.parametrize("sc,amp", [(Scenario.MOLECULE, 0.02), (Scenario.CAVITY, 1e-3)])
def test_drive_vanishes_at_zero(morse, grid2d, sc, amp):
    spec = _system(morse, drive=DriveSpec(sc, amp, W10))
    pot = assemble_potential(spec, grid2d, frame="lab")
    assert np.array_equal(pot(0.0), pot.static)


def test_drive_terms(morse, grid2d):
    t = 123.0
    q = grid2d.q_axis.points[:, None]
    x = grid2d.x_axis.points[None, :]
    d = dipole_value(default_dipole(), q)
    s = math.sin(W10 * t)
    mol = assemble_potential(_system(morse, drive=DriveSpec(Scenario.MOLECULE, 0.02, W10)), grid2d)
    assert np.allclose(mol(t) - mol.static, -d * 0.02 * s + 0 * x, atol=1e-15)
    cav = assemble_potential(_system(morse, drive=DriveSpec(Scenario.CAVITY, 1e-3, W10)), grid2d, frame="lab")
    assert np.allclose(cav(t) - cav.static, math.sqrt(2 * W10) * 1e-3 * x * s + 0 * q, atol=1e-15)


def test_dse_difference(morse, grid2d):
    mp = _system(morse)
    pf = _system(morse, flavor=Flavor.PAULI_FIERZ)
    q = grid2d.q_axis.points[:, None]
    d = dipole_value(mp.dipole, q)
    diff = assemble_potential(pf, grid2d).static - assemble_potential(mp, grid2d).static
    assert np.allclose(diff, mp.cavity.dse_prefactor * d**2 + 0 * grid2d.x_axis.points, rtol=0, atol=1e-14)


def test_coupling_is_bilinear(morse, grid2d):
    v0 = assemble_potential(_system(morse, lam=0.0), grid2d).static
    v1 = assemble_potential(_system(morse, lam=0.01), grid2d).static
    v3 = assemble_potential(_system(morse, lam=0.03), grid2d).static
    assert np.allclose(v3 - v0, 3 * (v1 - v0), rtol=1e-12, atol=1e-15)


def test_cap_is_only_imaginary_part(morse, grid2d):
    pot = assemble_potential(_system(morse, cap=CapSpec()), grid2d)
    q = grid2d.q_axis.points[:, None]
    assert np.allclose(pot.static.imag, -cap_value(CapSpec(), q) + 0 * grid2d.x_axis.points)


def test_inconsistent_specs(morse, grid2d):
    with pytest.raises(ModelError):
        SystemSpec(morse, default_dipole(), None, drive=DriveSpec(Scenario.MOLECULE, 0.01))
    with pytest.raises(ModelError):
        assemble_potential(_system(morse, drive=DriveSpec(Scenario.CAVITY, 1e-3)), grid2d.q_axis)


def test_classical_quadrature_solves_oscillator():
    # x'' + w^2 x = -sqrt(2 w) F0 sin(wL t), x(0) = x'(0) = 0
    F0 = 2e-4
    for wl in (W10, 1.1 * W10):
        t = np.linspace(0, 4000, 40001)
        x = driven_cavity_quadrature(F0, W10, t, wl)
        p = driven_cavity_momentum(F0, W10, t, wl)
        assert x[0] == 0 and p[0] == 0
        assert np.allclose(np.gradient(x, t)[1:-1], p[1:-1], atol=1e-4 * np.abs(p).max())
        acc = np.gradient(p, t)
        rhs = -(W10**2) * x - math.sqrt(2 * W10) * F0 * np.sin(wl * t)
        assert np.allclose(acc[2:-2], rhs[2:-2], atol=1e-4 * np.abs(rhs).max())


def test_cap_scattering_oracle(morse):
    """Packet at 2 w10 above the dissociation limit: >= 99.9% absorbed, <= 0.1% back past q = 7."""
    g = Grid1D(2.1, 12.0, 384)
    q = g.points
    q0, sigma = 6.5, 0.3
    k = math.sqrt(2 * morse.mu * (morse.D0 + 2 * W10 - float(morse_energy(morse, q0))))
    psi = Wavefunction(g, np.exp(-((q - q0) ** 2) / (4 * sigma**2) + 1j * k * q)).normalized()
    spec = SystemSpec(morse, default_dipole(), None, CapSpec())
    t_final = 3 * (g.max - q0) / (k / morse.mu)
    tr = run_split_operator(psi, spec, PropagationSpec(dt=1.0, t_final=t_final, record_stride=500), assemble_potential(spec, g))
    left = float(np.sum(np.abs(tr.final_state.amplitudes[q < 7.0]) ** 2) * g.spacing)
    assert 1 - tr.norm2[-1] >= 0.999
    assert left <= 1e-3
