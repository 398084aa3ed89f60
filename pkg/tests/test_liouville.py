import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from excitonrc import liouville as lv
from excitonrc import spectral
from excitonrc.liouville import (DriveSpec, Liouvillian, PerModeFock, Space, SpaceConfig,
                                 SpaceError, TotalExcitationSector)
from excitonrc.units import HBAR

from helpers import crossing_period, trace_distance

W0 = 2.01


def fock(n_chain, cut):
    return SpaceConfig.cavity_chain(n_chain, PerModeFock((cut,) * (n_chain + 2)))


def test_sector_dimensions():
    cfg = SpaceConfig.cavity_chain(30, TotalExcitationSector(1))
    assert cfg.dimension == 33
    assert "32 with exactly 1 quantum" in cfg.describe()
    sp = Space(cfg)
    assert sp.dim == 33
    assert fock(1, 3).dimension == 64
    with pytest.raises(SpaceError, match="budget"):
        Space(SpaceConfig.cavity_chain(8, PerModeFock((4,) * 10)))


def test_basis_state_outside_space():
    sp = Space(SpaceConfig.cavity_chain(0, TotalExcitationSector(1)))
    with pytest.raises(SpaceError):
        sp.basis_state({"a": 2})
    with pytest.raises(SpaceError):
        sp.annihilation("B5")


def test_jc_block_eigenvalues():
    G0, Om = 7.7, 2.02
    _, H, _ = lv.build_system_hamiltonian(G0, Om, Om, 0.0, DriveSpec(), SpaceConfig.cavity_chain(0))
    ev = np.linalg.eigvalsh(H)
    np.testing.assert_allclose(sorted(ev), [-G0 * 1e-3, 0.0, G0 * 1e-3], atol=1e-15)


def test_kerr_diagonal():
    drive = DriveSpec.cw(0.5, 2.0)
    sp, H, _ = lv.build_system_hamiltonian(7.7, 2.02, 2.03, 6.5, drive, fock(0, 3))
    i = sp.lookup[(0, 2)]
    assert H[i, i].real == pytest.approx(2 * (2.02 - 2.0) + 2 * 6.5e-3, rel=1e-13)
    assert np.max(np.abs(H - H.conj().T)) == 0


def test_chain_hamiltonian_structure():
    ch = spectral.ChainParams([2.012, 2.014, 2.016], [7.7, 2.0, 3.0])
    cfg = SpaceConfig.cavity_chain(2, TotalExcitationSector(2))
    sp, H, _ = lv.build_chain_hamiltonian(ch, 2.012, 4.0, DriveSpec(), cfg)
    Ntot = sp.total_number().toarray()
    assert np.max(np.abs(H @ Ntot - Ntot @ H)) < 1e-15
    # off-diagonal entries move one quantum between neighbouring modes
    for i, j in zip(*np.nonzero(np.triu(H, 1))):
        d = sp.states[i] - sp.states[j]
        nz = np.nonzero(d)[0]
        assert len(nz) == 2 and abs(nz[1] - nz[0]) == 1 and sorted(d[nz]) == [-1, 1]
    one = spectral.ChainParams([2.012], [7.7])
    _, H0, _ = lv.build_chain_hamiltonian(one, 2.0, 4.0, DriveSpec(), fock(0, 2))
    _, Hs, _ = lv.build_system_hamiltonian(7.7, 2.012, 2.0, 4.0, DriveSpec(), fock(0, 2))
    assert np.array_equal(H0, Hs)
    with pytest.raises(SpaceError, match="depth"):
        lv.build_chain_hamiltonian(ch, 2.0, 0.0, DriveSpec(), fock(0, 1))


def test_polariton_limits():
    d = lv.polariton_decomposition(7.7, 0.0, 2.02, 2.02, 2.0)
    assert d.lab_plus == pytest.approx(2.02 + 7.7e-3)
    assert d.lab_minus == pytest.approx(2.02 - 7.7e-3)
    for ca, cb in (d.B_plus, d.B_minus):
        assert abs(ca) / math.hypot(ca, cb) == pytest.approx(1 / math.sqrt(2))
    far = lv.polariton_decomposition(0.1, 0.5, 2.5, 2.0, 2.0)
    assert far.eta == pytest.approx(0.5, rel=1e-6)
    # upper polariton is cavity-like for positive detuning, lower is exciton-like
    assert abs(far.B_plus[0]) < 1e-3 and abs(far.B_minus[1]) > 0.999
    with pytest.raises(ValueError):
        lv.polariton_decomposition(0.0, 0.0, 2.0, 2.0, 2.0)


def _rc_space():
    return Space(SpaceConfig.cavity_chain(0, TotalExcitationSector(1)))


def test_secular_term_count():
    xi, G0 = 0.88, 7.7
    Om = W0 + xi * 1e-3
    Jr = spectral.gaussian_residual_J(G0, xi, W0)
    d = lv.polariton_decomposition(G0, 0.0, Om, Om, Om)
    sp = _rc_space()
    assert len(lv.secular_dissipator(d, Jr, sp, "full")) == 1
    assert len(lv.secular_dissipator(d, Jr, sp, "simplified")) == 1
    zero = spectral.TabulatedSpectralDensity([W0, W0 + 0.1, W0 + 0.2], [0.0, 0.0, 0.0])
    assert lv.secular_dissipator(d, zero, sp) == []
    # weak coupling: the lower polariton sits inside the continuum
    weak = lv.polariton_decomposition(0.3, 0.0, Om, Om, Om)
    assert len(lv.secular_dissipator(weak, Jr, sp, "full")) == 2


def test_secular_rates_phase_invariant():
    xi = 14.0
    Om = W0 + xi * 1e-3
    Jr = spectral.gaussian_residual_J(7.7, xi, W0)
    d = lv.polariton_decomposition(7.7, 0.0, Om, Om, Om)
    sp = _rc_space()
    base = lv.secular_dissipator(d, Jr, sp, "full")
    rot = lv.PolaritonDecomposition(d.omega_plus, d.omega_minus, d.eta, d.omega_d,
                                    (d.B_plus[0], d.B_plus[1] * np.exp(1j * 0.7)),
                                    (d.B_minus[0], d.B_minus[1] * np.exp(1j * 0.7)))
    turned = lv.secular_dissipator(rot, Jr, sp, "full")
    assert [r for r, _ in base] == [r for r, _ in turned]


def test_upper_rate_decreases_with_L(benchmark_params):
    rates = []
    for L in (2, 3, 4, 6, 8, 12, 16, 20):
        p = benchmark_params(L)
        d = lv.polariton_decomposition(p.G0, 0.0, p.omega_c, p.Omega0, p.omega_c)
        rates.append(spectral.markov_rate(p.residual_density(), d.omega_plus, d.omega_d))
    assert np.all(np.diff(rates) < 0)


def test_lamb_shift_hermitian():
    xi = 3.5
    Om = W0 + xi * 1e-3
    Jr = spectral.residual_J(spectral.gaussian_J(7.7, xi, W0))
    d = lv.polariton_decomposition(7.7, 0.0, Om, Om, Om)
    H = lv.lamb_shift(d, Jr, _rc_space()).toarray()
    assert np.max(np.abs(H - H.conj().T)) < 1e-18
    assert np.any(H != 0)


def test_eigenbasis_projections_recompose():
    sp = Space(fock(0, 2))
    _, H, _ = lv.build_system_hamiltonian(7.7, 2.015, 2.012, 3.0, DriveSpec(), fock(0, 2), space=sp)
    B0 = sp.annihilation("B0").toarray()
    terms = lv.eigenbasis_dissipator(H, B0, lambda w: 1.0)
    np.testing.assert_allclose(sum(op for _, op in terms), B0, atol=1e-12)
    assert all(r == 1.0 for r, _ in terms)


def _single_mode(cut=3):
    cfg = SpaceConfig(("a",), PerModeFock((cut,)))
    return Space(cfg)


def test_cavity_decay_oracle():
    sp = _single_mode(3)
    a = sp.annihilation("a")
    g = 2.0  # meV
    L = Liouvillian(sp, np.zeros((sp.dim, sp.dim)), [(2 * g * 1e-3, a)])
    rho0 = sp.basis_state({"a": 3})
    t = np.linspace(0, 500, 51)
    tr = lv.propagate(L, rho0, t, observables={"n": sp.number("a").diagonal().real})
    expect = 3 * np.exp(-2 * g * 1e-3 / HBAR * t)
    assert np.max(np.abs(tr["n"] / expect - 1)) < 1e-6
    assert tr.trace_error.max() < 1e-9 and tr.hermiticity_error.max() < 1e-9


def test_pure_dephasing_oracle():
    sp = _single_mode(2)
    a = sp.annihilation("a")
    n = (a.conj().T @ a).toarray()
    gp = 1.5
    L = Liouvillian(sp, np.zeros((3, 3)), [(2 * gp * 1e-3, n)])
    psi = np.ones(3) / math.sqrt(3)
    rho0 = np.outer(psi, psi).astype(complex)
    t = np.linspace(0, 400, 5)
    obs = {"pop1": np.array([0, 1.0, 0]), "c01": _coherence(3, 0, 1), "c02": _coherence(3, 0, 2)}
    tr = lv.propagate(L, rho0, t, tol=1e-10, observables=obs)
    rate = gp * 1e-3 / HBAR
    np.testing.assert_allclose(tr["pop1"], 1 / 3, rtol=1e-9)
    np.testing.assert_allclose(tr["c01"], 2 / 3 * np.exp(-rate * t), rtol=1e-7)
    np.testing.assert_allclose(tr["c02"], 2 / 3 * np.exp(-4 * rate * t), rtol=1e-7)


def _coherence(d, i, j):
    # Tr(O rho) = rho_ij + rho_ji for O = |j><i| + |i><j|
    O = np.zeros((d, d))
    O[i, j] = O[j, i] = 1.0
    return O


def test_generator_trace_preserving():
    ch = spectral.ChainParams([2.012, 2.014], [7.7, 2.0])
    sp, H, X = lv.build_chain_hamiltonian(ch, 2.01, 4.0, DriveSpec.cw(0.3, 2.011), fock(1, 2))
    L = Liouvillian(sp, H, [(0.0066, sp.annihilation("a")), (0.004, sp.annihilation("B0"))], X=X,
                    drive=DriveSpec.cw(0.3, 2.011))
    assert L.trace_preservation_error() < 1e-12
    with pytest.raises(SpaceError):
        Liouvillian(sp, H, [(-1.0, sp.annihilation("a"))])


def test_vacuum_steady_state():
    sp = Space(fock(0, 2))
    _, H, _ = lv.build_system_hamiltonian(7.7, 2.02, 2.01, 5.0, DriveSpec(), fock(0, 2), space=sp)
    L = Liouvillian(sp, H, [(0.0066, sp.annihilation("a")), (0.004, sp.annihilation("B0"))])
    rho = lv.steady_state(L)
    assert trace_distance(rho, sp.vacuum()) < 1e-12
    assert lv.steady_state_residual(L, rho) < 1e-10


def test_degenerate_steady_state_reported():
    sp = Space(fock(0, 1))
    _, H, _ = lv.build_system_hamiltonian(7.7, 2.02, 2.02, 0.0, DriveSpec(), fock(0, 1), space=sp)
    with pytest.raises(SpaceError, match="nullity"):
        lv.steady_state(Liouvillian(sp, H, []))


@pytest.mark.parametrize("detuning", [0.0, 2e-3, -5e-3])
def test_driven_cavity_steady_state(detuning):
    sp = _single_mode(3)
    a = sp.annihilation("a")
    F, g = 0.02, 3.3
    wc = 2.0
    drive = DriveSpec.cw(F, wc - detuning)
    H = ((wc - drive.omega_d) * (a.conj().T @ a)).toarray()
    L = Liouvillian(sp, H, [(2 * g * 1e-3, a)], X=(a + a.conj().T).toarray(), drive=drive)
    rho = lv.steady_state(L)
    n = np.real(np.trace(sp.number("a").toarray() @ rho))
    assert n == pytest.approx(F**2 / ((detuning * 1e3) ** 2 + g**2), rel=1e-4)


def test_long_time_propagation_reaches_steady_state():
    cfg = fock(0, 2)
    sp = Space(cfg)
    drive = DriveSpec.cw(0.5, 2.012)
    _, H, X = lv.build_system_hamiltonian(7.7, 2.013, 2.012, 3.0, drive, cfg, space=sp)
    L = Liouvillian(sp, H, [(0.0066, sp.annihilation("a")), (0.0042, sp.annihilation("B0"))], X=X, drive=drive)
    ss = lv.steady_state(L)
    tr = lv.propagate(L, sp.vacuum(), np.linspace(0, 6000, 7), tol=1e-10)
    assert trace_distance(tr.final_state, ss) < 1e-6


def test_vacuum_rabi_period():
    G0 = 7.7
    cfg = SpaceConfig.cavity_chain(0)
    sp, H, _ = lv.build_system_hamiltonian(G0, 2.02, 2.02, 0.0, DriveSpec(), cfg)
    T = math.pi * HBAR / (G0 * 1e-3)
    t = np.linspace(0, 10 * T, 2001)
    tr = lv.propagate(Liouvillian(sp, H), sp.basis_state({"a": 1}), t, tol=1e-11)
    assert crossing_period(t, tr["n_cavity"]) == pytest.approx(T, rel=1e-4)


@settings(max_examples=10, deadline=None)
@given(G=st.floats(0.5, 20), det=st.floats(-10, 10), kappa=st.floats(0.5, 10))
def test_excitation_non_increasing_with_cavity_loss(G, det, kappa):
    cfg = fock(0, 2)
    sp = Space(cfg)
    _, H, _ = lv.build_system_hamiltonian(G, 2.02 + det * 1e-3, 2.02, 0.0, DriveSpec(), cfg, space=sp)
    L = Liouvillian(sp, H, [(2 * kappa * 1e-3, sp.annihilation("a"))])
    rho0 = sp.basis_state({"a": 1, "B0": 1})
    t = np.linspace(0, 300, 61)
    tr = lv.propagate(L, rho0, t, observables={"N": sp.total_number().diagonal().real})
    assert np.all(np.diff(tr["N"]) <= 1e-9)


def test_propagate_input_checks():
    sp = _single_mode(1)
    L = Liouvillian(sp, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        lv.propagate(L, sp.vacuum(), [0.0, 0.0])
    with pytest.raises(ValueError, match="trace"):
        lv.propagate(L, 2 * sp.vacuum(), [0.0, 1.0])


def test_drive_spec():
    p = DriveSpec.pulse(10.0, 5.0, 2.0)
    assert p.t0 == 15.0 and p.is_time_dependent
    assert p.amplitude(15.0) == pytest.approx(0.01)
    assert p.amplitude(20.0) == pytest.approx(0.01 * math.exp(-1))
    assert DriveSpec.cw(0.1, 2.0).amplitude(123.0) == pytest.approx(1e-4)
    with pytest.raises(ValueError):
        DriveSpec("cw")
    with pytest.raises(ValueError):
        DriveSpec("laser", omega_d=2.0)
