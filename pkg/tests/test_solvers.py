import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from excitonrc import spectral, solvers
from excitonrc.liouville import DriveSpec
from excitonrc.solvers import SystemParams
from excitonrc.units import HBAR

from helpers import crossing_period

W0 = 2.01


def test_bare_decay():
    t = np.linspace(0, 300, 31)
    phi, err = solvers.exact_single_excitation(None, 2.0, 3.3, t)
    np.testing.assert_allclose(phi, np.exp(-3.3e-3 / HBAR * t))
    zero = spectral.TabulatedSpectralDensity([2.0, 2.1, 2.2], [0.0, 0.0, 0.0])
    phi0, _ = solvers.exact_single_excitation(zero, 2.0, 3.3, t)
    np.testing.assert_allclose(phi0, np.exp(-3.3e-3 / HBAR * t), rtol=1e-6)


def test_gaussian_kernel_matches_quadrature():
    G0, xi, wc = 7.7, 0.88, 2.0112
    taus = np.linspace(0.5, 400, 50)
    K = solvers.gaussian_kernel(G0, xi, W0, wc, taus)
    g2, x = (G0 * 1e-3) ** 2, xi * 1e-3
    worst = 0.0
    for tau, k in zip(taus, K):
        s = tau / HBAR
        # oscillatory Fourier integrals over [omega0, inf) with the QAWF rule, y = (omega - omega0)/xi
        re = g2 * integrate.quad(lambda y: math.exp(-y), 0, np.inf, weight="cos", wvar=s * x)[0]
        im = g2 * integrate.quad(lambda y: math.exp(-y), 0, np.inf, weight="sin", wvar=s * x)[0]
        ref = np.exp(-1j * (W0 - wc) * s) * (re - 1j * im) / HBAR**2
        worst = max(worst, abs(k - ref) / abs(ref))
    assert worst < 1e-6


def test_tabulated_kernel_matches_closed_form():
    G0, xi = 7.7, 3.5
    J = spectral.gaussian_J(G0, xi, W0)
    tau = np.linspace(0, 300, 40)
    exact = solvers.gaussian_kernel(G0, xi, W0, W0 + xi * 1e-3, tau)
    tab = solvers.tabulated_kernel(J.tabulate(), W0 + xi * 1e-3, tau)
    assert np.max(np.abs(tab - exact)) / np.abs(exact[0]) < 1e-4


def test_narrow_density_gives_jaynes_cummings():
    G0, gc = 7.7, 3.3
    J = spectral.gaussian_J(G0, 1e-5, W0)
    t = np.linspace(0, 600, 601)
    phi, err = solvers.exact_single_excitation(J, W0, gc, t)
    ref = solvers.jaynes_cummings_amplitude(G0, gc, t)
    assert np.max(np.abs(np.abs(phi) ** 2 - np.abs(ref) ** 2)) < 1e-3
    assert err < 1e-3


def test_tabulated_and_gaussian_exact_agree():
    p = SystemParams(G0=7.7, Omega0=W0 + 3.5e-3, omega_c=W0 + 3.5e-3, gamma_c=3.3, omega0=W0, xi=3.5)
    J = p.spectral_density()
    t = np.linspace(0, 500, 251)
    a, _ = solvers.exact_single_excitation(J, p.omega_c, p.gamma_c, t)
    b, _ = solvers.exact_single_excitation(J.tabulate(), p.omega_c, p.gamma_c, t)
    assert np.max(np.abs(np.abs(a) ** 2 - np.abs(b) ** 2)) < 1e-4


def test_markov_without_residual_is_damped_jc():
    xi = 1e-5
    p = SystemParams(G0=7.7, Omega0=W0 + xi * 1e-3, omega_c=W0 + xi * 1e-3, gamma_c=3.3, omega0=W0, xi=xi)
    t = np.linspace(0, 1000, 1001)
    tr = solvers.markov_trajectory(p, "none", t_grid=t)
    phi, _ = solvers.exact_single_excitation(p.spectral_density(), p.omega_c, p.gamma_c, t)
    assert solvers.relative_error(tr["n_cavity"], np.abs(phi) ** 2, t) < 1e-3
    ch = solvers.chain_trajectory(spectral.ChainParams([p.Omega0], [p.G0]), 0, p, t_grid=t)
    np.testing.assert_allclose(ch["n_cavity"], tr["n_cavity"], atol=1e-12)


def test_markov_variants_same_order(benchmark_params):
    t = np.linspace(0, 1000, 501)
    for L in (2.0, 20.0):
        p = benchmark_params(L)
        phi, _ = solvers.exact_single_excitation(p.spectral_density(), p.omega_c, p.gamma_c, t)
        ref = np.abs(phi) ** 2
        full = solvers.relative_error(solvers.markov_trajectory(p, "full", t_grid=t)["n_cavity"], ref, t)
        simple = solvers.relative_error(solvers.markov_trajectory(p, "simplified", t_grid=t)["n_cavity"], ref, t)
        assert 0.1 < full / simple < 10


def test_chain_convergence_small_L(benchmark_params):
    p = benchmark_params(4.0)
    t = np.linspace(0, 2000, 1001)
    phi, _ = solvers.exact_single_excitation(p.spectral_density(), p.omega_c, p.gamma_c, t)
    ref = np.abs(phi) ** 2
    chain = spectral.chain_map(p.spectral_density(b=solvers.chain_cutoff(p.xi, p.omega0, 12)), 12)
    errs, last = [], []
    # neighbouring depths can ripple (end-of-chain reflections); the trend holds across a spread
    for N in (1, 2, 3, 4, 8, 12):
        tr = solvers.chain_trajectory(chain, N, p, t_grid=t, tol=1e-10)
        errs.append(solvers.relative_error(tr["n_cavity"], ref, t))
        last.append(tr["n_lastchain"].max())
        assert tr.trace_error.max() < 1e-9
    assert np.all(np.diff(errs) < 0)
    assert np.all(np.diff(last) < 0)


def test_relative_error_examples():
    t = np.linspace(0, 1, 11)
    n = 1 + t
    assert solvers.relative_error(n, n, t) == 0
    assert solvers.relative_error(2 * n, n, t) == pytest.approx(1.0)
    with pytest.raises(ValueError, match="zero"):
        solvers.relative_error(n, 0 * n, t)
    with pytest.raises(ValueError):
        solvers.relative_error(n[:5], n, t)


@settings(max_examples=30, deadline=None)
@given(k1=st.integers(1, 20), k2=st.integers(1, 20), a=st.floats(-1, 1), b=st.floats(-1, 1))
def test_relative_error_additive_for_orthogonal_perturbations(k1, k2, a, b):
    if k1 == k2:
        return
    t = np.linspace(0, 1, 201)
    ref = np.full(t.size, 2.0)
    e1 = a * np.sin(2 * np.pi * k1 * t)
    e2 = b * np.sin(2 * np.pi * k2 * t)
    total = solvers.relative_error(ref + e1 + e2, ref, t)
    parts = solvers.relative_error(ref + e1, ref, t) + solvers.relative_error(ref + e2, ref, t)
    assert total == pytest.approx(parts, rel=1e-9, abs=1e-14)


def test_spectrum_lorentzian_without_coupling():
    p = SystemParams(G0=0.0, Omega0=2.02, omega_c=2.0, gamma_c=3.3, omega0=2.01)
    w = 2.0 + np.linspace(-0.015, 0.015, 31)
    n = solvers.excitation_spectrum(p, w, 0.01)
    expect = 0.01**2 / (((w - 2.0) * 1e3) ** 2 + 3.3**2)
    np.testing.assert_allclose(n, expect, rtol=1e-4)


def _peaks(w, n):
    from excitonrc.semiclassical import find_peaks

    return find_peaks(w, n)


def test_spectrum_splitting_and_detuning():
    G0 = 50.0
    for det in (0.0, 30e-3, 60e-3):
        p = SystemParams(G0=G0, Omega0=2.02, omega_c=2.02 + det, gamma_c=1.0, omega0=2.0, xi=20.0)
        w = np.linspace(2.02 + det / 2 - 0.1, 2.02 + det / 2 + 0.1, 801)
        n = solvers.excitation_spectrum(p, w, 0.05, variant="none")
        pk = _peaks(w, n)
        eta = math.hypot(2 * G0 * 1e-3, det)
        assert pk[1] - pk[0] == pytest.approx(eta, rel=0.02)


def test_linearity_check():
    p = SystemParams(G0=7.7, Omega0=2.02, omega_c=2.02, gamma_c=3.3, omega0=2.01, xi=10.0, W0p=20.0)
    with pytest.raises(solvers.LinearityError, match="linear"):
        solvers.excitation_spectrum(p, np.array([2.02 - 7.7e-3, 2.02]), 5.0, variant="none", cutoff=3)


def test_rabi_helpers():
    G0 = 7.7
    T = solvers.rabi_period(G0)
    assert T == pytest.approx(math.pi * HBAR / 7.7e-3)
    t = np.linspace(0, 5 * T, 2001)
    amp = solvers.jaynes_cummings_amplitude(G0, 0.0, t)
    np.testing.assert_allclose(np.abs(amp) ** 2, np.cos(G0 * 1e-3 / HBAR * t) ** 2, atol=1e-12)
    assert crossing_period(t, np.abs(amp) ** 2) == pytest.approx(T, rel=1e-8)


def test_system_params_from_mode(benchmark_params):
    p = benchmark_params(8.0)
    assert p.G0 == pytest.approx(7.7, rel=0.02)
    assert p.omega_c == p.Omega0
    assert p.Omega0 - p.omega0 == pytest.approx(p.xi * 1e-3)
    assert p.as_dict()["J"] is None
    with pytest.raises(ValueError):
        SystemParams(G0=1.0, Omega0=2.0, omega_c=2.0, gamma_c=1.0, omega0=2.0).spectral_density()


def test_trajectory_metadata_deterministic(benchmark_params):
    p = benchmark_params(8.0)
    t = np.linspace(0, 50, 11)
    a = solvers.markov_trajectory(p, "simplified", t_grid=t)
    b = solvers.markov_trajectory(p, "simplified", t_grid=t)
    assert a.metadata["scenario_hash"] == b.metadata["scenario_hash"]
    assert np.array_equal(a["n_cavity"], b["n_cavity"])
    with pytest.raises(ValueError, match="variant"):
        solvers.markov_trajectory(p, "partial", t_grid=t)


def test_pulse_response_scales_quadratically(benchmark_params):
    p = benchmark_params(8.0)
    Delta = 0.2 * HBAR / (p.G0 * 1e-3)
    t = np.linspace(0, 200, 101)
    peaks = []
    for A in (0.5, 1.0):
        d = DriveSpec.pulse(A, Delta, p.Omega0)
        tr = solvers.markov_trajectory(p, "none", d, t_grid=t, initial="vacuum", cutoff=3)
        peaks.append(tr["n_cavity"].max())
    assert peaks[1] / peaks[0] == pytest.approx(4.0, rel=1e-3)


@pytest.mark.slow
def test_blockade_ordering_survives_cutoff_doubling(ws2, ws2_derived):
    from conftest import blockade_mode
    from excitonrc import materials

    rates = materials.phonon_rates(ws2, 4.0)
    t = np.linspace(0, 400, 401)
    deficits = {}
    for cutoff in (4, 8):
        for L in (4.0, 10.0):
            p = SystemParams.from_mode(blockade_mode(L), ws2_derived, resonant=True)
            width = 0.2 * HBAR / (p.G0 * 1e-3)
            drive = DriveSpec.pulse(HBAR / width * 1e3, width, p.Omega0)
            chain = spectral.ChainParams([p.Omega0], [p.G0])
            nl = solvers.chain_trajectory(chain, 0, p, drive, rates, t, initial="vacuum",
                                          cutoff=cutoff)["n_rc"].max()
            lin = solvers.chain_trajectory(chain, 0, p, drive, rates, t, W0p=0.0,
                                           initial="vacuum", cutoff=cutoff)["n_rc"].max()
            deficits[cutoff, L] = 1 - nl / lin
    for cutoff in (4, 8):
        assert deficits[cutoff, 4.0] > 3 * deficits[cutoff, 10.0]
