"""Simulation drivers: exact single-excitation evolution, Markovian and chain master equations.

Observables are populations; times in fs; couplings and rates in meV at the
public edges (hbar times the rate), frequencies as hbar*omega in eV.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy import interpolate
from scipy.integrate import trapezoid

from . import em_modes, spectral
from .liouville import (DriveSpec, Liouvillian, PerModeFock, SpaceConfig, TotalExcitationSector,
                        Trajectory, build_chain_hamiltonian, eigenbasis_dissipator, lamb_shift,
                        polariton_decomposition, propagate, secular_dissipator, steady_state)
from .units import HBAR

__all__ = ["DriveSpec", "SystemParams", "Trajectory", "exact_single_excitation", "gaussian_kernel",
           "tabulated_kernel", "markov_trajectory", "chain_trajectory", "relative_error",
           "excitation_spectrum", "chain_cutoff"]

VOLTERRA_STEP_BOUND = 1e-4  # (G0 h)^2


@dataclass(frozen=True)
class SystemParams:
    """Resonator + reaction-coordinate parameters.

    G0, gamma_c, W0p, xi in meV; omega_c, Omega0, omega0 in eV. ``J`` optionally
    overrides the Gaussian spectral density (e.g. a tabulated grid result).
    """

    G0: float
    Omega0: float
    omega_c: float
    gamma_c: float
    omega0: float
    xi: float | None = None
    W0p: float = 0.0
    J: object = None

    @classmethod
    def from_mode(cls, mode, material, resonant=False):
        rc = em_modes.rc_params(mode, material)
        omega_c = rc.Omega0 if resonant else mode.omega_c
        if resonant and isinstance(mode, em_modes.GaussianMode):
            # the coupling depends on omega_c; re-evaluate at resonance
            rc = em_modes.rc_params(replace(mode, omega_c=omega_c), material)
        return cls(G0=rc.G0, Omega0=rc.Omega0, omega_c=omega_c, gamma_c=mode.gamma_c,
                   omega0=material.omega0, xi=rc.xi, W0p=rc.W0p)

    def spectral_density(self, b=None):
        if self.J is not None:
            return self.J
        if self.xi is None:
            raise ValueError("no spectral density: provide xi or J")
        return spectral.gaussian_J(self.G0, self.xi, self.omega0, b=b)

    def residual_density(self):
        if self.J is None and self.xi is not None:
            return spectral.gaussian_residual_J(self.G0, self.xi, self.omega0)
        return spectral.residual_J(self.spectral_density())

    def without_coupling(self):
        return replace(self, G0=0.0)

    def as_dict(self):
        d = asdict(self)
        d["J"] = None if self.J is None else "tabulated"
        return d


# exact single-excitation evolution

def gaussian_kernel(G0, xi, omega0, omega_c, tau):
    """K(tau) = int J(w) exp(-i (w - omega_c) tau / hbar) dw / hbar^2, in 1/fs^2."""
    g = G0 * 1e-3
    tau = np.asarray(tau, dtype=float)
    return g * g * np.exp(-1j * (omega0 - omega_c) * tau / HBAR) / (1 + 1j * xi * 1e-3 * tau / HBAR) / HBAR**2


def tabulated_kernel(J, omega_c, tau, chunk=256):
    """Exact Fourier integral of the piecewise-linear interpolant of J, 1/fs^2."""
    tab = J if isinstance(J, spectral.TabulatedSpectralDensity) else J.tabulate()
    x = tab.omega - omega_c
    v = tab.values
    xm = 0.5 * (x[1:] + x[:-1])
    d = 0.5 * np.diff(x)
    jm = 0.5 * (v[1:] + v[:-1])
    s = np.diff(v) / np.diff(x)
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    out = np.empty(tau.size, dtype=complex)
    for i in range(0, tau.size, chunk):
        k = tau[i:i + chunk, None] / HBAR
        z = k * d
        sinc = np.sinc(z / np.pi)
        # (sin z - z cos z)/z^3 with its series near zero
        small = np.abs(z) < 1e-2
        zs = np.where(small, 1.0, z)
        gz = np.where(small, 1 / 3 - z**2 / 30, (np.sin(zs) - zs * np.cos(zs)) / zs**3)
        seg = 2 * d * jm * sinc - 2j * s * d**3 * k * gz
        out[i:i + chunk] = np.sum(np.exp(-1j * k * xm) * seg, axis=1)
    return out / HBAR**2


def _volterra(kernel_fn, decay, T, n):
    """phi' = -decay phi - int_0^t K(t-s) phi(s) ds, phi(0) = 1, trapezoid rule, n steps."""
    h = T / n
    t = np.linspace(0.0, T, n + 1)
    K = kernel_fn(t)
    phi = np.empty(n + 1, dtype=complex)
    phi[0] = 1.0
    F = np.empty(n + 1, dtype=complex)
    F[0] = -decay * phi[0]
    Krev = K[::-1].copy()  # Krev[n - j] = K[j]... used as K[m - j] via slicing
    c = 1 + 0.5 * h * decay + 0.25 * h * h * K[0]
    for m in range(1, n + 1):
        # convolution with phi_j for j = 0..m-1; trapezoid endpoint weights
        kk = Krev[n - m:n + 1]  # K[m], K[m-1], ..., K[0]
        conv = h * (0.5 * kk[0] * phi[0] + np.dot(kk[1:m], phi[1:m]))
        rhs = phi[m - 1] + 0.5 * h * F[m - 1] - 0.5 * h * conv
        phi[m] = rhs / c
        F[m] = -decay * phi[m] - (conv + 0.5 * h * K[0] * phi[m])
    return t, phi


def exact_single_excitation(J, omega_c, gamma_c, t_grid, h=None, richardson=True):
    """Cavity amplitude phi_c(t) for one initial photon coupled to the exciton continuum.

    Works in the frame rotating at omega_c. Gaussian densities use the closed
    kernel; other densities the exact kernel of their piecewise-linear tabulation.
    Returns (phi on t_grid, error estimate sup |phi_h - phi_h/2|).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[0] < 0:
        raise ValueError("t_grid must start at t >= 0")
    decay = gamma_c * 1e-3 / HBAR
    if J is None:
        return np.exp(-decay * t_grid).astype(complex), 0.0
    if isinstance(J, spectral.GaussianSpectralDensity):
        def kernel_fn(tau):
            return gaussian_kernel(J.G * 1e3, J.xi * 1e3, J.omega0, omega_c, tau)
        G2 = J.G**2
    else:
        tab = J if isinstance(J, spectral.TabulatedSpectralDensity) else J.tabulate()

        def kernel_fn(tau):
            return tabulated_kernel(tab, omega_c, tau)
        G2 = tab.integral()
        if not np.all(np.isfinite(kernel_fn(np.array([0.0, t_grid[-1]])))):
            raise ValueError(f"non-finite kernel values; frequency grid has {tab.omega.size} nodes "
                             f"on [{tab.a}, {tab.b}] eV")
    G = math.sqrt(G2) / HBAR
    T = t_grid[-1]
    if T <= 0:
        return np.ones(t_grid.size, dtype=complex), 0.0
    if h is None:
        h = math.sqrt(VOLTERRA_STEP_BOUND) / max(G, decay, 1e-12)
    n = max(64, int(math.ceil(T / h)))
    t1, p1 = _volterra(kernel_fn, decay, T, n)
    if not richardson:
        return _resample(t1, p1, t_grid), float("nan")
    t2, p2 = _volterra(kernel_fn, decay, T, 2 * n)
    coarse = p2[::2]
    best = (4 * coarse - p1) / 3
    err = float(np.max(np.abs(coarse - p1)))
    return _resample(t1, best, t_grid), err


def _resample(t, y, t_new):
    if t.size == t_new.size and np.allclose(t, t_new, rtol=0, atol=1e-9):
        return y.copy()
    re = interpolate.CubicSpline(t, y.real)(t_new)
    im = interpolate.CubicSpline(t, y.imag)(t_new)
    return re + 1j * im


# master-equation drivers

def _phonon_terms(space, rates):
    if rates is None:
        return []
    B0 = space.annihilation("B0")
    return [(2 * rates.gamma_x * 1e-3, B0), (2 * rates.gamma_x_prime * 1e-3, B0.conj().T @ B0)]


def _initial_state(space, initial):
    if initial == "photon":
        return space.basis_state({"a": 1})
    if initial == "vacuum":
        return space.vacuum()
    return np.asarray(initial, dtype=complex)


def _default_config(n_chain, drive, cutoff, initial):
    if drive.kind == "none" and initial == "photon":
        return SpaceConfig.cavity_chain(n_chain, TotalExcitationSector(1))
    return SpaceConfig.cavity_chain(n_chain, PerModeFock((cutoff,) * (n_chain + 2)))


def _scenario_hash(payload):
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def markov_generator(params, variant="simplified", drive=None, rates=None, config=None,
                     cutoff=4, initial="photon", lamb=False, eigenbasis=False, J_res=None):
    """Liouvillian of the secular Markovian master equation.

    variant: 'full' (both polariton terms), 'simplified' (upper polariton) or
    'none' (residual excitons ignored).
    """
    if variant not in ("full", "simplified", "none"):
        raise ValueError(f"unknown variant {variant!r}")
    drive = drive or DriveSpec()
    if config is None:
        config = _default_config(0, drive, cutoff, initial)
        if not params.G0 > 0 and isinstance(config.truncation, PerModeFock):
            # an uncoupled, undamped exciton would make the stationary state degenerate
            config = SpaceConfig.cavity_chain(0, PerModeFock((cutoff, 0)))
    chain = spectral.ChainParams([params.Omega0], [max(params.G0, 1e-300)])
    space, H, X = build_chain_hamiltonian(chain, params.omega_c, params.W0p, drive, config)
    a = space.annihilation("a")
    collapse = [(2 * params.gamma_c * 1e-3, a)] + _phonon_terms(space, rates)
    wd = drive.frame(params.omega_c)
    if variant != "none" and params.G0 > 0:
        if J_res is None:
            J_res = params.residual_density()
        if eigenbasis:
            B0 = space.annihilation("B0")
            rate_fn = lambda w: 2 * math.pi * float(J_res(w + wd))  # noqa: E731
            collapse += eigenbasis_dissipator(H, B0, rate_fn)
        else:
            decomp = polariton_decomposition(params.G0, params.omega_c - params.Omega0,
                                             params.omega_c, params.Omega0, wd)
            collapse += secular_dissipator(decomp, J_res, space, variant)
            if lamb:
                H = H + lamb_shift(decomp, J_res, space, variant).toarray()
    return Liouvillian(space, H, collapse, X=X if drive.kind != "none" else None,
                       drive=drive if drive.kind != "none" else None)


def markov_trajectory(params, variant="simplified", drive=None, rates=None, t_grid=None,
                      config=None, cutoff=4, initial="photon", tol=1e-8, lamb=False,
                      eigenbasis=False, J_res=None):
    drive = drive or DriveSpec()
    L = markov_generator(params, variant, drive, rates, config, cutoff, initial, lamb, eigenbasis, J_res)
    rho0 = _initial_state(L.space, initial)
    traj = propagate(L, rho0, t_grid, tol=tol)
    traj.metadata.update(solver=f"markov_{variant}", dimension=L.dim,
                         truncation=repr(L.space.config.truncation),
                         scenario_hash=_scenario_hash([params.as_dict(), variant, asdict(drive),
                                                       None if rates is None else asdict(rates)]))
    return traj


def chain_cutoff(xi, omega0, N):
    """Support cutoff for chain mapping of depth N: wide enough for the deepest sites."""
    return omega0 + max(spectral.DEFAULT_CUTOFF_XI, 4.0 * N + 20.0) * xi * 1e-3


def chain_trajectory(chain, N, params, drive=None, rates=None, t_grid=None, W0p=None,
                     config=None, cutoff=4, initial="photon", tol=1e-8):
    """Master equation of the chain truncated after N links (cavity + N+1 exciton modes)."""
    drive = drive or DriveSpec()
    chain = chain.truncate(N)
    W0p = params.W0p if W0p is None else W0p
    config = config or _default_config(N, drive, cutoff, initial)
    space, H, X = build_chain_hamiltonian(chain, params.omega_c, W0p, drive, config)
    a = space.annihilation("a")
    collapse = [(2 * params.gamma_c * 1e-3, a)] + _phonon_terms(space, rates)
    L = Liouvillian(space, H, collapse, X=X if drive.kind != "none" else None,
                    drive=drive if drive.kind != "none" else None)
    traj = propagate(L, _initial_state(space, initial), t_grid, tol=tol)
    traj.metadata.update(solver=f"chain{N}", dimension=L.dim, truncation=repr(config.truncation),
                         scenario_hash=_scenario_hash([params.as_dict(), chain.Omega.tolist(),
                                                       chain.G.tolist(), asdict(drive)]))
    return traj


def relative_error(n, n_ref, t):
    """int (n - n_ref)^2 dt / int n_ref^2 dt by the trapezoid rule."""
    n = np.asarray(n, dtype=float)
    n_ref = np.asarray(n_ref, dtype=float)
    t = np.asarray(t, dtype=float)
    if not (n.shape == n_ref.shape == t.shape):
        raise ValueError("series must share the time grid")
    norm = trapezoid(n_ref**2, t)
    if norm <= 0:
        raise ValueError("reference series has zero norm")
    return float(trapezoid((n - n_ref) ** 2, t) / norm)


class LinearityError(RuntimeError):
    pass


def _steady_photon_number(params, variant, F, omega_d, rates, cutoff, J_res):
    drive = DriveSpec.cw(F, omega_d)
    L = markov_generator(params, variant, drive, rates, cutoff=cutoff, initial="vacuum", J_res=J_res)
    rho = steady_state(L, check_nullity=False)
    a = L.space.annihilation("a")
    return float(np.real(np.trace((a.conj().T @ a) @ rho)))


def excitation_spectrum(params, omega_d, F, rates=None, variant="simplified", cutoff=2,
                        check_linearity=True, linearity_tol=0.01):
    """Steady-state photon number versus drive frequency (eV) for a weak CW drive F (meV).

    Linearity is checked at the spectral maximum: halving F must quarter n_ss.
    """
    omega_d = np.asarray(omega_d, dtype=float)
    J_res = None
    if variant != "none" and params.G0 > 0:
        J_res = params.residual_density()
    n = np.array([_steady_photon_number(params, variant, F, w, rates, cutoff, J_res) for w in omega_d])
    if check_linearity:
        i = int(np.argmax(n))
        half = _steady_photon_number(params, variant, F / 2, omega_d[i], rates, cutoff, J_res)
        ratio = 4 * half / n[i] if n[i] > 0 else 1.0
        if abs(ratio - 1) > linearity_tol:
            raise LinearityError(f"drive F = {F} meV is not in the linear regime: "
                                 f"4 n(F/2)/n(F) = {ratio:.4f} at {omega_d[i]:.6f} eV")
    return n


def save_spectrum_csv(omega_d, n_ss, path):
    n_ss = np.asarray(n_ss, dtype=float)
    peak = n_ss.max()
    norm = n_ss / peak if peak > 0 else n_ss
    np.savetxt(path, np.column_stack([omega_d, n_ss, norm]), delimiter=",", comments="",
               header="omega_d_eV,n_ss,n_ss_normalized", fmt="%.17g")


def rabi_period(G0):
    """Vacuum Rabi period pi hbar / (hbar G0) in fs (G0 in meV)."""
    return math.pi * HBAR / (G0 * 1e-3)


def jaynes_cummings_amplitude(G0, gamma_c, t, gamma_x=0.0):
    """Cavity amplitude of the damped resonant two-mode problem from |1,0>."""
    g = G0 * 1e-3 / HBAR
    kc = gamma_c * 1e-3 / HBAR
    kx = gamma_x * 1e-3 / HBAR
    M = np.array([[-kc, -1j * g], [-1j * g, -kx]])
    w, V = np.linalg.eig(M)
    c = np.linalg.solve(V, np.array([1.0, 0.0]))
    t = np.asarray(t, dtype=float)
    return (V[0, 0] * c[0] * np.exp(w[0] * t) + V[0, 1] * c[1] * np.exp(w[1] * t))
