"""Spectral densities, the reducer, residual densities and the chain mapping.

Everything is in energy units: frequencies as hbar*omega (eV) and spectral
densities J such that int J d(hbar omega) = (hbar G)^2 in eV^2, so J itself
is in eV.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate, special

DEFAULT_NODES = 4096
DEFAULT_CUTOFF_XI = 40.0
MAX_CHAIN_DEPTH = 64
# smallest log-grid offset from the lower edge, relative to the support width
_LOG_GRID_FLOOR = 1e-7
_CHUNK = 1 << 22


class SpectralError(ValueError):
    pass


class SpectralDensity:
    """J(omega) supported on [a, b]; zero outside."""

    a: float
    b: float

    @property
    def support(self):
        return self.a, self.b

    def __call__(self, omega):
        raise NotImplementedError

    def integral(self):
        raise NotImplementedError

    def first_moment(self):
        """int omega J d omega, eV^3."""
        raise NotImplementedError

    def moments(self):
        return moments(self)

    def tabulate(self, n=DEFAULT_NODES, grid=None):
        if grid is None:
            grid = log_grid(self.a, self.b, n)
        return TabulatedSpectralDensity(grid, self(grid))


class AnalyticSpectralDensity(SpectralDensity):
    """Wraps a vectorised callable; moments by adaptive quadrature."""

    def __init__(self, func, a, b, points=None):
        if not b > a:
            raise SpectralError("support must satisfy b > a")
        self.func = func
        self.a, self.b = float(a), float(b)
        self._points = points

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        inside = (w >= self.a) & (w <= self.b)
        out = np.zeros_like(w)
        if np.any(inside):
            out[inside] = self.func(w[inside])
        return out if out.ndim else float(out)

    def _quad(self, f):
        val, _ = integrate.quad(f, self.a, self.b, points=self._points, limit=400,
                                epsabs=0, epsrel=1e-12)
        return val

    def integral(self):
        return self._quad(lambda w: float(self.func(np.array([w]))[0]))

    def first_moment(self):
        return self._quad(lambda w: w * float(self.func(np.array([w]))[0]))


class GaussianSpectralDensity(AnalyticSpectralDensity):
    """J = (G^2/xi) exp(-(omega - omega0)/xi) on [omega0, b], energies in eV."""

    def __init__(self, G, xi, omega0, b=None):
        if not (G > 0 and xi > 0 and omega0 > 0):
            raise SpectralError("G, xi and omega0 must be positive")
        self.G, self.xi, self.omega0 = float(G), float(xi), float(omega0)
        if b is None:
            b = omega0 + DEFAULT_CUTOFF_XI * xi
        super().__init__(self._j, omega0, b)

    def _j(self, w):
        return self.G**2 / self.xi * np.exp(-(w - self.omega0) / self.xi)

    def integral(self):
        B = (self.b - self.a) / self.xi
        return self.G**2 * -math.expm1(-B)

    def first_moment(self):
        B = (self.b - self.a) / self.xi
        # int_0^B (omega0 + xi y) e^-y dy, times G^2
        m0 = -math.expm1(-B)
        m1 = 1 - (1 + B) * math.exp(-B)
        return self.G**2 * (self.omega0 * m0 + self.xi * m1)


class TabulatedSpectralDensity(SpectralDensity):
    """Piecewise-linear J through (omega_k, J_k); all integrals are exact for the interpolant."""

    def __init__(self, omega, values):
        w = np.array(omega, dtype=float)
        j = np.array(values, dtype=float)
        if w.ndim != 1 or w.shape != j.shape or w.size < 2:
            raise SpectralError("need matching 1D grids with at least two points")
        if not np.all(np.diff(w) > 0):
            raise SpectralError("frequency grid must be strictly increasing")
        if not np.all(np.isfinite(j)):
            raise SpectralError("spectral density contains non-finite values")
        if np.any(j < 0):
            raise SpectralError("spectral density must be non-negative")
        w.setflags(write=False)
        j.setflags(write=False)
        self.omega, self.values = w, j
        self.a, self.b = float(w[0]), float(w[-1])

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        out = np.interp(w, self.omega, self.values, left=0.0, right=0.0)
        return out if np.ndim(out) else float(out)

    def integral(self):
        h = np.diff(self.omega)
        return float(np.sum(h * (self.values[:-1] + self.values[1:])) / 2)

    def first_moment(self):
        x0, x1 = self.omega[:-1], self.omega[1:]
        j0, j1 = self.values[:-1], self.values[1:]
        h = x1 - x0
        return float(np.sum(h / 6 * (x0 * (2 * j0 + j1) + x1 * (j0 + 2 * j1))))

    def regrid(self, grid):
        return TabulatedSpectralDensity(grid, self(grid))


def log_grid(a, b, n=DEFAULT_NODES, floor=_LOG_GRID_FLOOR):
    """n points on [a, b], logarithmically dense near a; a and b included."""
    if n < 3:
        raise SpectralError("need at least three grid points")
    width = b - a
    offsets = np.geomspace(floor * width, width, n - 1)
    grid = np.concatenate(([a], a + offsets))
    grid[-1] = b
    return grid


def gaussian_J(G0, xi, omega0, b=None):
    """Spectral density of a Gaussian mode; G0 and xi in meV, omega0 in eV."""
    xi_ev = xi * 1e-3
    return GaussianSpectralDensity(G0 * 1e-3, xi_ev, omega0, b=b)


def gaussian_residual_J(G0, xi, omega0, b=None):
    """Closed-form residual density of the Gaussian family (untruncated support).

    J_res = xi e^x / (Ei(x)^2 + pi^2), x = (omega - omega0)/xi. Independent of G0.
    """
    xi_ev = xi * 1e-3
    if b is None:
        b = omega0 + DEFAULT_CUTOFF_XI * xi_ev

    def f(w):
        x = (w - omega0) / xi_ev
        with np.errstate(divide="ignore", invalid="ignore"):
            val = xi_ev * np.exp(x) / (special.expi(x) ** 2 + math.pi**2)
        return np.where(x > 0, val, 0.0)

    return AnalyticSpectralDensity(f, omega0, b)


def numeric_J(gk_sampler, material, k_max, grid=None, n_theta=64):
    """Tabulate J from couplings sqrt(S) hbar g_alpha(k) (meV nm, trailing valley axis).

    Uses omega(k) = omega0 + hbar^2 k^2 / 2M and
    J(omega) = (1/(8 pi^2 beta)) int d theta sum_alpha |g_alpha(k(omega), theta)|^2,
    beta = hbar^2/2M.
    """
    beta = 0.5 * material.kinetic_scale
    w_max = material.omega0 + beta * k_max**2
    if grid is None:
        grid = log_grid(material.omega0, w_max, 1024)
    grid = np.asarray(grid, dtype=float)
    if grid[0] < material.omega0:
        raise SpectralError("frequency grid extends below the exciton gap")
    if grid[-1] > w_max * (1 + 1e-12):
        kneed = math.sqrt((grid[-1] - material.omega0) / beta)
        raise SpectralError(f"k_max = {k_max:.4g} 1/nm too small; the grid needs k up to {kneed:.4g} 1/nm")
    k = np.sqrt(np.clip(grid - material.omega0, 0, None) / beta)
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    kv = np.stack([k[:, None] * np.cos(theta), k[:, None] * np.sin(theta)], axis=-1)
    g = np.asarray(gk_sampler(kv)) * 1e-3  # eV nm
    power = np.sum(np.abs(g) ** 2, axis=-1)
    # periodic trapezoid over theta
    ang = power.mean(axis=1) * 2 * np.pi
    return TabulatedSpectralDensity(grid, ang / (8 * np.pi**2 * beta))


def moments(J):
    """(Omega0 in eV, G0 in meV): first moment and root of the total weight."""
    total = J.integral()
    if not total > 0:
        raise SpectralError("spectral density has zero weight")
    return J.first_moment() / total, math.sqrt(total) * 1e3


def _pl_reducer(omega_nodes, j_nodes, w):
    """Hilbert transform PV int J(nu)/(w - nu) d nu of the piecewise-linear interpolant."""
    x = omega_nodes
    s = np.diff(j_nodes) / np.diff(x)
    a, b = x[0], x[-1]
    lin0 = j_nodes[0] + s[0] * (w - a)
    linN = j_nodes[-1] + s[-1] * (w - b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = lin0 * np.log(np.abs(w - a)) - linN * np.log(np.abs(w - b))
    out -= j_nodes[-1] - j_nodes[0]
    xk = x[1:-1]
    ds = s[1:] - s[:-1]
    keep = ds != 0
    xk, ds = xk[keep], ds[keep]
    step = max(1, _CHUNK // max(1, xk.size))
    for i in range(0, w.size, step):
        d = w[i:i + step, None] - xk[None, :]
        ad = np.abs(d)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(ad > 0, d * np.log(ad), 0.0)
        out[i:i + step] += t @ ds
    return out


def _quad_reducer(J, w):
    # subtracted form; the integrand is continuous at nu = w
    a, b = J.a, J.b
    jw = J.func(np.array([w]))[0]
    eps = 1e-7 * (b - a)
    jp = J.func(np.array([min(w + eps, b)]))[0]
    jm = J.func(np.array([max(w - eps, a)]))[0]
    slope = (jp - jm) / (min(w + eps, b) - max(w - eps, a))

    def f(nu):
        if nu == w:
            return slope
        return (J.func(np.array([nu]))[0] - jw) / (nu - w)

    val, _ = integrate.quad(f, a, b, points=[w], limit=400, epsabs=0, epsrel=1e-11)
    return jw * math.log((w - a) / (b - w)) - val


def reducer(J, omega):
    """Phi(omega) = PV int_a^b J(nu)/(omega - nu) d nu for omega in the open support (eV)."""
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    if np.any(w <= J.a) or np.any(w >= J.b):
        raise SpectralError(f"reducer needs omega inside ({J.a}, {J.b})")
    if isinstance(J, TabulatedSpectralDensity):
        out = _pl_reducer(J.omega, J.values, w)
    else:
        out = np.array([_quad_reducer(J, wi) for wi in w])
    return out if np.ndim(omega) else float(out[0])


def residual_J(J, n=DEFAULT_NODES):
    """Residual density G^2 J / (Phi^2 + pi^2 J^2) on the tabulation of J.

    Analytic densities are first tabulated on ``n`` log-spaced nodes. The
    result vanishes at both support edges, where Phi diverges.
    """
    tab = J if isinstance(J, TabulatedSpectralDensity) else J.tabulate(n)
    G2 = tab.integral()
    if not G2 > 0:
        raise SpectralError("spectral density has zero weight")
    w = tab.omega
    jr = np.zeros_like(w)
    inner = w[1:-1]
    phi = _pl_reducer(tab.omega, tab.values, inner)
    jv = tab.values[1:-1]
    den = phi**2 + math.pi**2 * jv**2
    with np.errstate(divide="ignore", invalid="ignore"):
        jr[1:-1] = np.where(den > 0, G2 * jv / den, 0.0)
    return TabulatedSpectralDensity(w, jr)


def markov_rate(J_res, omega_rot, omega_d):
    """Secular decay rate hbar*Gamma_res = 2 pi J_res(omega + omega_d), meV.

    ``omega_rot`` is the rotating-frame frequency (eV); zero outside the support.
    """
    val = np.asarray(J_res(np.asarray(omega_rot, dtype=float) + omega_d))
    out = 2 * math.pi * val * 1e3
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ChainParams:
    Omega: np.ndarray  # eV, n = 0..N
    G: np.ndarray  # meV, n = 0..N

    def __post_init__(self):
        Om = np.asarray(self.Omega, dtype=float)
        G = np.asarray(self.G, dtype=float)
        if Om.shape != G.shape or Om.ndim != 1 or Om.size == 0:
            raise SpectralError("Omega and G must be matching non-empty 1D arrays")
        if np.any(G <= 0):
            raise SpectralError("chain couplings must be positive")
        object.__setattr__(self, "Omega", Om)
        object.__setattr__(self, "G", G)

    @property
    def N(self):
        return self.Omega.size - 1

    def truncate(self, n):
        if n > self.N:
            raise SpectralError(f"chain has depth {self.N}, cannot truncate to {n}")
        return ChainParams(self.Omega[: n + 1], self.G[: n + 1])


def chain_map(J, N, n=DEFAULT_NODES):
    """Iterated reaction-coordinate extraction; entry n is built from J_res^(n-1), J_res^(-1) = J."""
    if N < 0:
        raise SpectralError("N must be non-negative")
    if N > MAX_CHAIN_DEPTH:
        raise SpectralError(f"chain depth limited to {MAX_CHAIN_DEPTH}")
    current = J if isinstance(J, TabulatedSpectralDensity) else J.tabulate(n)
    grid = current.omega
    Om, G = [], []
    for i in range(N + 1):
        if i > 0:
            current = residual_J(current)
            if not np.array_equal(current.omega, grid):
                current = current.regrid(grid)
        try:
            # entry 0 from J itself, not its tabulation
            o, g = moments(J if i == 0 else current)
        except SpectralError as err:
            raise SpectralError(f"chain iteration {i}: {err}") from None
        if not (np.isfinite(o) and np.isfinite(g)):
            raise SpectralError(f"chain iteration {i}: non-finite moments")
        Om.append(o)
        G.append(g)
    return ChainParams(np.array(Om), np.array(G))


def save_spectral_csv(J, path, grid=None):
    if grid is None:
        grid = J.omega if isinstance(J, TabulatedSpectralDensity) else log_grid(J.a, J.b)
    data = np.column_stack([grid, J(grid)])
    np.savetxt(path, data, delimiter=",", header="omega_eV,J_eV", comments="", fmt="%.17g")


def load_spectral_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return TabulatedSpectralDensity(data[:, 0], data[:, 1])


def save_chain_csv(chain, path):
    lines = ["n,Omega_eV,G_meV"]
    lines += [f"{i},{o!r},{g!r}" for i, (o, g) in enumerate(zip(chain.Omega.tolist(), chain.G.tolist()))]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_chain_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if not np.array_equal(data[:, 0], np.arange(len(data))):
        raise SpectralError(f"{path}: chain indices must run 0..N")
    return ChainParams(data[:, 1], data[:, 2])
