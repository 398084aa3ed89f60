"""Resonator field profiles and the exciton reaction-coordinate quantities they define.

Two kinds of profile are supported:

* :class:`GaussianMode` -- separable mode with a Gaussian lateral profile of
  width ``L`` and a complex in-plane polarisation vector ``n_pol``
  (|n_pol|^2 <= 1 is the in-plane projection of the mode polarisation).
* :class:`GridMode` -- in-plane field components (F_x, F_y) sampled on a
  uniform grid at the sheet plane, e.g. exported from a QNM solver.

In both cases the field at the sheet is ``F_par(r) / sqrt(L_z)`` where the
lateral profile ``F_par`` (units 1/nm) obeys int |F_par|^2 d^2r = |n|^2 for
the Gaussian mode and = 1 for a normalized grid.

Couplings are reported with the sheet area scaled out: ``sqrt(S) * hbar g``
in meV nm.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from .units import ALPHA, HBARC

# circular interband matrix elements in units of m0*V, valleys (K, K')
VALLEY_VECTORS = np.array([[1.0, 1.0j], [1.0, -1.0j]])

BOUNDARY_WARN_FRACTION = 0.01


class ModeError(ValueError):
    pass


@dataclass(frozen=True)
class ModeProfile:
    omega_c: float  # hbar*omega_c, eV
    gamma_c: float  # hbar*gamma_c (field decay), meV

    kind = "abstract"


@dataclass(frozen=True)
class GaussianMode(ModeProfile):
    L: float = 10.0  # nm
    L_z: float = 200.0  # nm
    n_pol: tuple = (1.0, 0.0)

    kind = "gaussian"

    def __post_init__(self):
        if not (self.L > 0 and self.L_z > 0):
            raise ModeError("L and L_z must be positive")
        if not self.gamma_c > 0:
            raise ModeError("gamma_c must be positive")
        n = np.asarray(self.n_pol, dtype=complex)
        if n.shape != (2,):
            raise ModeError("n_pol must be a complex 2-vector")
        if np.vdot(n, n).real > 1 + 1e-12:
            raise ModeError("|n_pol|^2 must not exceed 1")
        object.__setattr__(self, "n_pol", tuple(complex(c) for c in n))

    def lateral_profile(self, x, y):
        """Scalar Gaussian profile exp(-r^2/2L^2)/(L sqrt(pi)), 1/nm."""
        return np.exp(-(x**2 + y**2) / (2 * self.L**2)) / (self.L * math.sqrt(math.pi))


@dataclass(frozen=True)
class GridMode(ModeProfile):
    Fx: np.ndarray = field(default=None, repr=False)  # shape (ny, nx)
    Fy: np.ndarray = field(default=None, repr=False)
    dx: float = 1.0
    dy: float = 1.0
    z0: float = 0.0
    L_z: float | None = None
    epsilon_eff: float | None = None
    normalized: bool = False

    kind = "grid"

    def __post_init__(self):
        Fx = np.asarray(self.Fx, dtype=complex)
        Fy = np.asarray(self.Fy, dtype=complex)
        if Fx.ndim != 2 or Fx.shape != Fy.shape:
            raise ModeError("Fx and Fy must be 2D arrays of the same shape")
        if not (self.dx > 0 and self.dy > 0):
            raise ModeError("grid spacings must be positive")
        if not (np.all(np.isfinite(Fx)) and np.all(np.isfinite(Fy))):
            raise ModeError("grid contains non-finite values")
        Fx.setflags(write=False)
        Fy.setflags(write=False)
        object.__setattr__(self, "Fx", Fx)
        object.__setattr__(self, "Fy", Fy)
        mag = np.sqrt(np.abs(Fx) ** 2 + np.abs(Fy) ** 2)
        peak = mag.max()
        if peak == 0:
            raise ModeError("grid field is identically zero")
        edge = max(mag[0].max(), mag[-1].max(), mag[:, 0].max(), mag[:, -1].max())
        if edge >= BOUNDARY_WARN_FRACTION * peak:
            warnings.warn(f"field at grid boundary is {edge / peak:.2%} of peak; "
                          "couplings may suffer from truncation", stacklevel=3)

    @property
    def shape(self):
        return self.Fx.shape

    @property
    def x(self):
        nx = self.shape[1]
        return (np.arange(nx) - (nx - 1) / 2) * self.dx

    @property
    def y(self):
        ny = self.shape[0]
        return (np.arange(ny) - (ny - 1) / 2) * self.dy

    @property
    def k_nyquist(self):
        return math.pi / self.dx, math.pi / self.dy


@dataclass(frozen=True)
class RCParams:
    G0: float  # meV
    Omega0: float  # eV
    W0p: float  # meV
    xi: float | None = None  # meV, Gaussian modes only


@dataclass(frozen=True)
class RCWavefunction:
    x: np.ndarray
    y: np.ndarray
    psi: np.ndarray  # (2, ny, nx) per-valley amplitudes, 1/nm

    def norm(self):
        return float(sum(_trapz2(np.abs(p) ** 2, self.x, self.y) for p in self.psi))


def _trapz2(values, x, y):
    return trapezoid(trapezoid(values, x, axis=-1), y, axis=-1)


def _grid_integral(mode, values):
    return _trapz2(values, mode.x, mode.y)


def valley_projections(n_pol):
    """n . u^alpha for both valleys (bilinear, no conjugation)."""
    n = np.asarray(n_pol, dtype=complex)
    if not np.any(n):
        raise ModeError("polarisation vector must be non-zero")
    return VALLEY_VECTORS @ n


def polarisation_prefactor(n_pol):
    """sum |n.p|^4 / (sum |n.p|^2)^2 over the two valleys; between 1/2 and 1."""
    w = np.abs(valley_projections(n_pol)) ** 2
    return float(np.sum(w**2) / np.sum(w) ** 2)


def light_matter_scale(mode, material):
    """kappa^2 = hbar^2 e^2 V^2 / (pi eps0 hbar*omega_c a_B^2) in eV^2 nm.

    The squared coupling is (hbar G0)^2 = kappa^2 sum_alpha int |F.u^alpha|^2 d^2r
    with F the field at the sheet (1/nm^(3/2)).
    """
    hbar_v = HBARC * material.velocity_over_c
    return 4 * ALPHA * HBARC * hbar_v**2 / (mode.omega_c * material.a_B**2)


def _grid_projected(mode):
    """Per-valley projected lateral profiles, shape (2, ny, nx)."""
    return np.stack([u[0] * mode.Fx + u[1] * mode.Fy for u in VALLEY_VECTORS])


def _require_normalized(mode):
    if isinstance(mode, GridMode):
        if not mode.normalized or mode.L_z is None:
            raise ModeError("grid mode must be normalized first (see normalize_grid)")
        total = _grid_integral(mode, np.abs(mode.Fx) ** 2 + np.abs(mode.Fy) ** 2)
        if abs(total - 1) > 1e-6:
            raise ModeError(f"grid mode is not normalized: int |F|^2 = {total}")


def coupling_gk(mode, material, k):
    """sqrt(S)*hbar*g_alpha(k) in meV nm for both valleys.

    ``k`` is an in-plane wavevector (1/nm) or an array of them with trailing
    dimension 2; the result has trailing dimension 2 (valleys K, K').
    """
    _require_normalized(mode)
    k = np.asarray(k, dtype=float)
    if k.shape[-1] != 2:
        raise ModeError("k must have trailing dimension 2")
    kappa = math.sqrt(light_matter_scale(mode, material))
    if isinstance(mode, GaussianMode):
        L = mode.L
        k2 = np.sum(k**2, axis=-1)
        ft = 2 * math.sqrt(math.pi) * L * np.exp(-0.5 * k2 * L**2)
        proj = valley_projections(mode.n_pol)
        g = -kappa / math.sqrt(mode.L_z) * ft[..., None] * proj
        return g * 1e3
    kxmax, kymax = mode.k_nyquist
    if np.any(np.abs(k[..., 0]) > kxmax) or np.any(np.abs(k[..., 1]) > kymax):
        raise ModeError(f"|k| beyond the grid Nyquist limit k_max = pi/dx = {kxmax:.4g} 1/nm")
    proj = _grid_projected(mode)
    flat = k.reshape(-1, 2)
    ex = np.exp(-1j * np.outer(flat[:, 0], mode.x))  # (nk, nx)
    ey = np.exp(-1j * np.outer(flat[:, 1], mode.y))  # (nk, ny)
    wx = np.full(mode.shape[1], mode.dx)
    wy = np.full(mode.shape[0], mode.dy)
    wx[[0, -1]] *= 0.5
    wy[[0, -1]] *= 0.5
    # sum_j exp(-i k.r_j) F(r_j) w_j, separable in x and y
    ft = np.einsum("ky,ayx,kx->ka", ey * wy, proj, ex * wx)
    g = -kappa / math.sqrt(mode.L_z) * ft
    return (g * 1e3).reshape(k.shape[:-1] + (2,))


def fft_couplings(mode, material, pad=2):
    """Couplings of a grid mode on the FFT wavevector grid of the padded field.

    Returns ``(kx, ky, g)`` with ``g`` of shape (2, nky, nkx) in meV nm,
    wavevectors in 1/nm (fft ordering). Zero padding by ``pad`` suppresses
    wrap-around; wavevectors are bounded by the Nyquist limit pi/dx.
    """
    _require_normalized(mode)
    ny, nx = mode.shape
    Ny, Nx = pad * ny, pad * nx
    proj = _grid_projected(mode)
    padded = np.zeros((2, Ny, Nx), dtype=complex)
    padded[:, :ny, :nx] = proj
    kx = 2 * np.pi * np.fft.fftfreq(Nx, d=mode.dx)
    ky = 2 * np.pi * np.fft.fftfreq(Ny, d=mode.dy)
    ft = np.fft.fft2(padded) * mode.dx * mode.dy
    # shift phase so the transform refers to the grid-centred origin
    phase = np.exp(-1j * (ky[:, None] * mode.y[0] + kx[None, :] * mode.x[0]))
    kappa = math.sqrt(light_matter_scale(mode, material))
    g = -kappa / math.sqrt(mode.L_z) * ft * phase * 1e3
    return kx, ky, g


def rc_coupling_G0(mode, material):
    """Light--reaction-coordinate coupling hbar*G0 in meV."""
    _require_normalized(mode)
    kappa2 = light_matter_scale(mode, material)
    if isinstance(mode, GaussianMode):
        overlap = np.sum(np.abs(valley_projections(mode.n_pol)) ** 2)
    else:
        overlap = sum(_grid_integral(mode, np.abs(p) ** 2) for p in _grid_projected(mode))
    return math.sqrt(kappa2 * overlap / mode.L_z) * 1e3


def cutoff_frequency(mode, material):
    """hbar*xi = hbar^2 / (2 M L^2) in meV (Gaussian modes)."""
    if not isinstance(mode, GaussianMode):
        raise ModeError("the cutoff frequency is defined for Gaussian modes")
    return 0.5 * material.kinetic_scale / mode.L**2 * 1e3


def rc_wavefunction(mode, extent=6.0, n=257):
    """Per-valley reaction-coordinate wavefunction on the sheet.

    Gaussian modes are sampled on an ``n`` x ``n`` grid spanning
    +-``extent``*L; grid modes use their own grid.
    """
    if isinstance(mode, GaussianMode):
        x = np.linspace(-extent * mode.L, extent * mode.L, n)
        y = x
        X, Y = np.meshgrid(x, y)
        prof = mode.lateral_profile(X, Y)
        proj = valley_projections(mode.n_pol)
        psi = -np.stack([p * prof for p in proj])
    else:
        x, y = mode.x, mode.y
        psi = -_grid_projected(mode)
    norm = sum(_trapz2(np.abs(p) ** 2, x, y) for p in psi)
    if norm == 0:
        raise ModeError("projected field vanishes identically")
    return RCWavefunction(x=x, y=y, psi=psi / math.sqrt(norm))


def rc_nonlinearity_W0(mode, material):
    """hbar*W0' in meV: hbar S W000 sum_alpha int |psi0^alpha|^4."""
    if isinstance(mode, GaussianMode):
        eta = polarisation_prefactor(mode.n_pol)
        return material.SW000 * eta / (2 * math.pi * mode.L**2) * 1e3
    _require_normalized(mode)
    wf = rc_wavefunction(mode)
    quartic = sum(_trapz2(np.abs(p) ** 4, wf.x, wf.y) for p in wf.psi)
    return material.SW000 * quartic * 1e3


def rc_detuning(mode, material):
    """Omega0 - omega0 in meV: kinetic energy of the reaction coordinate.

    Equals (hbar^2/2M) sum_alpha int |grad psi0|^2, evaluated spectrally on
    the padded grid for grid modes; reduces to xi for Gaussian modes.
    """
    if isinstance(mode, GaussianMode):
        return cutoff_frequency(mode, material)
    wf = rc_wavefunction(mode)
    ny, nx = mode.shape
    kx = 2 * np.pi * np.fft.fftfreq(2 * nx, d=mode.dx)
    ky = 2 * np.pi * np.fft.fftfreq(2 * ny, d=mode.dy)
    k2 = ky[:, None] ** 2 + kx[None, :] ** 2
    num = den = 0.0
    for p in wf.psi:
        padded = np.zeros((2 * ny, 2 * nx), dtype=complex)
        padded[:ny, :nx] = p
        power = np.abs(np.fft.fft2(padded)) ** 2
        num += np.sum(k2 * power)
        den += np.sum(power)
    return 0.5 * material.kinetic_scale * num / den * 1e3


def rc_params(mode, material):
    G0 = rc_coupling_G0(mode, material)
    W0p = rc_nonlinearity_W0(mode, material)
    shift = rc_detuning(mode, material)
    xi = shift if isinstance(mode, GaussianMode) else None
    return RCParams(G0=G0, Omega0=material.omega0 + shift * 1e-3, W0p=W0p, xi=xi)


def gaussian_to_grid(mode, n=256, spacing=0.5, center=(0.0, 0.0)):
    """Sample a Gaussian mode onto a grid (already normalized to |n|^2)."""
    x = (np.arange(n) - (n - 1) / 2) * spacing
    X, Y = np.meshgrid(x, x)
    prof = mode.lateral_profile(X - center[0], Y - center[1])
    Fx = mode.n_pol[0] * prof
    Fy = mode.n_pol[1] * prof
    return GridMode(omega_c=mode.omega_c, gamma_c=mode.gamma_c, Fx=Fx, Fy=Fy,
                    dx=spacing, dy=spacing, L_z=mode.L_z, normalized=False)


def normalize_grid(mode, epsilon_eff, L_z_eff):
    """Scale the lateral profile so that int (|F_x|^2 + |F_y|^2) d^2r = 1.

    ``L_z_eff`` is the out-of-plane confinement length (nm), which already
    contains the effective dielectric constant; ``epsilon_eff`` is recorded
    with the mode for reference.
    """
    if not (epsilon_eff > 0 and L_z_eff > 0):
        raise ModeError("epsilon_eff and L_z_eff must be positive")
    total = _grid_integral(mode, np.abs(mode.Fx) ** 2 + np.abs(mode.Fy) ** 2)
    s = 1.0 / math.sqrt(total)
    return replace(mode, Fx=mode.Fx * s, Fy=mode.Fy * s, L_z=float(L_z_eff),
                   epsilon_eff=float(epsilon_eff), normalized=True)


def save_field_grid(mode, path):
    ny, nx = mode.shape
    # repr of Python floats round-trips exactly
    lines = [f"{nx} {ny} {float(mode.dx)!r} {float(mode.dy)!r} {float(mode.z0)!r}"]
    Fx = mode.Fx.tolist()
    Fy = mode.Fy.tolist()
    for iy in range(ny):
        for ix in range(nx):
            fx, fy = Fx[iy][ix], Fy[iy][ix]
            lines.append(f"{ix} {iy} {fx.real!r} {fx.imag!r} {fy.real!r} {fy.imag!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_field_grid(path, omega_c, gamma_c):
    """Read a field-grid file.

    Header ``nx ny dx_nm dy_nm z0_nm``, then nx*ny rows
    ``ix iy ReFx ImFx ReFy ImFy``, row-major (ix fastest). The returned
    mode is not normalized.
    """
    text = Path(path).read_text(encoding="utf-8").split("\n")
    rows = [ln.split() for ln in text if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ModeError(f"{path}: empty field file")
    try:
        nx, ny = int(rows[0][0]), int(rows[0][1])
        dx, dy, z0 = (float(v) for v in rows[0][2:5])
    except (ValueError, IndexError):
        raise ModeError(f"{path}: malformed header {' '.join(rows[0])!r}") from None
    body = rows[1:]
    if len(body) != nx * ny:
        raise ModeError(f"{path}: expected {nx * ny} data rows, found {len(body)}")
    try:
        data = np.array(body, dtype=float)
    except ValueError:
        raise ModeError(f"{path}: non-numeric data row") from None
    if data.shape[1] != 6:
        raise ModeError(f"{path}: data rows need 6 columns")
    if np.any(np.isnan(data)):
        raise ModeError(f"{path}: NaN in field data")
    ix = data[:, 0].astype(int)
    iy = data[:, 1].astype(int)
    expect_ix = np.tile(np.arange(nx), ny)
    expect_iy = np.repeat(np.arange(ny), nx)
    if not (np.array_equal(ix, expect_ix) and np.array_equal(iy, expect_iy)):
        raise ModeError(f"{path}: grid indices are not a complete row-major uniform grid")
    Fx = (data[:, 2] + 1j * data[:, 3]).reshape(ny, nx)
    Fy = (data[:, 4] + 1j * data[:, 5]).reshape(ny, nx)
    return GridMode(omega_c=omega_c, gamma_c=gamma_c, Fx=Fx, Fy=Fy, dx=dx, dy=dy, z0=z0)
