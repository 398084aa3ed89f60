"""Linear dielectric response of an exciton sheet and thin-sheet scattering.

Frequencies as hbar*omega (eV), oscillator strengths as hbar^2 f (eV^2),
half-linewidths hbar*Gamma in meV, lengths in nm.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .em_modes import valley_projections
from .units import ALPHA, HBARC

DEFAULT_THICKNESS_WS2 = 0.618  # nm


@dataclass(frozen=True)
class SusceptibilityModel:
    """Sum of Lorentz poles: poles are (hbar^2 f in eV^2, hbar*omega0 in eV, hbar*Gamma in meV)."""

    poles: tuple
    d: float = DEFAULT_THICKNESS_WS2

    def __post_init__(self):
        poles = tuple(tuple(float(v) for v in p) for p in self.poles)
        if not poles:
            raise ValueError("at least one pole is required")
        for f, w0, g in poles:
            if not (f > 0 and w0 > 0):
                raise ValueError("oscillator strengths and resonances must be positive")
            if g < 0:
                raise ValueError("linewidths must be non-negative")
        if not self.d > 0:
            raise ValueError("sheet thickness must be positive")
        object.__setattr__(self, "poles", poles)

    @classmethod
    def single(cls, f, omega0, Gamma, d=DEFAULT_THICKNESS_WS2):
        return cls(((f, omega0, Gamma),), d)


def susceptibility(model, omega):
    """chi(omega) = sum f / (omega0^2 - omega^2 - 2 i omega Gamma)."""
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise ValueError("omega must be positive")
    chi = np.zeros(w.shape, dtype=complex)
    for f, w0, g in model.poles:
        chi += f / (w0**2 - w**2 - 2j * w * g * 1e-3)
    return chi if chi.ndim else complex(chi)


def _coupling_numerator(material):
    hbar_v = HBARC * material.velocity_over_c
    return 16 * ALPHA * HBARC * hbar_v**2


def oscillator_strength(material, d, n_pol=(1.0, 0.0), omega0=None):
    """hbar^2 f in eV^2 for in-plane polarisation n_pol (unit real n gives the reduced form)."""
    if omega0 is None:
        omega0 = material.omega0
    overlap = float(np.sum(np.abs(valley_projections(n_pol)) ** 2))
    return _coupling_numerator(material) * overlap / (omega0 * material.a_B**2 * d)


def bohr_radius_from_f(f, material, d, omega0=None):
    """Invert the reduced oscillator strength (|n| = 1 in-plane) for a_B in nm."""
    if not f > 0:
        raise ValueError("oscillator strength must be positive")
    if omega0 is None:
        omega0 = material.omega0
    return math.sqrt(2 * _coupling_numerator(material) / (omega0 * f * d))


def thin_sheet_field(model, omega, E_in=1.0, green=None, n_background=1.0):
    """Total field at a sheet of thickness d: E_in / (1 - k0^2 d G chi).

    The default Green function is the homogeneous 1D one, G = i/(2 k), k = n k0.
    ``green`` may be a callable omega -> G(z0, z0, omega) in nm.
    """
    w = np.asarray(omega, dtype=float)
    k0 = w / HBARC
    G = 1j / (2 * n_background * k0) if green is None else green(w)
    return E_in / (1 - k0**2 * model.d * G * susceptibility(model, w))


def absorption_profile(model, omega):
    """1 - |E_tot/E_in|^2 for a free-standing sheet."""
    return 1 - np.abs(thin_sheet_field(model, omega)) ** 2


def resonator_green(omega, omega_c, gamma_c, L_z):
    """Single-mode resonator Green function at the sheet; k0^2 G = (omega/2)/(L_z (omega_c - i gamma_c - omega))."""
    w = np.asarray(omega, dtype=float)
    k0 = w / HBARC
    return (w / 2) / (L_z * (omega_c - 1j * gamma_c * 1e-3 - w)) / k0**2


def resonator_spectrum(model, omega, omega_c, gamma_c, L_z, n2):
    """Intracavity intensity of a resonator mode loaded by the sheet (arbitrary units).

    ``n2`` is the in-plane polarisation weight |n|^2 of the mode at the sheet.
    """
    w = np.asarray(omega, dtype=float)
    wc = omega_c - 1j * gamma_c * 1e-3
    load = (w / 2) * (model.d / L_z) * n2 * susceptibility(model, w)
    return np.abs(1.0 / (wc - w - load)) ** 2


class PeakError(ValueError):
    pass


def find_peaks(omega, y, n=2):
    """Positions of the n largest local maxima, refined by three-point quadratic interpolation."""
    w = np.asarray(omega, dtype=float)
    y = np.asarray(y, dtype=float)
    inner = np.where((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]))[0] + 1
    if inner.size < n:
        raise PeakError(f"found {inner.size} resolvable peaks, need {n}")
    top = inner[np.argsort(y[inner])[::-1][:n]]
    out = []
    for i in sorted(top):
        y0, y1, y2 = y[i - 1], y[i], y[i + 1]
        den = y0 - 2 * y1 + y2
        frac = 0.5 * (y0 - y2) / den if den != 0 else 0.0
        # uniform spacing assumed locally
        out.append(w[i] + frac * 0.5 * (w[i + 1] - w[i - 1]))
    return np.array(out)


def compare_spectra(omega, quantum, classical):
    """Max-normalise both spectra, extract the two main peaks and compare splittings."""
    q = np.asarray(quantum, dtype=float)
    c = np.asarray(classical, dtype=float)
    if q.shape != c.shape or q.shape != np.shape(omega):
        raise ValueError("spectra must share the frequency grid")
    q = q / q.max()
    c = c / c.max()
    pq = find_peaks(omega, q)
    pc = find_peaks(omega, c)
    sq = float(pq[1] - pq[0])
    sc = float(pc[1] - pc[0])
    return {
        "quantum_peaks_eV": pq.tolist(),
        "classical_peaks_eV": pc.tolist(),
        "quantum_splitting_meV": sq * 1e3,
        "classical_splitting_meV": sc * 1e3,
        "discrepancy": abs(sq - sc) / sc,
    }


def save_report(report, path):
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
