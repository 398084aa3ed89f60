"""Unit system: energies in eV, lengths in nm, times in fs.

Rates are carried as hbar*rate in eV (or meV at the public edges).
"""
from scipy import constants as _c

HBAR = 0.6582119569  # eV fs
HBARC = _c.hbar * _c.c / _c.e * 1e9  # eV nm
ME_C2 = _c.m_e * _c.c**2 / _c.e  # free electron rest energy, eV
ALPHA = _c.fine_structure
KB = _c.k / _c.e  # eV / K
C_NM_FS = _c.c * 1e9 / 1e15  # speed of light, nm / fs

# kg m/s -> eV fs / nm
MOMENTUM_SI_TO_NATURAL = 1.0 / _c.e * 1e15 / 1e9

MEV = 1e-3


def ev_to_angular(energy_ev):
    """Energy in eV -> angular frequency in rad/fs."""
    return energy_ev / HBAR


def angular_to_ev(omega):
    return omega * HBAR
