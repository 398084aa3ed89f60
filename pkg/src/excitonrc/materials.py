"""Monolayer TMD parameter database and derived excitonic quantities."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from scipy.constants import m_e as _M0

from .units import HBARC, KB, ME_C2, MOMENTUM_SI_TO_NATURAL

_FIELDS = ("name", "m_h", "m_e", "E_g", "E_b", "a_B", "V_script",
           "gamma0_nr", "c1", "c2", "Omega_ph", "c2_dephasing")
_PHONON_FIELDS = ("gamma0_nr", "c1", "c2", "Omega_ph")

# hbar*S*W000 ~ 2.07 E_b a_B^2, variational result for the 1s exciton
EXCHANGE_PREFACTOR = 2.07


class MaterialError(ValueError):
    pass


@dataclass(frozen=True)
class MaterialRecord:
    """Parameters of one 2D semiconductor.

    Masses in units of m0, energies in eV, ``a_B`` in nm, ``V_script`` in m/s.
    Phonon coefficients follow the database units (meV, ueV/K, meV, meV) and
    are ``None`` when unknown.
    """

    name: str
    m_e: float
    m_h: float
    E_g: float
    E_b: float
    a_B: float
    V_script: float
    gamma0_nr: float | None = None
    c1: float | None = None
    c2: float | None = None
    Omega_ph: float | None = None
    c2_dephasing: float = 0.0

    def __post_init__(self):
        for key in ("m_e", "m_h", "E_g", "E_b", "a_B", "V_script"):
            v = getattr(self, key)
            if not (np.isfinite(v) and v > 0):
                raise MaterialError(f"{self.name}: {key} must be positive, got {v}")
        if self.E_b >= self.E_g:
            raise MaterialError(f"{self.name}: E_b={self.E_b} must be below E_g={self.E_g}")
        for key in _PHONON_FIELDS + ("c2_dephasing",):
            v = getattr(self, key)
            if v is not None and (not np.isfinite(v) or v < 0):
                raise MaterialError(f"{self.name}: {key} must be non-negative, got {v}")
        if self.Omega_ph is not None and self.Omega_ph <= 0:
            raise MaterialError(f"{self.name}: Omega_ph must be positive")

    @property
    def has_phonon_data(self):
        return all(getattr(self, k) is not None for k in _PHONON_FIELDS)


@dataclass(frozen=True)
class DerivedMaterial:
    """Quantities derived from a :class:`MaterialRecord`.

    ``M`` in m0, ``omega0`` as hbar*omega0 in eV, ``p_cv`` (valley-summed
    magnitude sqrt(2)*m0*V) in eV fs/nm, ``SW000`` as hbar*S*W000 in eV nm^2.
    """

    material: MaterialRecord
    M: float
    omega0: float
    p_cv: float
    SW000: float

    @property
    def a_B(self):
        return self.material.a_B

    @property
    def velocity_over_c(self):
        return self.material.V_script / 299792458.0

    @property
    def kinetic_scale(self):
        """hbar^2/M in eV nm^2."""
        return HBARC**2 / (self.M * ME_C2)


@dataclass(frozen=True)
class PhononRates:
    """Phonon-induced exciton decay and pure dephasing (hbar*rate, meV) at T (K)."""

    gamma_x: float
    gamma_x_prime: float
    T: float

    @property
    def total(self):
        return self.gamma_x + self.gamma_x_prime


def _parse_value(token, name, column, lineno):
    token = token.strip()
    if token == "":
        return None
    try:
        return float(token)
    except ValueError:
        raise MaterialError(f"line {lineno}: column {column} of {name!r} is not a number: {token!r}") from None


def parse_materials(text):
    records = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = [t.strip() for t in line.split(",")]
        if len(tokens) not in (len(_FIELDS) - 1, len(_FIELDS)):
            raise MaterialError(f"line {lineno}: expected {len(_FIELDS)} fields, got {len(tokens)}")
        name = tokens[0]
        values = {f: _parse_value(t, name, f, lineno) for f, t in zip(_FIELDS[1:], tokens[1:])}
        for key in ("m_h", "m_e", "E_g", "E_b", "a_B", "V_script"):
            if values[key] is None:
                raise MaterialError(f"line {lineno}: {name} is missing required field {key}")
        if values.get("c2_dephasing") is None:
            values["c2_dephasing"] = 0.0
        records[name] = MaterialRecord(name=name, **values)
    return records


def load_materials(path=None):
    """Read a material database file; the bundled one when ``path`` is None."""
    if path is None:
        return dict(_bundled())
    return parse_materials(Path(path).read_text(encoding="utf-8"))


@lru_cache(maxsize=1)
def _bundled():
    text = resources.files("excitonrc").joinpath("data/materials.csv").read_text(encoding="utf-8")
    return tuple(parse_materials(text).items())


def get_material(name, path=None):
    db = load_materials(path)
    try:
        return db[name]
    except KeyError:
        raise MaterialError(f"unknown material {name!r}; available: {', '.join(sorted(db))}") from None


def format_material(record):
    """One database line for ``record`` (inverse of :func:`parse_materials`)."""
    out = [record.name]
    for key in _FIELDS[1:]:
        v = getattr(record, key)
        out.append("" if v is None else repr(float(v)))
    return ", ".join(out)


def derive(material):
    M = material.m_e + material.m_h
    omega0 = material.E_g - material.E_b
    p_cv = math.sqrt(2.0) * _M0 * material.V_script * MOMENTUM_SI_TO_NATURAL
    SW000 = EXCHANGE_PREFACTOR * material.E_b * material.a_B**2
    return DerivedMaterial(material=material, M=M, omega0=omega0, p_cv=p_cv, SW000=SW000)


def _bose(energy_mev, T):
    # exp overflows far below the phonon energy; the occupation is zero there
    if T == 0 or energy_mev * 1e-3 > 700 * KB * T:
        return 0.0
    return 1.0 / math.expm1(energy_mev * 1e-3 / (KB * T))


def phonon_rates(material, T):
    """Temperature-dependent exciton decay and dephasing.

    gamma_x = gamma0_nr + c2 n(T) and gamma_x' = c1 T (+ c2_dephasing n(T)),
    with n(T) the Bose factor of the intervalley phonon energy.
    """
    if T < 0:
        raise ValueError(f"temperature must be non-negative, got {T} K")
    if not material.has_phonon_data:
        raise MaterialError(f"{material.name} has no phonon broadening coefficients")
    n = _bose(material.Omega_ph, T)
    gamma_x = material.gamma0_nr + material.c2 * n
    gamma_x_prime = material.c1 * 1e-3 * T + material.c2_dephasing * n
    return PhononRates(gamma_x=gamma_x, gamma_x_prime=gamma_x_prime, T=float(T))


def exciton_dispersion(derived, k):
    """Exciton energy hbar*omega_k in eV at centre-of-mass wavevector k (1/nm)."""
    k = np.asarray(k, dtype=float)
    return derived.omega0 + 0.5 * derived.kinetic_scale * k**2


def exciton_wavefunction_q(q, a_B):
    """Hydrogenic 1s relative-motion amplitude times sqrt(S) (units of nm)."""
    q = np.asarray(q, dtype=float)
    return math.sqrt(8 * math.pi) * a_B / (1 + (q * a_B) ** 2) ** 1.5
