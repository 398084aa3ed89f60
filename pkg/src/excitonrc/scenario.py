"""Scenario files: TOML with unit-suffixed keys, validated before any allocation."""
from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import em_modes, materials, spectral
from .liouville import DriveSpec, PerModeFock, SpaceConfig, TotalExcitationSector
from .solvers import SystemParams
from .units import HBAR

SOLVERS = ("exact", "markov_full", "markov_simple", "markov_none", "chain", "spectrum",
           "semiclassical_compare", "benchmark", "chain_benchmark", "densities", "pulse")


class ScenarioError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class Scenario:
    raw: dict
    source: Path | None
    name: str
    solver: str
    material: materials.MaterialRecord
    mode: dict
    drive: dict
    temperature: float | None
    time: dict
    frequency: dict
    truncation: dict
    sweep: dict
    output_dir: str
    options: dict = field(default_factory=dict)

    @property
    def lengths(self):
        """Lateral confinement lengths to evaluate (nm); a single entry without a sweep."""
        if self.sweep.get("L_nm"):
            return [float(v) for v in self.sweep["L_nm"]]
        return [float(self.mode.get("L_nm", 0.0))]


def _get(section, key, problems, path, kind=float, required=True, default=None, positive=False,
         nonneg=False):
    if key not in section:
        if required:
            problems.append(f"{path}.{key}: required")
        return default
    v = section[key]
    try:
        v = kind(v)
    except (TypeError, ValueError):
        problems.append(f"{path}.{key}: expected {kind.__name__}, got {v!r}")
        return default
    if positive and not v > 0:
        problems.append(f"{path}.{key}: must be positive")
    if nonneg and v < 0:
        problems.append(f"{path}.{key}: must be non-negative")
    return v


def parse_scenario(text, source=None):
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ScenarioError([f"parse error: {err}"]) from None
    return _validate(raw, source)


def load_scenario(path):
    path = Path(path)
    if not path.is_file():
        raise ScenarioError([f"scenario file {path} does not exist"])
    return parse_scenario(path.read_text(encoding="utf-8"), source=path)


def _validate(raw, source):
    problems = []
    sc = raw.get("scenario", {})
    name = str(sc.get("name", source.stem if source else "scenario"))
    solver = sc.get("solver")
    if solver not in SOLVERS:
        problems.append(f"scenario.solver: must be one of {', '.join(SOLVERS)}, got {solver!r}")

    mat_sec = raw.get("material", {})
    material = None
    if "name" in mat_sec and len(mat_sec) == 1:
        try:
            material = materials.get_material(mat_sec["name"])
        except materials.MaterialError as err:
            problems.append(f"material.name: {err}")
    elif mat_sec:
        try:
            fields = {k: v for k, v in mat_sec.items()}
            fields.setdefault("name", "inline")
            material = materials.MaterialRecord(**fields)
        except (TypeError, materials.MaterialError) as err:
            problems.append(f"material: {err}")
    else:
        problems.append("material: required (name = ... or inline fields)")

    mode = dict(raw.get("mode", {}))
    kind = mode.get("kind", "gaussian")
    if kind not in ("gaussian", "grid"):
        problems.append(f"mode.kind: must be 'gaussian' or 'grid', got {kind!r}")
    mode["kind"] = kind
    _get(mode, "gamma_c_meV", problems, "mode", positive=True)
    if not mode.get("resonant", False):
        _get(mode, "omega_c_eV", problems, "mode", positive=True)
    if kind == "gaussian":
        _get(mode, "L_z_nm", problems, "mode", positive=True)
        if not raw.get("sweep", {}).get("L_nm"):
            _get(mode, "L_nm", problems, "mode", positive=True)
        n = mode.get("n_pol", [1.0, 0.0])
        ni = mode.get("n_pol_imag", [0.0, 0.0])
        if len(n) != 2 or len(ni) != 2:
            problems.append("mode.n_pol: needs two components")
        elif sum(a * a + b * b for a, b in zip(n, ni)) > 1 + 1e-12:
            problems.append("mode.n_pol: |n|^2 must not exceed 1")
    elif kind == "grid":
        f = mode.get("file")
        if f is None:
            problems.append("mode.file: required for grid modes")
        else:
            p = Path(f)
            if not p.is_absolute() and source is not None:
                p = source.parent / p
            if not p.is_file():
                problems.append(f"mode.file: {p} does not exist")
            mode["file"] = str(p)
        _get(mode, "epsilon_eff", problems, "mode", positive=True)
        _get(mode, "L_z_eff_nm", problems, "mode", positive=True)

    if solver == "semiclassical_compare" and kind != "gaussian":
        problems.append("mode.kind: semiclassical_compare needs a gaussian mode")

    drive = dict(raw.get("drive", {"kind": "none"}))
    dk = drive.get("kind", "none")
    if dk not in ("none", "cw", "pulse"):
        problems.append(f"drive.kind: must be none, cw or pulse, got {dk!r}")
    if dk == "cw":
        _get(drive, "F_meV", problems, "drive", nonneg=True)
    if dk == "pulse":
        if "A_meV" not in drive and "A_times_Delta" not in drive:
            problems.append("drive.A_meV or drive.A_times_Delta: required for pulses")
        if "Delta_fs" not in drive and "Delta_times_G0" not in drive:
            problems.append("drive.Delta_fs or drive.Delta_times_G0: required for pulses")
    if solver == "spectrum" or solver == "semiclassical_compare":
        if "F_meV" not in drive:
            problems.append("drive.F_meV: required for spectra")

    env = raw.get("environment", {})
    T = None
    if "temperature_K" in env:
        T = _get(env, "temperature_K", problems, "environment", nonneg=True)
        if material is not None and T is not None and not material.has_phonon_data:
            problems.append(f"environment.temperature_K: {material.name} has no phonon data")

    time = dict(raw.get("time", {}))
    if solver in ("exact", "markov_full", "markov_simple", "markov_none", "chain", "benchmark",
                  "chain_benchmark", "pulse"):
        _get(time, "t_max_fs", problems, "time", positive=True)
        npts = _get(time, "n_points", problems, "time", kind=int, required=False, default=1001)
        if npts is not None and npts < 2:
            problems.append("time.n_points: must be at least 2")

    freq = dict(raw.get("frequency", {}))
    trunc = dict(raw.get("truncation", {}))
    if solver in ("chain", "pulse") or solver == "chain_benchmark":
        if solver == "chain_benchmark":
            if not trunc.get("chain_N_list"):
                problems.append("truncation.chain_N_list: required")
        else:
            N = _get(trunc, "chain_N", problems, "truncation", kind=int, required=solver == "chain",
                     default=0)
            if N is not None and not 0 <= N <= 64:
                problems.append("truncation.chain_N: must lie in [0, 64]")
    if "fock_cutoff" in trunc:
        _get(trunc, "fock_cutoff", problems, "truncation", kind=int, positive=True)

    sweep = dict(raw.get("sweep", {}))
    for v in sweep.get("L_nm", []):
        if not (isinstance(v, (int, float)) and v > 0):
            problems.append(f"sweep.L_nm: entries must be positive numbers, got {v!r}")

    out = raw.get("output", {})
    output_dir = str(out.get("dir", f"out/{name}"))

    if problems:
        raise ScenarioError(problems)
    return Scenario(raw=raw, source=source, name=name, solver=solver, material=material, mode=mode,
                    drive=drive, temperature=T, time=time, frequency=freq, truncation=trunc,
                    sweep=sweep, output_dir=output_dir, options=dict(raw.get("options", {})))


def build_mode(scn, L=None, omega_c=None):
    m = scn.mode
    gamma_c = float(m["gamma_c_meV"])
    wc = omega_c if omega_c is not None else float(m.get("omega_c_eV", 2.0))
    if m["kind"] == "gaussian":
        n = [complex(a, b) for a, b in zip(m.get("n_pol", [1.0, 0.0]), m.get("n_pol_imag", [0.0, 0.0]))]
        return em_modes.GaussianMode(omega_c=wc, gamma_c=gamma_c, L=float(L if L is not None else m["L_nm"]),
                                     L_z=float(m["L_z_nm"]), n_pol=tuple(n))
    grid = em_modes.load_field_grid(m["file"], wc, gamma_c)
    return em_modes.normalize_grid(grid, float(m["epsilon_eff"]), float(m["L_z_eff_nm"]))


def resolve(scn, L=None):
    """(mode, derived material, SystemParams, PhononRates or None) for one sweep point."""
    derived = materials.derive(scn.material)
    mode = build_mode(scn, L)
    resonant = bool(scn.mode.get("resonant", False))
    params = SystemParams.from_mode(mode, derived, resonant=resonant)
    if resonant:
        mode = replace(mode, omega_c=params.omega_c)
    if not scn.options.get("nonlinear", True):
        params = replace(params, W0p=0.0)
    rates = materials.phonon_rates(scn.material, scn.temperature) if scn.temperature is not None else None
    return mode, derived, params, rates


def grid_spectral_density(mode, derived, n_omega=256, n_theta=32):
    """Tabulated J of a grid mode up to the grid Nyquist wavevector."""
    k_max = min(mode.k_nyquist) * (1 - 1e-9)  # stay inside the Nyquist bound after rounding
    beta = 0.5 * derived.kinetic_scale
    grid = spectral.log_grid(derived.omega0, derived.omega0 + beta * k_max**2, n_omega)
    return spectral.numeric_J(lambda k: em_modes.coupling_gk(mode, derived, k), derived, k_max,
                              grid=grid, n_theta=n_theta)


def build_drive(scn, params):
    d = scn.drive
    kind = d.get("kind", "none")
    wd = d.get("omega_d_eV", "Omega0")
    if wd == "Omega0":
        wd = params.Omega0
    elif wd == "omega_c":
        wd = params.omega_c
    if kind == "cw":
        return DriveSpec.cw(float(d["F_meV"]), float(wd))
    if kind == "pulse":
        if "Delta_fs" in d:
            Delta = float(d["Delta_fs"])
        else:
            Delta = float(d["Delta_times_G0"]) * HBAR / (params.G0 * 1e-3)
        if "A_meV" in d:
            A = float(d["A_meV"])
        else:
            A = float(d["A_times_Delta"]) * HBAR / Delta * 1e3
        t0 = d.get("t0_fs")
        return DriveSpec.pulse(A, Delta, float(wd), None if t0 is None else float(t0))
    return DriveSpec()


def time_grid(scn):
    import numpy as np

    return np.linspace(0.0, float(scn.time["t_max_fs"]), int(scn.time.get("n_points", 1001)))


def space_config(scn, n_chain, driven):
    """Truncation for a run, from the scenario (no allocation)."""
    t = scn.truncation
    if "max_total_quanta" in t:
        return SpaceConfig.cavity_chain(n_chain, TotalExcitationSector(int(t["max_total_quanta"])))
    if not driven and scn.solver != "pulse":
        return SpaceConfig.cavity_chain(n_chain, TotalExcitationSector(1))
    cut = int(t.get("fock_cutoff", 4))
    return SpaceConfig.cavity_chain(n_chain, PerModeFock((cut,) * (n_chain + 2)))


def chain_depths(scn):
    if scn.solver == "chain_benchmark":
        return [int(v) for v in scn.truncation["chain_N_list"]]
    if scn.solver in ("chain", "pulse"):
        return [int(scn.truncation.get("chain_N", 0))]
    if scn.solver in ("exact", "spectrum", "semiclassical_compare", "densities"):
        return []
    return [0]


def summary(scn):
    """Resolved derived quantities per sweep point, without allocating any state space."""
    rows = []
    for L in scn.lengths:
        mode, derived, params, rates = resolve(scn, L if scn.mode["kind"] == "gaussian" else None)
        row = {
            "L_nm": L if scn.mode["kind"] == "gaussian" else None,
            "G0_meV": params.G0,
            "xi_meV": params.xi,
            "Omega0_minus_omega0_meV": (params.Omega0 - params.omega0) * 1e3,
            "W0p_meV": params.W0p,
            "omega_c_eV": params.omega_c,
            "gamma_x_meV": None if rates is None else rates.gamma_x,
            "gamma_x_prime_meV": None if rates is None else rates.gamma_x_prime,
        }
        driven = scn.drive.get("kind", "none") != "none"
        dims = {}
        for N in chain_depths(scn):
            cfg = space_config(scn, N, driven)
            dims[N] = {"dimension": cfg.dimension, "description": cfg.describe()}
        row["spaces"] = dims
        rows.append(row)
    return rows
