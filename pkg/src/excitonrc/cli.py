"""Command-line scenario runner.

    excitonrc run <file>          run a scenario, write CSV/JSON artifacts
    excitonrc validate <file>     print resolved parameters, no computation
    excitonrc presets list
    excitonrc presets export <name> [-o file]

Exit codes: 0 ok, 1 validation error, 2 numerical failure. The output
directory named in a scenario can be overridden with EXCITONRC_OUTPUT_DIR.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, materials, semiclassical, spectral
from .liouville import PropagationError, SpaceError, polariton_decomposition, save_trajectory_csv
from .scenario import (ScenarioError, build_drive, grid_spectral_density, load_scenario, resolve,
                       space_config, summary, time_grid)
from .solvers import (LinearityError, chain_cutoff, chain_trajectory, exact_single_excitation,
                      excitation_spectrum, markov_trajectory, relative_error, save_spectrum_csv)

OUTPUT_ENV = "EXCITONRC_OUTPUT_DIR"
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2
NUMERICAL_ERRORS = (PropagationError, LinearityError, spectral.SpectralError, semiclassical.PeakError,
                    SpaceError, FloatingPointError, np.linalg.LinAlgError)


def preset_names():
    files = resources.files("excitonrc").joinpath("presets").iterdir()
    return sorted(p.name[:-5] for p in files if p.name.endswith(".toml"))


def preset_text(name):
    if name not in preset_names():
        raise ScenarioError([f"unknown preset {name!r}; available: {', '.join(preset_names())}"])
    return resources.files("excitonrc").joinpath(f"presets/{name}.toml").read_text(encoding="utf-8")


def _fmt(x):
    return "%.17g" % x


def _write_table(path, header, rows):
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in r))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _tag(L):
    return ("L%g" % L).replace(".", "p")


def _amplitude_trajectory(t, phi):
    from .liouville import Trajectory

    n = np.abs(phi) ** 2
    return Trajectory(t=t, observables={"n_cavity": n}, trace_error=np.zeros_like(t),
                      hermiticity_error=np.zeros_like(t), min_eigenvalue=np.full_like(t, np.nan))


def _exact(params, t):
    J = params.spectral_density()
    phi, err = exact_single_excitation(J, params.omega_c, params.gamma_c, t)
    return _amplitude_trajectory(t, phi), err


def _upper_rate(params):
    """hbar*Gamma_res at the lab-frame upper polariton, meV."""
    dec = polariton_decomposition(params.G0, params.omega_c - params.Omega0, params.omega_c,
                                  params.Omega0, 0.0)
    return spectral.markov_rate(params.residual_density(), dec.omega_plus, 0.0)


def run_scenario(scn, outdir, log=print):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    t = None
    solver = scn.solver
    artifacts = []
    tables = {}

    def out(name):
        artifacts.append(name)
        return outdir / name

    grid_mode = scn.mode["kind"] != "gaussian"
    for L in scn.lengths:
        Lp = None if grid_mode else L
        mode, derived, params, rates = resolve(scn, Lp)
        if grid_mode and solver != "semiclassical_compare":
            params = replace(params, J=grid_spectral_density(mode, derived))
        tag = "grid" if grid_mode else _tag(L)
        drive = build_drive(scn, params)
        driven = drive.kind != "none"
        if solver in ("exact", "markov_full", "markov_simple", "markov_none", "chain", "benchmark",
                      "chain_benchmark", "pulse"):
            t = time_grid(scn)
        if solver == "exact":
            traj, err = _exact(params, t)
            save_trajectory_csv(traj, out(f"exact_{tag}.csv"))
            log(f"{tag}: exact solver step-halving estimate {err:.2e}")
        elif solver.startswith("markov_"):
            variant = {"markov_full": "full", "markov_simple": "simplified", "markov_none": "none"}[solver]
            cfg = space_config(scn, 0, driven)
            traj = markov_trajectory(params, variant, drive, rates, t, config=cfg,
                                     initial="vacuum" if driven else "photon")
            save_trajectory_csv(traj, out(f"{solver}_{tag}.csv"))
        elif solver == "chain":
            N = int(scn.truncation["chain_N"])
            chain = spectral.chain_map(params.spectral_density(b=_chain_b(params, N)), N)
            spectral.save_chain_csv(chain, out(f"chain_{tag}.csv"))
            cfg = space_config(scn, N, driven)
            traj = chain_trajectory(chain, N, params, drive, rates, t, config=cfg,
                                    initial="vacuum" if driven else "photon")
            save_trajectory_csv(traj, out(f"chain{N}_{tag}.csv"))
        elif solver == "benchmark":
            ref, _ = _exact(params, t)
            save_trajectory_csv(ref, out(f"exact_{tag}.csv"))
            row = [L, params.G0, params.xi]
            for variant in ("full", "simplified", "none"):
                traj = markov_trajectory(params, variant, None, rates, t)
                save_trajectory_csv(traj, out(f"markov_{variant}_{tag}.csv"))
                row.append(relative_error(traj["n_cavity"], ref["n_cavity"], t))
            row.append(_upper_rate(params))
            tables.setdefault("errors.csv", (["L_nm", "G0_meV", "xi_meV", "error_full",
                                              "error_simplified", "error_none", "Gamma_res_upper_meV"], []))[1].append(row)
        elif solver == "chain_benchmark":
            ref, _ = _exact(params, t)
            save_trajectory_csv(ref, out(f"exact_{tag}.csv"))
            Ns = [int(v) for v in scn.truncation["chain_N_list"]]
            Nmax = max(Ns)
            chain = spectral.chain_map(params.spectral_density(b=_chain_b(params, Nmax)), Nmax)
            spectral.save_chain_csv(chain, out(f"chain_{tag}.csv"))
            mk = markov_trajectory(params, "simplified", None, rates, t)
            e_mk = relative_error(mk["n_cavity"], ref["n_cavity"], t)
            rows = tables.setdefault(f"chain_errors_{tag}.csv",
                                     (["N", "error", "max_last_site", "markov_simplified_error"], []))[1]
            for N in Ns:
                traj = chain_trajectory(chain, N, params, None, rates, t, tol=1e-10)
                save_trajectory_csv(traj, out(f"chain{N}_{tag}.csv"))
                rows.append([N, relative_error(traj["n_cavity"], ref["n_cavity"], t),
                             float(traj["n_lastchain"].max()), e_mk])
        elif solver == "densities":
            J = params.spectral_density()
            b = J.b
            Jres = spectral.residual_J(J)
            spectral.save_spectral_csv(J, out(f"J_{tag}.csv"), grid=Jres.omega)
            spectral.save_spectral_csv(Jres, out(f"Jres_{tag}.csv"))
            tables.setdefault("rates.csv", (["L_nm", "G0_meV", "xi_meV", "Gamma_res_upper_meV",
                                             "support_max_eV"], []))[1].append(
                [L, params.G0, params.xi, _upper_rate(params), b])
        elif solver == "pulse":
            N = int(scn.truncation.get("chain_N", 0))
            chain = spectral.chain_map(params.spectral_density(b=_chain_b(params, N)), N) if N else \
                spectral.ChainParams([params.Omega0], [params.G0])
            cfg = space_config(scn, N, True)
            compare = scn.options.get("compare", "nonlinear")
            runs = {"full": chain_trajectory(chain, N, params, drive, rates, t, config=cfg, initial="vacuum")}
            if compare == "nonlinear":
                runs["linear"] = chain_trajectory(chain, N, params, drive, rates, t, W0p=0.0, config=cfg,
                                                  initial="vacuum")
            elif compare == "residual" and N:
                cfg0 = space_config(scn, 0, True)
                runs["no_residual"] = chain_trajectory(chain, 0, params, drive, rates, t, config=cfg0,
                                                       initial="vacuum")
            rows = tables.setdefault("pulse_peaks.csv", (["L_nm", "run", "W0p_meV", "peak_n_cavity",
                                                          "peak_n_rc"], []))[1]
            for key, traj in runs.items():
                save_trajectory_csv(traj, out(f"pulse_{key}_{tag}.csv"))
                rows.append([L, key, params.W0p if key != "linear" else 0.0,
                             float(traj["n_cavity"].max()), float(traj["n_rc"].max())])
        elif solver in ("spectrum", "semiclassical_compare"):
            w = _frequency_grid(scn, params)
            F = float(scn.drive["F_meV"])
            n_ss = excitation_spectrum(params, w, F, rates=rates,
                                       variant=scn.options.get("variant", "simplified"))
            save_spectrum_csv(w, n_ss, out(f"spectrum_{tag}.csv"))
            if solver == "semiclassical_compare":
                d_nm = float(scn.options.get("sheet_thickness_nm", semiclassical.DEFAULT_THICKNESS_WS2))
                Gamma = rates.total if rates is not None else float(scn.options.get("Gamma_x_meV", 0.0))
                f = semiclassical.oscillator_strength(derived, d_nm)
                model = semiclassical.SusceptibilityModel.single(f, derived.omega0, Gamma, d_nm)
                n2 = float(np.vdot(mode.n_pol, mode.n_pol).real)
                cl = semiclassical.resonator_spectrum(model, w, params.omega_c, params.gamma_c, mode.L_z, n2)
                save_spectrum_csv(w, cl, out(f"classical_{tag}.csv"))
                report = semiclassical.compare_spectra(w, n_ss, cl)
                report.update(L_nm=L, oscillator_strength_eV2=f, Gamma_x_meV=Gamma)
                semiclassical.save_report(report, out(f"comparison_{tag}.json"))
                log(f"{tag}: splitting quantum {report['quantum_splitting_meV']:.4f} meV, classical "
                    f"{report['classical_splitting_meV']:.4f} meV, discrepancy {report['discrepancy']:.2e}")
    for name, (header, rows) in tables.items():
        _write_table(out(name), header, rows)
    meta = {
        "tool": "excitonrc",
        "version": __version__,
        "scenario": scn.raw,
        "resolved": summary(scn),
        "artifacts": sorted(set(artifacts)),
    }
    (outdir / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n",
                                          encoding="utf-8")
    log(f"wrote {len(set(artifacts)) + 1} files to {outdir}")
    return outdir


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    return str(o)


def _chain_b(params, N):
    # tabulated densities keep their own support
    return None if params.xi is None else chain_cutoff(params.xi, params.omega0, N)


def _frequency_grid(scn, params):
    f = scn.frequency
    centre = float(f.get("center_eV", params.Omega0))
    span = float(f.get("span_G0", 4.0)) * params.G0 * 1e-3
    n = int(f.get("n_points", 401))
    return np.linspace(centre - span, centre + span, n)


def _print_summary(scn, stream):
    print(f"scenario {scn.name}: solver {scn.solver}, material {scn.material.name}", file=stream)
    for row in summary(scn):
        head = "" if row["L_nm"] is None else f"L = {row['L_nm']:g} nm: "
        parts = [f"hbar*G0 = {row['G0_meV']:.4g} meV"]
        if row["xi_meV"] is not None:
            parts.append(f"hbar*xi = {row['xi_meV']:.4g} meV")
        parts.append(f"Omega0 - omega0 = {row['Omega0_minus_omega0_meV']:.4g} meV")
        parts.append(f"hbar*W0' = {row['W0p_meV']:.4g} meV")
        if row["gamma_x_meV"] is not None:
            parts.append(f"hbar*gamma_x = {row['gamma_x_meV']:.4g} meV")
            parts.append(f"hbar*gamma_x' = {row['gamma_x_prime_meV']:.4g} meV")
        print(head + ", ".join(parts), file=stream)
        for N, sp in row["spaces"].items():
            print(f"    space (chain N = {N}): {sp['description']}", file=stream)


def _build_parser():
    p = argparse.ArgumentParser(prog="excitonrc", description="Exciton reaction-coordinate scenario runner")
    p.add_argument("--version", action="version", version=f"excitonrc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("file")
    r.add_argument("--output-dir", help=f"override the output directory (also ${OUTPUT_ENV})")
    v = sub.add_parser("validate", help="check a scenario and print derived quantities")
    v.add_argument("file")
    pr = sub.add_parser("presets", help="bundled scenarios")
    psub = pr.add_subparsers(dest="action", required=True)
    psub.add_parser("list")
    ex = psub.add_parser("export")
    ex.add_argument("name")
    ex.add_argument("-o", "--output", help="write to this file instead of stdout")
    return p


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "presets":
            if args.action == "list":
                for name in preset_names():
                    print(name, file=stdout)
                return EXIT_OK
            text = preset_text(args.name)
            if args.output:
                Path(args.output).write_text(text, encoding="utf-8")
            else:
                stdout.write(text)
            return EXIT_OK
        scn = load_scenario(args.file)
        if args.command == "validate":
            _print_summary(scn, stdout)
            return EXIT_OK
        outdir = args.output_dir or os.environ.get(OUTPUT_ENV) or scn.output_dir
        _print_summary(scn, stdout)
        run_scenario(scn, outdir, log=lambda m: print(m, file=stdout))
        return EXIT_OK
    except ScenarioError as err:
        for prob in err.problems:
            print(f"error: {prob}", file=stderr)
        return EXIT_VALIDATION
    except materials.MaterialError as err:
        print(f"error: {err}", file=stderr)
        return EXIT_VALIDATION
    except NUMERICAL_ERRORS as err:
        print(f"numerical failure ({type(err).__name__}): {err}", file=stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
