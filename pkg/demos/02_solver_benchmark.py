"""Exact, Markovian and chain dynamics of one photon coupled to the exciton continuum.

The cavity starts with one photon; the exact solver treats the whole
continuum, the Markovian master equations keep only the reaction
coordinate plus a secular dissipator, and the chain adds explicit
environment modes.
"""
import numpy as np

from excitonrc import em_modes, materials, spectral, solvers
from excitonrc.solvers import SystemParams

derived = materials.derive(materials.get_material("WS2"))
t = np.linspace(0, 2000, 2001)


def params(L):
    mode = em_modes.GaussianMode(omega_c=2.01, gamma_c=3.3, L=L, L_z=200.0, n_pol=(0.2, 0.0))
    return SystemParams.from_mode(mode, derived, resonant=True)


print(" L (nm)   full       simplified  no residual")
for L in (2, 4, 8, 16):
    p = params(L)
    phi, _ = solvers.exact_single_excitation(p.spectral_density(), p.omega_c, p.gamma_c, t)
    ref = np.abs(phi) ** 2
    errs = [solvers.relative_error(solvers.markov_trajectory(p, v, t_grid=t)["n_cavity"], ref, t)
            for v in ("full", "simplified", "none")]
    print(f"{L:6.0f}   " + "   ".join(f"{e:.2e}" for e in errs))
print("The residual excitons matter at small L and fade as the confinement grows.")

p = params(4.0)
phi, _ = solvers.exact_single_excitation(p.spectral_density(), p.omega_c, p.gamma_c, t)
ref = np.abs(phi) ** 2
chain = spectral.chain_map(p.spectral_density(b=solvers.chain_cutoff(p.xi, p.omega0, 16)), 16)
print("\nchain at L = 4 nm\n  N   error     max last-site population")
for N in (1, 2, 4, 8, 16):
    tr = solvers.chain_trajectory(chain, N, p, t_grid=t, tol=1e-10)
    print(f"{N:3d}   {solvers.relative_error(tr['n_cavity'], ref, t):.2e}   {tr['n_lastchain'].max():.2e}")
