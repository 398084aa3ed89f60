"""From a material and a resonator mode to the reaction-coordinate parameters.

Prints how the light-matter coupling, the cutoff frequency and the exciton
nonlinearity change with lateral confinement, then maps the exciton
continuum of one mode onto a short chain.
"""
import math

import numpy as np

from excitonrc import em_modes, materials, spectral
from excitonrc.solvers import SystemParams

ws2 = materials.get_material("WS2")
derived = materials.derive(ws2)
print(f"WS2: M = {derived.M:.2f} m0, hbar*omega0 = {derived.omega0:.3f} eV, "
      f"hbar*S*W000 = {derived.SW000:.2f} eV nm^2")

# Linear polarisation with a 20% projection onto the valley-summed matrix element.
print("\n L (nm)   G0 (meV)   xi (meV)   W0' (meV)")
for L in (2, 4, 8, 16):
    mode = em_modes.GaussianMode(omega_c=2.01, gamma_c=3.3, L=L, L_z=200.0, n_pol=(0.2, 0.0))
    p = SystemParams.from_mode(mode, derived, resonant=True)
    print(f"{L:6.0f} {p.G0:10.3f} {p.xi:10.3f} {p.W0p:11.3f}")
print("G0 moves only through the resonance condition omega_c = Omega0; xi and W0' fall as 1/L^2.")

# Spectral density, its residual and the chain built from it.
p = SystemParams.from_mode(em_modes.GaussianMode(omega_c=2.01, gamma_c=3.3, L=4.0, L_z=200.0, n_pol=(0.2, 0.0)),
                           derived, resonant=True)
J = p.spectral_density()
Jres = spectral.residual_J(J)
x = np.array([0.5, 1.0, 2.0, 5.0])
w = p.omega0 + x * p.xi * 1e-3
print("\n(omega - omega0)/xi   J (meV)   J_res (meV)")
for xi_, Jv, Jr in zip(x, J(w) * 1e3, Jres(w) * 1e3):
    print(f"{xi_:18.1f} {Jv:9.4f} {Jr:12.4f}")

chain = spectral.chain_map(J, 5)
print("\n n   (Omega_n - omega0)/xi   G_n/xi")
for n, (Om, G) in enumerate(zip(chain.Omega, chain.G)):
    print(f"{n:2d} {(Om - p.omega0) * 1e3 / p.xi:20.4f} {G / p.xi:10.4f}")
print("Past the first link the chain follows Omega_n = omega0 + (2n+1) xi, G_n = n xi.")
print(f"first link G0/xi = {chain.G[0] / p.xi:.3f} = hbar*G0/hbar*xi = {p.G0 / p.xi:.3f}")
assert math.isclose(chain.G[0], p.G0, rel_tol=1e-9)
