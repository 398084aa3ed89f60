"""Linear spectra from the quantum master equation and from classical sheet optics.

Both sides start from the same material record: the quantum side through
the reaction-coordinate coupling, the classical side through the exciton
oscillator strength of a sheet of finite thickness.
"""
import numpy as np

from excitonrc import em_modes, materials, semiclassical, solvers
from excitonrc.solvers import SystemParams

ws2 = materials.get_material("WS2")
derived = materials.derive(ws2)
rates = materials.phonon_rates(ws2, 4)
mode = em_modes.GaussianMode(omega_c=2.01, gamma_c=3.3, L=20.0, L_z=100.0, n_pol=(0.3, 0.0))
p = SystemParams.from_mode(mode, derived, resonant=True)

w = np.linspace(p.Omega0 - 4 * p.G0 * 1e-3, p.Omega0 + 4 * p.G0 * 1e-3, 401)
quantum = solvers.excitation_spectrum(p, w, 0.036, rates=rates)

d = semiclassical.DEFAULT_THICKNESS_WS2
f = semiclassical.oscillator_strength(derived, d)
print(f"oscillator strength hbar^2 f = {f:.3f} eV^2 -> a_B = "
      f"{semiclassical.bohr_radius_from_f(f, derived, d):.3f} nm")
model = semiclassical.SusceptibilityModel.single(f, derived.omega0, rates.total, d)
n2 = float(np.vdot(mode.n_pol, mode.n_pol).real)
classical = semiclassical.resonator_spectrum(model, w, p.omega_c, p.gamma_c, mode.L_z, n2)

rep = semiclassical.compare_spectra(w, quantum, classical)
print(f"quantum splitting   {rep['quantum_splitting_meV']:.3f} meV")
print(f"classical splitting {rep['classical_splitting_meV']:.3f} meV")
print(f"relative discrepancy {rep['discrepancy']:.2e}  (2 G0 = {2 * p.G0:.3f} meV)")
