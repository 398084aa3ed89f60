"""Truncated bosonic spaces, system Hamiltonians, Lindblad generators and propagation.

Operators are energies in eV (hbar times the frequency); collapse rates are
carried as hbar*rate in eV. Time is in fs. Density matrices are dense numpy
arrays over the configured Fock basis.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg, sparse

from .units import HBAR

DEFAULT_FOCK_CUTOFF = 4
DEFAULT_MAX_DIM = 4000
EIGEN_CLUSTER_TOL = 1e-9
POSITIVITY_FLOOR = -1e-7


class SpaceError(ValueError):
    pass


class PropagationError(RuntimeError):
    pass


# truncation schemes
@dataclass(frozen=True)
class PerModeFock:
    cutoffs: tuple  # max occupation per mode

    def __post_init__(self):
        object.__setattr__(self, "cutoffs", tuple(int(c) for c in self.cutoffs))
        if any(c < 0 for c in self.cutoffs):
            raise SpaceError("Fock cutoffs must be non-negative")


@dataclass(frozen=True)
class TotalExcitationSector:
    max_total: int

    def __post_init__(self):
        if self.max_total < 0:
            raise SpaceError("max_total must be non-negative")


@dataclass(frozen=True)
class SpaceConfig:
    """Mode list (cavity 'a', reaction coordinate 'B0', chain 'B1'..'Bn') plus truncation."""

    modes: tuple
    truncation: object
    max_dim: int = DEFAULT_MAX_DIM

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if len(set(self.modes)) != len(self.modes):
            raise SpaceError("mode names must be unique")
        if isinstance(self.truncation, PerModeFock) and len(self.truncation.cutoffs) != len(self.modes):
            raise SpaceError("one Fock cutoff per mode is required")

    @classmethod
    def cavity_chain(cls, n_chain=0, truncation=None, max_dim=DEFAULT_MAX_DIM):
        modes = ("a",) + tuple(f"B{i}" for i in range(n_chain + 1))
        if truncation is None:
            truncation = TotalExcitationSector(1)
        elif isinstance(truncation, int):
            truncation = PerModeFock((truncation,) * len(modes))
        return cls(modes, truncation, max_dim)

    @property
    def dimension(self):
        """Basis size, computed without building the basis."""
        m = len(self.modes)
        if isinstance(self.truncation, PerModeFock):
            return math.prod(c + 1 for c in self.truncation.cutoffs)
        return math.comb(m + self.truncation.max_total, m)

    def describe(self):
        if isinstance(self.truncation, TotalExcitationSector):
            m = len(self.modes)
            top = math.comb(m + self.truncation.max_total - 1, m - 1)
            k = self.truncation.max_total
            return (f"{self.dimension} states ({top} with exactly {k} "
                    f"{'quantum' if k == 1 else 'quanta'}) over {m} modes")
        return f"{self.dimension} states, Fock cutoffs {self.truncation.cutoffs}"

    def index(self, name):
        try:
            return self.modes.index(name)
        except ValueError:
            raise SpaceError(f"no mode {name!r} in {self.modes}") from None


class Space:
    """Concrete basis and ladder operators for a :class:`SpaceConfig`."""

    def __init__(self, config):
        dim = config.dimension
        if dim > config.max_dim:
            raise SpaceError(f"space dimension {dim} exceeds the budget {config.max_dim}")
        self.config = config
        m = len(config.modes)
        if isinstance(config.truncation, PerModeFock):
            states = list(itertools.product(*(range(c + 1) for c in config.truncation.cutoffs)))
        else:
            N = config.truncation.max_total
            states = list(_bounded_compositions(m, N))
            states.sort(key=lambda s: (sum(s), tuple(-x for x in s)))
        self.states = np.array(states, dtype=int).reshape(len(states), m)
        self.lookup = {tuple(s): i for i, s in enumerate(states)}
        self._ops = {}

    @property
    def dim(self):
        return len(self.states)

    def annihilation(self, name):
        """Sparse annihilation operator of mode ``name`` (truncated)."""
        if name in self._ops:
            return self._ops[name]
        j = self.config.index(name)
        rows, cols, vals = [], [], []
        for col, s in enumerate(self.states):
            n = s[j]
            if n == 0:
                continue
            t = s.copy()
            t[j] -= 1
            row = self.lookup.get(tuple(t))
            if row is not None:
                rows.append(row)
                cols.append(col)
                vals.append(math.sqrt(n))
        op = sparse.csr_matrix((vals, (rows, cols)), shape=(self.dim, self.dim), dtype=complex)
        self._ops[name] = op
        return op

    def number(self, name):
        j = self.config.index(name)
        return sparse.diags(self.states[:, j].astype(complex), format="csr")

    def total_number(self):
        return sparse.diags(self.states.sum(axis=1).astype(complex), format="csr")

    def basis_state(self, occupations):
        occ = tuple(int(occupations.get(m, 0)) for m in self.config.modes)
        try:
            i = self.lookup[occ]
        except KeyError:
            raise SpaceError(f"occupation {occ} is outside the truncated space") from None
        rho = np.zeros((self.dim, self.dim), dtype=complex)
        rho[i, i] = 1.0
        return rho

    def vacuum(self):
        return self.basis_state({})


def _bounded_compositions(m, total):
    """All occupation tuples of length m with sum <= total."""
    if m == 0:
        yield ()
        return
    for first in range(total + 1):
        for rest in _bounded_compositions(m - 1, total - first):
            yield (first,) + rest


@dataclass(frozen=True)
class DriveSpec:
    """Coherent drive hbar F(t) (a + a^dagger) on the cavity in the frame rotating at omega_d.

    kind: 'none', 'cw' (F in meV) or 'pulse' (A in meV, Delta and t0 in fs).
    """

    kind: str = "none"
    omega_d: float | None = None  # eV
    F: float = 0.0  # meV
    A: float = 0.0  # meV
    Delta: float = 1.0  # fs
    t0: float | None = None  # fs; defaults to 3 Delta

    def __post_init__(self):
        if self.kind not in ("none", "cw", "pulse"):
            raise ValueError(f"unknown drive kind {self.kind!r}")
        if self.F < 0 or self.A < 0:
            raise ValueError("drive amplitudes must be non-negative")
        if not self.Delta > 0:
            raise ValueError("pulse width Delta must be positive")
        if self.kind != "none" and self.omega_d is None:
            raise ValueError("driven runs need omega_d")
        if self.kind == "pulse" and self.t0 is None:
            object.__setattr__(self, "t0", 3.0 * self.Delta)

    @classmethod
    def cw(cls, F, omega_d):
        return cls("cw", omega_d=omega_d, F=F)

    @classmethod
    def pulse(cls, A, Delta, omega_d, t0=None):
        return cls("pulse", omega_d=omega_d, A=A, Delta=Delta, t0=t0)

    @property
    def is_time_dependent(self):
        return self.kind == "pulse"

    def amplitude(self, t):
        """hbar F(t) in eV."""
        if self.kind == "cw":
            return self.F * 1e-3
        if self.kind == "pulse":
            return self.A * 1e-3 * math.exp(-((t - self.t0) / self.Delta) ** 2)
        return 0.0

    def frame(self, default):
        return default if self.omega_d is None else self.omega_d


@dataclass
class Liouvillian:
    """Lindblad generator: H0 + f(t) X plus (hbar*rate, L) collapse pairs."""

    space: Space
    H0: np.ndarray
    collapse: list = field(default_factory=list)
    X: np.ndarray | None = None
    drive: DriveSpec | None = None

    def __post_init__(self):
        self.H0 = _dense(self.H0)
        if self.X is not None:
            self.X = _dense(self.X)
        self.collapse = [(float(r), _dense(L)) for r, L in self.collapse if r != 0]
        if any(r < 0 for r, _ in self.collapse):
            raise SpaceError("collapse rates must be non-negative")
        loss = sum((r * (L.conj().T @ L) for r, L in self.collapse), np.zeros_like(self.H0))
        self._Heff0 = self.H0 - 0.5j * loss
        self._jumps = [(r / HBAR, L, L.conj().T) for r, L in self.collapse]

    @property
    def dim(self):
        return self.H0.shape[0]

    def hamiltonian(self, t=0.0):
        if self.X is None or self.drive is None:
            return self.H0
        return self.H0 + self.drive.amplitude(t) * self.X

    def rhs(self, t, rho):
        Heff = self._Heff0
        if self.X is not None and self.drive is not None:
            Heff = Heff + self.drive.amplitude(t) * self.X
        A = Heff @ rho
        out = (-1j / HBAR) * (A - A.conj().T)
        for r, L, Ld in self._jumps:
            out += r * (L @ rho @ Ld)
        return out

    def superoperator(self, t=0.0):
        """Dense generator on column-stacked vec(rho) (units 1/fs)."""
        n = self.dim
        I = np.eye(n)
        H = self.hamiltonian(t)
        M = (-1j / HBAR) * (np.kron(I, H) - np.kron(H.T, I))
        for r, L in self.collapse:
            LdL = L.conj().T @ L
            M += (r / HBAR) * (np.kron(L.conj(), L) - 0.5 * np.kron(I, LdL) - 0.5 * np.kron(LdL.T, I))
        return M

    def trace_preservation_error(self, t=0.0):
        """max |vec(1)^dagger M|: the adjoint generator applied to the identity."""
        M = self.superoperator(t)
        return float(np.max(np.abs(np.eye(self.dim).reshape(-1, order="F") @ M)))


def _dense(op):
    if sparse.issparse(op):
        return op.toarray()
    return np.asarray(op, dtype=complex)


def build_chain_hamiltonian(chain, omega_c, W0p, drive, config, space=None):
    """Truncated-chain system Hamiltonian in the frame rotating at omega_d (default omega_c).

    ``chain`` holds Omega_n (eV) and G_n (meV) for n = 0..N; G_0 couples the
    cavity to the reaction coordinate. Returns (Space, H0, X) with X = a + a^dagger.
    """
    Omega = np.asarray(chain.Omega, dtype=float)
    G = np.asarray(chain.G, dtype=float) * 1e-3
    N = Omega.size - 1
    needed = ("a",) + tuple(f"B{i}" for i in range(N + 1))
    if tuple(config.modes) != needed:
        raise SpaceError(f"configuration modes {config.modes} do not match a chain of depth {N}")
    if space is None:
        space = Space(config)
    wd = drive.frame(omega_c)
    a = space.annihilation("a")
    B = [space.annihilation(f"B{i}") for i in range(N + 1)]
    H = (omega_c - wd) * (a.conj().T @ a)
    H = H + G[0] * (a.conj().T @ B[0] + B[0].conj().T @ a)
    for i in range(N + 1):
        H = H + (Omega[i] - wd) * (B[i].conj().T @ B[i])
        if i > 0:
            H = H + G[i] * (B[i].conj().T @ B[i - 1] + B[i - 1].conj().T @ B[i])
    if W0p:
        Bd = B[0].conj().T
        H = H + W0p * 1e-3 * (Bd @ Bd @ B[0] @ B[0])
    X = a + a.conj().T
    return space, _dense(H), _dense(X)


def build_system_hamiltonian(G0, Omega0, omega_c, W0p, drive, config, space=None):
    """Cavity + reaction-coordinate Hamiltonian (G0, W0p in meV; frequencies in eV)."""
    from .spectral import ChainParams

    return build_chain_hamiltonian(ChainParams([Omega0], [G0]), omega_c, W0p, drive, config, space)


@dataclass(frozen=True)
class PolaritonDecomposition:
    omega_plus: float  # rotating frame, eV
    omega_minus: float
    eta: float  # eV
    omega_d: float
    B_plus: tuple  # coefficients (on a, on B0) of B0(omega_plus)
    B_minus: tuple

    @property
    def lab_plus(self):
        return self.omega_plus + self.omega_d

    @property
    def lab_minus(self):
        return self.omega_minus + self.omega_d


def polariton_decomposition(G0, delta_cx, omega_c, Omega0, omega_d):
    """Weak-drive polaritons; G0 in meV, delta_cx = omega_c - Omega0 in eV."""
    if not G0 > 0:
        raise ValueError("G0 must be positive")
    g = G0 * 1e-3
    eta = math.hypot(2 * g, delta_cx)
    wp = 0.5 * (omega_c + Omega0 - 2 * omega_d + eta)
    wm = 0.5 * (omega_c + Omega0 - 2 * omega_d - eta)
    up = eta - delta_cx
    lo = eta + delta_cx
    dp = 4 * g * g + up * up
    dm = 4 * g * g + lo * lo
    B_plus = (2 * g * up / dp, up * up / dp)
    B_minus = (-2 * g * lo / dm, lo * lo / dm)
    return PolaritonDecomposition(wp, wm, eta, omega_d, B_plus, B_minus)


def secular_dissipator(decomp, J_res, space, variant="full"):
    """Secular residual-exciton dissipator as (hbar*Gamma in eV, operator) pairs.

    variant 'full' keeps both polariton terms, 'simplified' only the upper one.
    Terms with vanishing rate are dropped.
    """
    if variant not in ("full", "simplified"):
        raise ValueError(f"unknown variant {variant!r}")
    a = space.annihilation("a")
    B0 = space.annihilation("B0")
    terms = []
    pairs = [(decomp.omega_plus, decomp.B_plus)]
    if variant == "full":
        pairs.append((decomp.omega_minus, decomp.B_minus))
    for wbar, (ca, cb) in pairs:
        rate = 2 * math.pi * float(J_res(wbar + decomp.omega_d))
        if rate > 0:
            terms.append((rate, ca * a + cb * B0))
    return terms


def lamb_shift(decomp, J_res, space, variant="full"):
    """Residual Lamb-shift Hamiltonian sum S(w) B0(w)^dagger B0(w), S = PV int J_res/(w - nu)."""
    from .spectral import TabulatedSpectralDensity, reducer

    a = space.annihilation("a")
    B0 = space.annihilation("B0")
    H = sparse.csr_matrix((space.dim, space.dim), dtype=complex)
    pairs = [(decomp.omega_plus, decomp.B_plus)]
    if variant == "full":
        pairs.append((decomp.omega_minus, decomp.B_minus))
    tab = J_res if isinstance(J_res, TabulatedSpectralDensity) else J_res.tabulate()
    for wbar, (ca, cb) in pairs:
        w = wbar + decomp.omega_d
        if not (tab.a < w < tab.b):
            w = min(max(w, tab.a + 1e-12), tab.b - 1e-12)
        S = reducer(tab, w)
        op = ca * a + cb * B0
        H = H + S * (op.conj().T @ op)
    return H


def eigenbasis_dissipator(H, B0, rate_fn, tol=EIGEN_CLUSTER_TOL):
    """Secular dissipator from the full eigenbasis of H.

    Projects B0 onto all transitions, grouping frequency differences that agree
    within ``tol`` (relative to the spectral width). ``rate_fn(omega_bar)`` returns
    hbar*Gamma in eV. Returns (rate, operator) pairs.
    """
    H = _dense(H)
    B0 = _dense(B0)
    E, V = linalg.eigh(H)
    Bt = V.conj().T @ B0 @ V
    diff = E[None, :] - E[:, None]  # omega for <i|B|j>: E_j - E_i
    scale = max(1.0, float(np.ptp(E)))
    mask = np.abs(Bt) > 1e-14
    freqs = np.sort(diff[mask])
    clusters = []
    for w in freqs:
        if clusters and abs(w - clusters[-1][-1]) <= tol * scale:
            clusters[-1].append(w)
        else:
            clusters.append([w])
    terms = []
    for c in clusters:
        lo, hi = c[0] - tol * scale, c[-1] + tol * scale
        sel = mask & (diff >= lo) & (diff <= hi)
        rate = rate_fn(float(np.mean(c)))
        if rate <= 0:
            continue
        op = V @ np.where(sel, Bt, 0) @ V.conj().T
        terms.append((rate, op))
    return terms


@dataclass
class Trajectory:
    t: np.ndarray
    observables: dict
    trace_error: np.ndarray
    hermiticity_error: np.ndarray
    min_eigenvalue: np.ndarray
    final_state: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("time grid must be strictly increasing")
        for k, v in self.observables.items():
            if len(v) != len(self.t):
                raise ValueError(f"series {k!r} does not match the time grid")

    def __getitem__(self, key):
        return self.observables[key]


def default_observables(space):
    obs = {}
    modes = space.config.modes
    if "a" in modes:
        obs["n_cavity"] = space.number("a").diagonal().real
    if "B0" in modes:
        obs["n_rc"] = space.number("B0").diagonal().real
    chain = [m for m in modes if m.startswith("B")]
    if chain:
        obs["n_lastchain"] = space.number(chain[-1]).diagonal().real
    return obs


def propagate(L, rho0, t_grid, tol=1e-8, observables=None, audit_every=1, keep_final=True):
    """Integrate the master equation with an adaptive 8(5,3) Runge--Kutta pair.

    ``observables`` maps names to diagonal (1D array) or full operators; by
    default cavity, reaction-coordinate and last-chain-site populations.
    Observables and state-validity audits are evaluated on ``t_grid`` (fs)
    through the integrator's dense output.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 2 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing with at least two points")
    rho0 = np.asarray(rho0, dtype=complex)
    check_density(rho0)
    n = L.dim
    if observables is None:
        observables = default_observables(L.space)
    obs_ops = {k: (np.asarray(v) if np.ndim(v) == 1 else _dense(v)) for k, v in observables.items()}
    nt = t_grid.size
    series = {k: np.empty(nt) for k in obs_ops}
    terr = np.empty(nt)
    herr = np.empty(nt)
    mineig = np.full(nt, np.nan)

    def record(i, rho):
        for k, op in obs_ops.items():
            if op.ndim == 1:
                series[k][i] = float(np.real(np.diagonal(rho) @ op))
            else:
                series[k][i] = float(np.real(np.trace(op @ rho)))
        terr[i] = abs(np.trace(rho) - 1)
        herr[i] = float(np.max(np.abs(rho - rho.conj().T)))
        if audit_every and (i % audit_every == 0 or i == nt - 1):
            ev = linalg.eigvalsh(0.5 * (rho + rho.conj().T))
            mineig[i] = ev[0]
            if ev[0] < POSITIVITY_FLOOR:
                raise PropagationError(f"density matrix lost positivity at t = {t_grid[i]:.6g} fs "
                                       f"(min eigenvalue {ev[0]:.3e})")

    def f(t, y):
        return L.rhs(t, y.reshape(n, n)).reshape(-1)

    record(0, rho0)
    h_max = np.inf
    if L.drive is not None and L.drive.is_time_dependent:
        h_max = L.drive.Delta / 4  # do not step over the pulse
    solver = integrate.DOP853(f, t_grid[0], rho0.reshape(-1), t_grid[-1], rtol=tol,
                              atol=tol * 1e-3, max_step=h_max)
    i = 1
    while i < nt:
        msg = solver.step()
        if solver.status == "failed":
            raise PropagationError(f"integrator failed at t = {solver.t:.6g} fs: {msg}")
        if solver.t_old is None:
            continue
        dense = solver.dense_output()
        while i < nt and t_grid[i] <= solver.t:
            y = solver.y if t_grid[i] == solver.t else dense(t_grid[i])
            record(i, y.reshape(n, n))
            i += 1
        if solver.status == "finished" and i < nt:
            record(i, solver.y.reshape(n, n))
            i += 1
    final = solver.y.reshape(n, n).copy() if keep_final else None
    return Trajectory(t=t_grid.copy(), observables=series, trace_error=terr,
                      hermiticity_error=herr, min_eigenvalue=mineig, final_state=final,
                      metadata={"tol": tol, "dimension": n})


def check_density(rho, tol=1e-9):
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density operator must be a square matrix")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("density operator is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError("density operator does not have unit trace")
    ev = linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if ev[0] < POSITIVITY_FLOOR:
        raise ValueError(f"density operator has negative eigenvalue {ev[0]:.3e}")


def steady_state(L, residual_tol=1e-10, check_nullity=True):
    """Unique stationary state of a time-independent generator."""
    if L.drive is not None and L.drive.is_time_dependent:
        raise ValueError("steady state needs a time-independent generator")
    n = L.dim
    M = L.superoperator()
    if check_nullity and n * n <= 1600:
        s = linalg.svdvals(M)
        scale = max(s[0], 1e-300)
        null = int(np.sum(s < 1e-10 * scale))
        if null != 1:
            raise SpaceError(f"generator has nullity {null}; the stationary state is not unique")
    A = M.copy()
    trace_row = np.eye(n).reshape(-1, order="F")
    # replace the first row (a diagonal element equation) by the trace condition
    A[0] = trace_row
    rhs = np.zeros(n * n, dtype=complex)
    rhs[0] = 1.0
    v = linalg.solve(A, rhs)
    rho = v.reshape(n, n, order="F")
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    res = float(np.max(np.abs(M @ rho.reshape(-1, order="F"))))
    # residual in units of the largest generator rate
    rel = res / max(1.0, float(np.max(np.abs(M))))
    if rel > residual_tol:
        raise SpaceError(f"steady-state residual {rel:.3e} exceeds {residual_tol:.1e}")
    return rho


def steady_state_residual(L, rho):
    M = L.superoperator()
    res = float(np.max(np.abs(M @ rho.reshape(-1, order="F"))))
    return res / max(1.0, float(np.max(np.abs(M))))


def save_trajectory_csv(traj, path):
    cols = ["n_cavity", "n_rc", "n_lastchain"]
    data = [traj.t] + [traj.observables.get(c, np.full(traj.t.size, np.nan)) for c in cols] + [traj.trace_error]
    np.savetxt(path, np.column_stack(data), delimiter=",", comments="",
               header="t_fs,n_cavity,n_rc,n_lastchain,trace_error", fmt="%.17g")
