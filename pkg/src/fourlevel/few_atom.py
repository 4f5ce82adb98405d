"""Few-atom (N <= 4) master equation with dipole-dipole coupling.

Two-level atoms, pumped by a plane wave with wavevector k; single-atom decay
gamma, collective decay gamma F_ab and coherent exchange gamma G_ab.  Positions
are in units of the transition wavelength.  Basis ordering is the Kronecker
product with atom 0 as the most significant qubit; |1> is the excited state.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np


class IntegrationError(RuntimeError):
    pass


@dataclass
class AtomGeometry:
    positions: np.ndarray
    pump_wavevector: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    dipole_orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        self.pump_wavevector = np.asarray(self.pump_wavevector, dtype=float)
        self.dipole_orientation = np.asarray(self.dipole_orientation, dtype=float)
        n = len(self.positions)
        if not 2 <= n <= 4:
            raise ValueError(f"need 2 <= N <= 4 atoms, got {n}")
        for a, b in combinations(range(n), 2):
            if np.linalg.norm(self.positions[a] - self.positions[b]) == 0:
                raise ValueError("atom positions must be distinct")
        for v, name in [(self.pump_wavevector, "pump_wavevector"), (self.dipole_orientation, "dipole_orientation")]:
            if not np.isclose(np.linalg.norm(v), 1.0):
                raise ValueError(f"{name} must be a unit vector")

    @property
    def n_atoms(self) -> int:
        return len(self.positions)

    def phases(self) -> np.ndarray:
        """Pump phase factors exp(i k.r) with |k| = 2 pi / lambda."""
        return np.exp(2j * np.pi * self.positions @ self.pump_wavevector)

    @classmethod
    def square(cls, side: float, **kw) -> "AtomGeometry":
        """Four atoms on the corners of a square of the given side in the x-y plane."""
        pos = side * np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
        return cls(pos, **kw)


def dipole_kernels(xi, cos_angle):
    """Collective decay F and frequency-shift G kernels at separation xi = k r."""
    xi = np.asarray(xi, dtype=float)
    if np.any(xi <= 0):
        raise ValueError("xi must be positive")
    c2 = np.asarray(cos_angle, dtype=float) ** 2
    s, c = np.sin(xi), np.cos(xi)
    F = 1.5 * ((1 - c2) * s / xi + (1 - 3 * c2) * (c / xi**2 - s / xi**3))
    G = 0.75 * (-(1 - c2) * c / xi + (1 - 3 * c2) * (s / xi**2 + c / xi**3))
    return F, G


def coupling_matrices(geom: AtomGeometry):
    """F (ones on the diagonal) and G (zero diagonal) for every atom pair."""
    n = geom.n_atoms
    F, G = np.eye(n), np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            r = geom.positions[a] - geom.positions[b]
            d = np.linalg.norm(r)
            F[a, b], G[a, b] = dipole_kernels(2 * np.pi * d, geom.dipole_orientation @ r / d)
    return F, G


def _lowering_ops(n):
    sm = np.array([[0, 1], [0, 0]], dtype=complex)
    ops = []
    for m in range(n):
        out = np.array([[1.0 + 0j]])
        for j in range(n):
            out = np.kron(out, sm if j == m else np.eye(2))
        ops.append(out)
    return ops


def _excited(state: int, n: int):
    return [(state >> (n - 1 - m)) & 1 for m in range(n)]


def build_basis(geom: AtomGeometry, n_excitations: int) -> np.ndarray:
    """Orthonormal basis of the n-excitation sector, rows are states.

    Row 0 is the symmetric state sum_{subsets} prod_mu exp(i k.r_mu) |subset>;
    the remaining C(N, n) - 1 rows span its orthogonal complement within the sector.
    """
    n = geom.n_atoms
    if not 0 <= n_excitations <= n:
        raise ValueError(f"n_excitations must be in [0, {n}]")
    ph = geom.phases()
    dim = 2**n
    idx = [s for s in range(dim) if sum(_excited(s, n)) == n_excitations]
    sym = np.zeros(dim, dtype=complex)
    for s in idx:
        sym[s] = np.prod([ph[m] for m, e in enumerate(_excited(s, n)) if e])
    sym /= np.linalg.norm(sym)
    vecs = [sym]
    for s in idx:
        if len(vecs) == len(idx):
            break
        e = np.zeros(dim, dtype=complex)
        e[s] = 1.0
        for u in vecs:
            e -= (u.conj() @ e) * u
        nrm = np.linalg.norm(e)
        if nrm > 1e-8:
            vecs.append(e / nrm)
    return np.array(vecs)


def liouvillian(geom: AtomGeometry, omega_a: float, delta1: float, gamma: float) -> np.ndarray:
    """Superoperator acting on row-major vec(rho)."""
    n = geom.n_atoms
    dim = 2**n
    S = _lowering_ops(n)
    ph = geom.phases()
    F, G = coupling_matrices(geom)
    H = np.zeros((dim, dim), dtype=complex)
    for m in range(n):
        sp = S[m].conj().T * ph[m]
        H += -(omega_a / 2) * (sp + sp.conj().T) - delta1 * S[m].conj().T @ S[m]
    for a in range(n):
        for b in range(n):
            if a != b:
                H += -gamma * G[a, b] * S[a].conj().T @ S[b]
    eye = np.eye(dim)
    L = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for a in range(n):
        for b in range(n):
            if F[a, b] == 0 or gamma == 0:
                continue
            A, Bd = S[b], S[a].conj().T
            BA = Bd @ A
            L += gamma * F[a, b] * (np.kron(A, Bd.T) - 0.5 * np.kron(BA, eye) - 0.5 * np.kron(eye, BA.T))
    return L


def ground_state(n: int) -> np.ndarray:
    rho = np.zeros((2**n, 2**n), dtype=complex)
    rho[0, 0] = 1.0
    return rho


@dataclass
class Populations:
    t: np.ndarray
    P1s: np.ndarray
    P1ns: np.ndarray
    P2s: np.ndarray
    P2ns: np.ndarray
    rho: np.ndarray
    trace_drift: float


def _sector_projections(geom):
    n = geom.n_atoms
    out = []
    for k in (1, 2):
        basis = build_basis(geom, k)
        sector_idx = [s for s in range(2**n) if sum(_excited(s, n)) == k]
        out.append((basis[0], sector_idx))
    return out


def evolve_lindblad(geom: AtomGeometry, omega_a: float, delta1: float, gamma: float,
                    t_end: float, dt: float | None = None, rho0=None, n_out: int = 400) -> Populations:
    """RK4 evolution of the vectorized master equation from the ground state.

    Populations: P_n^s is the symmetric-state population of the n-excitation sector,
    P_n^ns the rest of that sector.  Times are in units where gamma is given.
    """
    dim = 2 ** geom.n_atoms
    if dt is None:
        dt = 1e-3 / gamma if gamma > 0 else 1e-3
    L = liouvillian(geom, omega_a, delta1, gamma)
    rho = ground_state(geom.n_atoms) if rho0 is None else np.asarray(rho0, dtype=complex)
    v = rho.reshape(-1)
    n_steps = int(np.ceil(t_end / dt))
    dt = t_end / n_steps if n_steps else dt
    stride = max(1, n_steps // n_out)
    proj = _sector_projections(geom)
    ts, rows = [], []

    def record(k, v):
        r = v.reshape(dim, dim)
        vals = []
        for sym, idx in proj:
            ps = float(np.real(sym.conj() @ r @ sym))
            tot = float(np.real(sum(r[s, s] for s in idx)))
            vals += [ps, tot - ps]
        ts.append(k * dt)
        rows.append(vals)

    record(0, v)
    max_drift = 0.0
    for k in range(1, n_steps + 1):
        k1 = L @ v
        k2 = L @ (v + 0.5 * dt * k1)
        k3 = L @ (v + 0.5 * dt * k2)
        k4 = L @ (v + dt * k3)
        v = v + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if k % stride == 0 or k == n_steps:
            drift = abs(np.trace(v.reshape(dim, dim)) - 1)
            max_drift = max(max_drift, drift)
            if drift > 1e-6:
                raise IntegrationError(f"trace drift {drift:.2e} at t={k*dt}; reduce dt")
            record(k, v)
    rows = np.array(rows)
    return Populations(np.array(ts), rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3],
                       v.reshape(dim, dim), max_drift)


def steady_state(geom: AtomGeometry, omega_a: float, delta1: float, gamma: float,
                 dt: float | None = None, tol: float = 1e-6, max_time: float = 200.0):
    """Evolve until populations change by < tol over one Rabi period 2 pi / |delta1|.

    Returns (P1s, P1ns, P2s, P2ns, rho, t_reached).
    """
    period = 2 * np.pi / abs(delta1) if delta1 != 0 else 2 * np.pi / max(omega_a, 1e-12)
    rho, t = None, 0.0
    prev = None
    while t < max_time:
        pops = evolve_lindblad(geom, omega_a, delta1, gamma, period, dt, rho0=rho, n_out=1)
        rho = pops.rho
        t += period
        cur = np.array([pops.P1s[-1], pops.P1ns[-1], pops.P2s[-1], pops.P2ns[-1]])
        if prev is not None and np.max(np.abs(cur - prev)) < tol:
            return (*cur, rho, t)
        prev = cur
    raise IntegrationError(f"no steady state within t={max_time}")


def steady_state_exact(geom: AtomGeometry, omega_a: float, delta1: float, gamma: float):
    """Null vector of the Liouvillian (independent check of the time evolution)."""
    dim = 2 ** geom.n_atoms
    L = liouvillian(geom, omega_a, delta1, gamma)
    w, v = np.linalg.eig(L)
    rho = v[:, np.argmin(np.abs(w))].reshape(dim, dim)
    rho = rho / np.trace(rho)
    out = []
    for sym, idx in _sector_projections(geom):
        ps = float(np.real(sym.conj() @ rho @ sym))
        out += [ps, float(np.real(sum(rho[s, s] for s in idx))) - ps]
    return (*out, rho)


def independent_p1(omega_a: float, delta1: float, gamma: float, n: int = 4) -> float:
    """Single-excitation probability for independent atoms, C(N,1) Pe Pg^(N-1)."""
    pe = omega_a**2 / (4 * delta1**2 + gamma**2)
    return comb(n, 1) * pe * (1 - pe) ** (n - 1)
