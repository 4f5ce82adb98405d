"""Positive-P stochastic Maxwell-Bloch simulation of four-level cascade emission.

Variables use the 1-based labels of the normally ordered set: 1..4 are the
fields Ei+, Ei-, Es+, Es-, 5..19 the atomic variables

    5 pi01   6 pi12   7 pi02   8 pi13   9 pi03  10 pi32  11 pi33  12 pi22  13 pi11
   14 pi32+ 15 pi03+ 16 pi13+ 17 pi02+ 18 pi12+ 19 pi01+

(+ = dagger) and slot 0 holds pi00 = 1 - pi11 - pi22 - pi33.  State arrays have
shape (20, n_z, n_realizations).  Time is in cooperation times T_c, space in
cooperation lengths L_c.  The signal propagates towards z = 0 (vacuum input at
z = L), the idler towards z = L (vacuum input at z = 0).
"""
from __future__ import annotations

import os
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .sde_core import EnsembleConfig

C_LIGHT = 299_792_458.0

# C' correspondence: index of the conjugate partner
CONJ = np.array([0, 2, 1, 4, 3, 19, 18, 17, 16, 15, 14, 11, 12, 13, 10, 9, 8, 7, 6, 5])
ATOMIC = tuple(range(5, 20))
PLUS = (5, 6, 7, 8, 9, 10, 11, 12, 13)

# |a><b| for each atomic label
OPERATOR_LEVELS = {5: (0, 1), 6: (1, 2), 7: (0, 2), 8: (1, 3), 9: (0, 3), 10: (3, 2), 11: (3, 3),
                   12: (2, 2), 13: (1, 1), 14: (2, 3), 15: (3, 0), 16: (3, 1), 17: (2, 0),
                   18: (2, 1), 19: (1, 0)}

# unit normals: xi_1..xi_11 drive the diagonal entries, then one (real, imag) pair per off-diagonal entry
NOISE_DIAGONAL = (5, 19, 6, 18, 9, 15, 10, 14, 13, 12, 11)
NOISE_PAIRS = ((5, 19), (5, 6), (5, 7), (5, 8), (5, 9), (5, 14), (5, 13), (5, 11),
               (19, 18), (19, 17), (19, 16), (19, 15), (19, 10), (19, 13), (19, 11),
               (6, 18), (6, 8), (6, 16), (6, 10), (6, 13),
               (18, 8), (18, 16), (18, 14), (18, 13),
               (7, 8), (7, 9), (17, 16), (17, 15),
               (8, 16), (8, 9), (8, 10), (8, 13), (8, 12), (8, 11), (8, 3),
               (16, 15), (16, 14), (16, 13), (16, 12), (16, 11), (16, 4),
               (9, 15), (9, 10), (9, 3), (15, 14), (15, 4),
               (10, 14), (10, 13), (10, 11), (14, 13), (14, 11), (12, 13), (11, 12))
N_NOISE = len(NOISE_DIAGONAL) + 2 * len(NOISE_PAIRS)  # 117


class TranscriptionError(AssertionError):
    pass


class ShootingError(RuntimeError):
    def __init__(self, msg, residual):
        super().__init__(f"{msg} (residual {np.max(np.abs(residual)):.3e})")
        self.residual = residual


class InstabilityError(RuntimeError):
    pass


class FitDomainError(ValueError):
    pass


# ---------------------------------------------------------------- parameters and units

@dataclass(frozen=True)
class ScaledUnits:
    T_c: float  # s
    L_c: float  # m
    N_c: float  # atoms in one cooperation length of the cylinder
    opd: float

    @classmethod
    def from_density(cls, density_cm3: float, wavelength_m: float = 780e-9, gamma03_per_ns: float = 1 / 26,
                     length_m: float = 3e-3, radius_m: float = 2.5e-4) -> "ScaledUnits":
        """T_c^-2 = (3 / 8 pi) rho lambda^2 c gamma03, L_c = c T_c, N_c = rho pi r^2 L_c."""
        rho = density_cm3 * 1e6
        sigma = 3 * wavelength_m**2 / (8 * np.pi)
        g = gamma03_per_ns * 1e9
        Tc = 1 / np.sqrt(sigma * rho * C_LIGHT * g)
        Lc = C_LIGHT * Tc
        if not (Tc > 0 and np.isfinite(Tc)):
            raise ValueError("density and rates must be positive")
        return cls(Tc, Lc, rho * np.pi * radius_m**2 * Lc, rho * sigma * length_m)


@dataclass(frozen=True)
class CascadeScheme:
    """Rates, Rabi frequencies and detunings in units of gamma03."""
    omega_a: float = 0.4
    omega_b: float = 1.0
    delta1: float = 1.0
    delta2: float = 0.0
    gamma01: float = 1.0
    gamma03: float = 1.0
    gamma12: float = 0.156
    gamma32: float = 0.156
    g_ratio: float = 0.775  # g_s / g_i
    density_cm3: float = 5e8
    length_m: float = 3e-3
    radius_m: float = 2.5e-4
    wavelength_m: float = 780e-9
    gamma03_per_ns: float = 1 / 26
    pump_a_window_ns: tuple = (25.0, 75.0)  # square pulse of pump a; pump b is cw
    delta_k: float = 0.0  # phase mismatch in 1/L_c

    def __post_init__(self):
        for name in ("gamma01", "gamma03", "gamma12", "gamma32", "density_cm3", "length_m", "radius_m",
                     "gamma03_per_ns"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def gamma2(self) -> float:
        return self.gamma12 + self.gamma32

    def units(self) -> ScaledUnits:
        return ScaledUnits.from_density(self.density_cm3, self.wavelength_m, self.gamma03_per_ns,
                                        self.length_m, self.radius_m)


@dataclass(frozen=True)
class CascadeGrid:
    n_t: int = 101
    n_z: int = 44
    dt: float = 0.9  # T_c

    def __post_init__(self):
        if self.n_t < 2 or self.n_z < 2 or self.dt <= 0:
            raise ValueError("need n_t, n_z >= 2 and dt > 0")

    @classmethod
    def for_density(cls, density_cm3: float) -> "CascadeGrid":
        """Published (n_t, n_z, dt) for one of the tabulated densities."""
        for rho, g in TABLE_GRIDS.items():
            if np.isclose(density_cm3, rho, rtol=1e-9):
                return cls(*g)
        raise ValueError(f"no tabulated grid for density {density_cm3:g} cm^-3")


# density (cm^-3) -> (n_t, n_z, dt in T_c)
TABLE_GRIDS = {5e8: (101, 44, 0.9), 5e9: (101, 42, 2.8), 1e10: (101, 42, 4.0), 2e10: (101, 42, 5.5)}


class CascadeCoefficients:
    """Scheme parameters converted to cooperation units, with pump values at one time."""

    def __init__(self, scheme: CascadeScheme, units: ScaledUnits, omega_a: complex, omega_b: complex):
        s = scheme.gamma03_per_ns * 1e9 * units.T_c  # gamma03 T_c
        self.g01, self.g03 = scheme.gamma01 * s, scheme.gamma03 * s
        self.g12, self.g32 = scheme.gamma12 * s, scheme.gamma32 * s
        self.g2 = self.g12 + self.g32
        self.d1, self.d2 = scheme.delta1 * s, scheme.delta2 * s
        self.oa, self.ob = omega_a * s, omega_b * s
        self.r2 = scheme.g_ratio**2


def _conjugate_args(x):
    """y_k = conj(x_{C'k}): evaluating a plus-set expression at y and conjugating gives the partner."""
    return np.conj(x[CONJ])


def _with_ground(x):
    x = np.array(x, dtype=complex, copy=True)
    x[0] = 1 - x[11] - x[12] - x[13]
    return x


def _phased_fields(x, phase):
    """(Ei+, Ei-, Es+ e^{-i dk z}, Es- e^{i dk z})."""
    if phase is None:
        return x[1], x[2], x[3], x[4]
    return x[1], x[2], x[3] * np.conj(phase), x[4] * phase


def _drift_plus(x, c: CascadeCoefficients, phase=None):
    """Ito drift of labels 5..13."""
    Eip, Eim, Esp, Esm = _phased_fields(x, phase)
    oa, ob = c.oa, c.ob
    oac, obc = np.conj(oa), np.conj(ob)
    a = x
    out = {}
    out[5] = (1j * c.d1 - c.g01 / 2) * a[5] + 1j * oa * (a[0] - a[13]) + 1j * obc * a[7] - 1j * a[16] * Eip
    out[6] = (1j * (c.d2 - c.d1 + 1j * (c.g01 + c.g2) / 2) * a[6] - 1j * oac * a[7]
              + 1j * ob * (a[13] - a[12]) + 1j * a[8] * Esp)
    out[7] = ((1j * c.d2 - c.g2 / 2) * a[7] - 1j * oa * a[6] + 1j * ob * a[5] + 1j * a[9] * Esp
              - 1j * a[10] * Eip)
    out[8] = ((-1j * c.d1 - (c.g01 + c.g03) / 2) * a[8] - 1j * oac * a[9] - 1j * ob * a[14]
              + 1j * a[6] * Esm + 1j * a[19] * Eip)
    out[9] = -c.g03 / 2 * a[9] - 1j * oa * a[8] + 1j * a[7] * Esm + 1j * (a[0] - a[11]) * Eip
    out[10] = ((1j * c.d2 - (c.g03 + c.g2) / 2) * a[10] + 1j * ob * a[16] - 1j * (a[12] - a[11]) * Esp
               - 1j * a[7] * Eim)
    out[13] = (-c.g01 * a[13] + c.g12 * a[12] + 1j * oa * a[19] - 1j * oac * a[5] - 1j * ob * a[18]
               + 1j * obc * a[6])
    out[12] = (-c.g2 * a[12] + 1j * ob * a[18] - 1j * obc * a[6] + 1j * a[14] * Esp - 1j * a[10] * Esm)
    out[11] = (-c.g03 * a[11] + c.g32 * a[12] - 1j * a[14] * Esp + 1j * a[10] * Esm + 1j * a[15] * Eip
               - 1j * a[9] * Eim)
    return out


def drift(x, c: CascadeCoefficients, phase=None):
    """Ito drift of all atomic labels (array (20, ...), zeros in the field/ground slots)."""
    x = _with_ground(x)
    out = np.zeros_like(x)
    plus = _drift_plus(x, c, phase)
    y = _with_ground(_conjugate_args(x))
    conj = _drift_plus(y, c, phase)  # the outer conjugate also conjugates Omega and the phase
    for k, v in plus.items():
        out[k] = v
    for k in (5, 6, 7, 8, 9, 10):
        out[CONJ[k]] = np.conj(conj[k])
    return out


def stratonovich_terms(x, c: CascadeCoefficients, phase=None):
    """Unscaled drift corrections -1/4 sum_j dD_ij/dx_j in closed form."""
    Eip, Eim, Esp, Esm = _phased_fields(x, phase)
    out = np.zeros_like(x, dtype=complex)
    out[5] = 1j * c.oa / 2
    out[19] = -1j * np.conj(c.oa) / 2
    out[6] = 1j * c.ob
    out[18] = -1j * np.conj(c.ob)
    out[9] = 1j * Eip
    out[15] = -1j * Eim
    out[10] = 0.5j * Esp
    out[14] = -0.5j * Esm
    out[13] = (-5 * c.g01 + c.g12) / 4
    out[12] = -c.g2 / 4
    out[11] = (-3 * c.g03 + c.g32) / 4
    return out


# ---------------------------------------------------------------- diffusion

def _table(x, c: CascadeCoefficients, phase=None):
    """Entries (i)-(x) as listed; returns {(i, j): value}."""
    a = x
    Eip, Eim, Esp, Esm = _phased_fields(x, phase)
    oa, ob = c.oa, c.ob
    oac, obc = np.conj(oa), np.conj(ob)
    g01, g03, g12, g32, g2 = c.g01, c.g03, c.g12, c.g32, c.g2
    fz = 1.0 if phase is None else phase
    return {
        (5, 5): -2j * oa * a[5],
        (5, 6): 1j * (oa * a[6] + a[10] * Eip),
        (5, 7): -1j * oa * a[7],
        (5, 8): 1j * (oa * a[8] + (a[11] - a[13]) * Eip),
        (5, 9): -1j * (oa * a[9] + a[5] * Eip),
        (5, 11): -1j * a[16] * Eip,
        (5, 13): 1j * a[16] * Eip,
        (5, 14): -1j * a[18] * Eip,
        (5, 19): g12 * a[12],
        (6, 6): -2j * ob * a[6],
        (6, 8): -1j * ob * a[8],
        (6, 10): -1j * ob * a[10],
        (6, 13): -1j * oac * a[7] + g01 * a[6],
        (6, 16): -1j * a[7] * Eim + g01 * a[10],
        (6, 18): g01 * a[12],
        (7, 8): -1j * a[6] * Eip,
        (7, 9): -1j * a[7] * Eip,
        (8, 9): -1j * a[8] * Eip,
        (8, 10): 1j * ob * (a[12] - a[11]),
        (8, 11): 1j * ob * a[14],
        (8, 12): -1j * ob * a[14],
        (8, 13): -1j * oac * a[9] + 1j * a[19] * Eip + g01 * a[8],
        (8, 16): 1j * a[15] * Eip - 1j * a[9] * Eim + g01 * a[11] + g32 * a[12],
        (8, 18): 1j * a[17] * Eip + g01 * a[14],
        (9, 9): -2j * a[9] * Eip,
        (9, 10): 1j * a[10] * Eip,
        (9, 15): g32 * a[12],
        (10, 10): -2j * a[10] * Esp,
        (10, 11): 1j * (ob * a[16] - a[7] * Eim) + g03 * a[10],
        (10, 13): -1j * ob * a[16],
        (10, 14): 1j * ob * a[18] - 1j * obc * a[6] + g03 * a[12],
        (10, 19): 1j * a[6] * Eim,
        (11, 11): (1j * a[14] * Esp - 1j * a[10] * Esm + 1j * a[15] * Eip - 1j * a[9] * Eim
                   + g32 * a[12] + g03 * a[11]),
        (11, 12): 1j * a[10] * Esm - 1j * a[14] * Esp - g32 * a[12],
        (12, 12): 1j * ob * a[18] - 1j * obc * a[6] - 1j * a[10] * Esm + 1j * a[14] * Esp + g2 * a[12],
        (12, 13): -1j * ob * a[18] + 1j * obc * a[6] - g12 * a[12],
        (13, 13): (1j * oa * a[19] - 1j * oac * a[5] + 1j * ob * a[18] - 1j * obc * a[6]
                   + g01 * a[13] + g12 * a[12]),
        (3, 8): c.r2 * 1j * a[6] * fz,
        (3, 9): c.r2 * 1j * a[7] * fz,
    }


def diffusion(x, c: CascadeCoefficients, phase=None):
    """All non-vanishing D_ij, keyed by (i, j) with both orders present.

    Entries outside the listed table follow from D_{C'i,C'j}(x) = conj(D_ij(y)).
    """
    x = np.asarray(x, dtype=complex)
    tab = _table(x, c, phase)
    y = _conjugate_args(x)
    img = _table(y, c, phase)
    out = {}
    for (i, j), v in tab.items():
        out[(i, j)] = v
    for (i, j), v in img.items():
        key = (int(CONJ[i]), int(CONJ[j]))
        if key in out or key[::-1] in out:
            continue
        out[key] = np.conj(v)
    full = {}
    for (i, j), v in out.items():
        full[(i, j)] = v
        full[(j, i)] = v
    return full


def listed_pair(D, i, j):
    return D.get((i, j), 0.0)


def noise_vector(x, c: CascadeCoefficients, xi, scale: float = 1.0, phase=None, D=None):
    """Langevin noise for every label from 117 unit normals xi (leading axis).

    Diagonal entries use sqrt(D) xi; each off-diagonal pair (i, j) adds
    sqrt(D/2)(xi_k + i xi_k+1) to F_i and sqrt(D/2)(xi_k - i xi_k+1) to F_j.
    Square roots are principal branches.
    """
    if D is None:
        D = diffusion(x, c, phase)
    xi = np.asarray(xi)
    F = np.zeros((20,) + np.broadcast_shapes(np.shape(x)[1:], xi.shape[1:]), dtype=complex)
    for k, i in enumerate(NOISE_DIAGONAL):
        F[i] += np.sqrt(D[(i, i)] + 0j) * xi[k]
    base = len(NOISE_DIAGONAL)
    for n, (i, j) in enumerate(NOISE_PAIRS):
        s = np.sqrt(D[(i, j)] / 2 + 0j)
        u, v = xi[base + 2 * n], xi[base + 2 * n + 1]
        F[i] += s * (u + 1j * v)
        F[j] += s * (u - 1j * v)
    return F * scale


FIELD_PAIRS = tuple(n for n, (i, j) in enumerate(NOISE_PAIRS) if j in (3, 4))


def field_noise(x, c: CascadeCoefficients, xi, scale: float = 1.0, phase=None):
    """(F3, F4) alone; their diffusion entries involve atomic variables only."""
    fz = 1.0 if phase is None else phase
    D = {(8, 3): c.r2 * 1j * x[6] * fz, (9, 3): c.r2 * 1j * x[7] * fz,
         (16, 4): np.conj(c.r2 * 1j * np.conj(x[18]) * fz), (15, 4): np.conj(c.r2 * 1j * np.conj(x[17]) * fz)}
    F = {3: 0, 4: 0}
    base = len(NOISE_DIAGONAL)
    for n in FIELD_PAIRS:
        i, j = NOISE_PAIRS[n]
        s = np.sqrt(D[(i, j)] / 2 + 0j)
        F[j] = F[j] + s * (xi[base + 2 * n] - 1j * xi[base + 2 * n + 1])
    return F[3] * scale, F[4] * scale


def stratonovich_correction_generic(x, c: CascadeCoefficients, phase=None):
    """-1/4 sum_j dD_ij/dx_j over atomic x_j, by exact differences (D is affine in atoms)."""
    x = np.asarray(x, dtype=complex)
    D0 = diffusion(x, c, phase)
    out = np.zeros_like(x)
    for j in ATOMIC:
        xp = x.copy()
        xp[j] = xp[j] + 1
        D1 = diffusion(xp, c, phase)
        for (i, jj), v in D1.items():
            if jj == j:
                out[i] += -(v - D0[(i, jj)]) / 4
    return out


# ---------------------------------------------------------------- Einstein relation check

def _operator(k):
    m = np.zeros((4, 4), dtype=complex)
    a, b = OPERATOR_LEVELS[k]
    m[a, b] = 1
    return m


def _decompose(M):
    """M = cI I + sum_k c_k sigma_k with sigma00 = I - sigma11 - sigma22 - sigma33."""
    cI = M[0, 0]
    coef = {}
    for k, (a, b) in OPERATOR_LEVELS.items():
        coef[k] = M[a, b] - cI if a == b else M[a, b]
    return cI, coef


def _affine_drift(fields, c: CascadeCoefficients):
    """Constant and linear coefficients of the Ito drift at given field values."""
    base = np.zeros((20, 1), dtype=complex)
    base[1:5, 0] = fields
    d0 = drift(base, c)[:, 0]
    lin = {}
    for m in ATOMIC:
        e = base.copy()
        e[m, 0] = 1
        lin[m] = drift(e, c)[:, 0] - d0
    return d0, lin


def einstein_diffusion(kx, ky, state, c: CascadeCoefficients):
    """Classical D_{kx,ky} from the Einstein relation with normal-ordering corrections.

    Operators are ordered with larger labels first.  For x before y,
    D = A[xy] - A[x]y - xA[y] + sum_P c_P [P, y] + sum_Q d_Q [x, Q], where P runs
    over components of A[x] ordered after y and Q over components of A[y]
    ordered before x; the result is mapped back to c-numbers.
    """
    if kx < ky:
        kx, ky = ky, kx
    d0, lin = _affine_drift(state[1:5], c)

    def A(M):
        cI, coef = _decompose(M)
        out = np.zeros((4, 4), dtype=complex)
        for k, ck in coef.items():
            if ck == 0:
                continue
            cK, cl = d0[k], lin
            op = cK * np.eye(4) + sum(cl[m][k] * _operator(m) for m in ATOMIC)
            out += ck * op
        return out

    X, Y = _operator(kx), _operator(ky)
    AX, AY = A(X), A(Y)
    Dq = A(X @ Y) - AX @ Y - X @ AY
    _, cx = _decompose(AX)
    _, cy = _decompose(AY)
    for p, cp in cx.items():
        if p < ky and cp != 0:
            P = _operator(p)
            Dq += cp * (P @ Y - Y @ P)
    for q, cq in cy.items():
        if q > kx and cq != 0:
            Q = _operator(q)
            Dq += cq * (X @ Q - Q @ X)
    cI, coef = _decompose(Dq)
    return cI + sum(coef[k] * state[k] for k in ATOMIC)


@dataclass
class EinsteinReport:
    max_discrepancy: float
    worst_entry: tuple
    per_entry: dict

    @property
    def ok(self) -> bool:
        return self.max_discrepancy <= 1e-10


def einstein_check(states, c: CascadeCoefficients, entries=None, raise_on_error: bool = False) -> EinsteinReport:
    """Compare the Einstein-relation diffusion with the table on each state (shape (20,) each)."""
    if entries is None:
        entries = [(i, j) for i in ATOMIC for j in ATOMIC if i >= j]
    per = {}
    for st in states:
        st = np.asarray(st, dtype=complex)
        D = diffusion(st[:, None], c)
        for (i, j) in entries:
            e = einstein_diffusion(i, j, st, c)
            t = complex(np.ravel(D.get((i, j), 0.0))[0]) if (i, j) in D else 0.0
            rel = abs(e - t) / max(1.0, abs(t))
            per[(i, j)] = max(per.get((i, j), 0.0), rel)
    worst = max(per, key=per.get)
    rep = EinsteinReport(per[worst], worst, per)
    if raise_on_error and not rep.ok:
        raise TranscriptionError(f"diffusion entry D{worst} disagrees with the Einstein relation "
                                 f"({per[worst]:.3e})")
    return rep


def random_states(n, rng, include_fields=True):
    st = np.zeros((n, 20), dtype=complex)
    st[:, 5:] = rng.normal(size=(n, 15)) + 1j * rng.normal(size=(n, 15))
    if include_fields:
        st[:, 1:5] = rng.normal(size=(n, 4)) + 1j * rng.normal(size=(n, 4))
    st[:, 0] = 1 - st[:, 11] - st[:, 12] - st[:, 13]
    return st


# ---------------------------------------------------------------- fields

def shooting_solve(propagate, y0_known, unknown_idx, targets, guesses=(0.0, None), tol: float = 1e-8,
                   max_iter: int = 100):
    """Two-point boundary values by the secant method.

    propagate(y0) integrates from z = 0 and returns the profile with z on axis 1
    (shape (n_vars, n_z, ...)).  Components `unknown_idx` of y0 are adjusted until
    the profile at z = L matches `targets`; each unknown gets its own secant.
    Returns (profile, n_iterations).
    """
    y0 = np.array(y0_known, dtype=complex, copy=True)
    idx = list(unknown_idx)
    tgt = np.broadcast_to(np.asarray(targets, dtype=complex), y0[idx].shape)
    x1 = np.broadcast_to(np.asarray(guesses[0], dtype=complex), y0[idx].shape).copy()
    y0[idx] = x1
    prof = propagate(y0)
    f1 = prof[idx, -1] - tgt
    # per component, relative to the target or (vacuum boundaries) to the first mismatch, so a
    # component's answer does not depend on what else is solved alongside it
    scale = np.maximum(np.abs(tgt), np.abs(f1))
    done = np.abs(f1) <= tol * np.abs(tgt)
    if np.all(done):
        return prof, 0
    if guesses[1] is None:
        x2 = x1 - f1  # exact when the boundary value moves one-to-one with the start value
    else:
        x2 = np.broadcast_to(np.asarray(guesses[1], dtype=complex), x1.shape).copy()
    x2 = np.where(done, x1, np.where(x2 == x1, x1 - f1, x2))
    for it in range(1, max_iter + 1):
        y0[idx] = x2
        prof = propagate(y0)
        f2 = prof[idx, -1] - tgt
        done = np.abs(f2) <= tol * scale
        if np.all(done):
            return prof, it
        dx = x2 - x1
        df = f2 - f1
        tiny = np.abs(dx) < 1e-15 * np.maximum(np.abs(x2), scale)
        if np.any(~done & (tiny | (df == 0))):
            raise ShootingError("secant stagnated", np.where(done, 0, f2))
        step = np.where(done, 0, f2 * dx / np.where(done, 1, df))
        x1, f1, x2 = x2, f2, x2 - step
    raise ShootingError("secant did not converge", f2)


def _cumtrapz(src, dz):
    out = np.zeros_like(src)
    out[1:] = np.cumsum((src[1:] + src[:-1]) * (dz / 2), axis=0)
    return out


def solve_fields(x, c: CascadeCoefficients, dz: float, F3=None, F4=None, phase=None, guesses=None):
    """Counter-propagating fields for one time slice by shooting (Es(L) = 0, Ei(0) = 0)."""
    fz = 1.0 if phase is None else phase[:, None]
    s_p = -1j * c.r2 * x[10] * fz - (0 if F3 is None else F3)
    s_m = 1j * c.r2 * x[14] * np.conj(fz) - (0 if F4 is None else F4)
    i_p = 1j * x[9]
    i_m = -1j * x[15]
    src = np.stack([i_p, i_m, s_p, s_m])
    integ = _cumtrapz(src.transpose(1, 0, 2), dz).transpose(1, 0, 2)

    def propagate(y0):
        return y0[:, None, :] + integ

    y0 = np.zeros((4,) + x.shape[2:], dtype=complex)
    g = (0.0, guesses) if guesses is not None else (0.0, None)
    prof, _ = shooting_solve(propagate, y0, [2, 3], np.zeros((2,) + x.shape[2:]), g)
    return prof


# ---------------------------------------------------------------- ensemble

@dataclass
class CascadeAccumulator:
    """Running sums over accepted realizations (merged in realization order)."""
    n_t: int
    count: int = 0
    rejected: int = 0
    next_realization: int = 0
    sums: dict = field(default_factory=dict)

    def _add(self, name, value):
        if name in self.sums:
            self.sums[name] = self.sums[name] + value
        else:
            self.sums[name] = np.array(value, copy=True)

    def add_batch(self, A, B, pops):
        """A = Es- Es+ at z = 0, B = Ei- Ei+ at z = L, shape (R, n_t); pops (R, 3, n_t)."""
        self.count += A.shape[0]
        self._add("A", A.sum(0))
        self._add("B", B.sum(0))
        for nm, v in (("A", A), ("B", B)):
            self._add(nm + "re2", (v.real**2).sum(0))
            self._add(nm + "im2", (v.imag**2).sum(0))
        self._add("G", A.T @ B)
        Ar, Ai, Br, Bi = A.real, A.imag, B.real, B.imag
        self._add("Gre2", (Ar**2).T @ Br**2 - 2 * (Ar * Ai).T @ (Br * Bi) + (Ai**2).T @ Bi**2)
        self._add("Gim2", (Ar**2).T @ Bi**2 + 2 * (Ar * Ai).T @ (Br * Bi) + (Ai**2).T @ Br**2)
        self._add("pops", pops.sum(0))
        self._add("popsre2", (pops.real**2).sum(0))
        self._add("popsim2", (pops.imag**2).sum(0))

    def save(self, path, metadata: dict | None = None):
        """Checkpoint as .npz (atomic replace)."""
        d = os.path.dirname(os.path.abspath(path)) or "."
        fd, tmp = tempfile.mkstemp(dir=d, suffix=".npz")
        os.close(fd)
        meta = {"count": self.count, "rejected": self.rejected, "next_realization": self.next_realization,
                "n_t": self.n_t}
        np.savez(tmp, **{f"sum_{k}": v for k, v in self.sums.items()},
                 meta=np.array(list(meta.items()), dtype=object),
                 params=np.array(repr(metadata or {})))
        os.replace(tmp, path)

    @classmethod
    def load(cls, path):
        with np.load(path, allow_pickle=True) as f:
            meta = dict(f["meta"].tolist())
            acc = cls(int(meta["n_t"]), int(meta["count"]), int(meta["rejected"]), int(meta["next_realization"]))
            acc.sums = {k[4:]: f[k] for k in f.files if k.startswith("sum_")}
        return acc


def _mean_se(s, s_re2, s_im2, n):
    m = s / n
    if n < 2:
        return m, np.full(m.shape, np.nan) * (1 + 1j)
    var_re = np.maximum(s_re2 / n - m.real**2, 0) * n / (n - 1)
    var_im = np.maximum(s_im2 / n - m.imag**2, 0) * n / (n - 1)
    return m, np.sqrt(var_re / n) + 1j * np.sqrt(var_im / n)


@dataclass
class CascadeResult:
    t_ns: np.ndarray
    I_s: np.ndarray
    I_s_se: np.ndarray
    I_i: np.ndarray
    I_i_se: np.ndarray
    G: np.ndarray  # G[ts, ti]
    G_se: np.ndarray
    populations: np.ndarray  # <pi11>, <pi22>, <pi33> at z = 0, shape (3, n_t)
    populations_se: np.ndarray
    n_accepted: int
    n_rejected: int
    units: ScaledUnits

    @classmethod
    def from_accumulator(cls, acc: CascadeAccumulator, t_ns, units):
        n = acc.count
        if n == 0:
            raise InstabilityError("no accepted realizations")
        S = acc.sums
        Is, Is_se = _mean_se(S["A"], S["Are2"], S["Aim2"], n)
        Ii, Ii_se = _mean_se(S["B"], S["Bre2"], S["Bim2"], n)
        G, G_se = _mean_se(S["G"], S["Gre2"], S["Gim2"], n)
        P, P_se = _mean_se(S["pops"], S["popsre2"], S["popsim2"], n)
        return cls(t_ns, Is, Is_se, Ii, Ii_se, G, G_se, P, P_se, n, acc.rejected, units)


@dataclass(frozen=True)
class SimulationOptions:
    noise: bool = True
    corrections: bool = True
    correction_scaling: str = "noise_squared"  # "noise_squared": 1/(N_c dt dz); "ito": 1/(N_c dz)
    midpoint_iterations: int = 4
    batch_size: int = 500
    cap: float = 1e6
    max_reject_fraction: float = 0.01
    noise_block: int = 4
    pumps: bool = True


def _pump_values(scheme: CascadeScheme, t_ns, pumps_on=True):
    if not pumps_on:
        return 0.0, 0.0
    lo, hi = scheme.pump_a_window_ns
    oa = scheme.omega_a if lo <= t_ns < hi else 0.0
    return oa, scheme.omega_b


def _run_batch(scheme, grid, units, opts, seeds, t_ns, dz, phase):
    R = len(seeds)
    nz = grid.n_z
    gens = [np.random.Generator(np.random.PCG64(s)) for s in seeds]
    x = np.zeros((20, nz, R), dtype=complex)
    nscale = 1 / np.sqrt(units.N_c * grid.dt * dz) if opts.noise else 0.0
    if opts.correction_scaling == "noise_squared":
        cscale = 1 / (units.N_c * grid.dt * dz)
    elif opts.correction_scaling == "ito":
        cscale = 1 / (units.N_c * dz)
    else:
        raise ValueError("correction_scaling must be 'noise_squared' or 'ito'")
    if not (opts.noise and opts.corrections):
        cscale = 0.0
    n_steps = grid.n_t - 1
    A = np.zeros((R, n_steps), dtype=complex)
    B = np.zeros((R, n_steps), dtype=complex)
    pops = np.zeros((R, 3, n_steps), dtype=complex)
    alive = np.ones(R, dtype=bool)
    block = None
    guess = None
    for n in range(n_steps):
        if opts.noise and n % opts.noise_block == 0:
            nb = min(opts.noise_block, n_steps - n)
            block = np.stack([g.standard_normal((nb, N_NOISE, nz)) for g in gens], axis=-1)
        xi = block[n % opts.noise_block] if opts.noise else None
        tm = (n + 0.5) * grid.dt * units.T_c * 1e9
        oa, ob = _pump_values(scheme, tm, opts.pumps)
        c = CascadeCoefficients(scheme, units, oa, ob)
        xm = x
        ph = None if phase is None else phase[:, None]
        for _ in range(opts.midpoint_iterations):
            xw = _with_ground(xm)
            # fields first, from the current atomic estimate
            F3, F4 = field_noise(xw, c, xi, nscale, ph) if opts.noise else (None, None)
            E = solve_fields(xw, c, dz, F3, F4, phase, guess)
            xw[1:5] = E
            rhs = drift(xw, c, ph)
            if cscale:
                rhs += cscale * stratonovich_terms(xw, c, ph)
            if opts.noise:
                F = noise_vector(xw, c, xi, nscale, ph)
                F[1:5] = 0
                rhs += F
            new = x + rhs * (grid.dt / 2)
            new[1:5] = E
            xm = new
        guess = xm[[3, 4], 0]
        x = 2 * xm - x
        x[1:5] = xm[1:5]
        bad = ~np.all(np.isfinite(x), axis=(0, 1)) | (np.max(np.abs(x), axis=(0, 1)) > opts.cap)
        if np.any(bad & alive):
            alive &= ~bad
            x[:, :, ~alive] = 0
        Esp, Esm = xm[3, 0], xm[4, 0]
        Eip, Eim = xm[1, -1], xm[2, -1]
        A[:, n] = Esm * Esp
        B[:, n] = Eim * Eip
        pops[:, :, n] = xm[[13, 12, 11], 0].T
    return A[alive], B[alive], pops[alive], int((~alive).sum())


def time_axis_ns(grid: CascadeGrid, units: ScaledUnits):
    """Midpoint times at which observables are recorded."""
    return (np.arange(grid.n_t - 1) + 0.5) * grid.dt * units.T_c * 1e9


def simulate_ensemble(scheme: CascadeScheme, grid: CascadeGrid, ensemble: EnsembleConfig,
                      options: SimulationOptions = SimulationOptions(), checkpoint: str | None = None,
                      resume: bool = False, progress=None) -> CascadeResult:
    """Run realizations in index order and return ensemble means with standard errors.

    Realization r uses PCG64(SeedSequence(master_seed, spawn_key=(r,))), so results
    do not depend on the batch size.  Realizations whose variables leave the
    1e6 cap are dropped and counted; more than 1% dropped raises InstabilityError.
    """
    units = scheme.units()
    L = scheme.length_m / units.L_c
    dz = L / (grid.n_z - 1)
    z = np.arange(grid.n_z) * dz
    phase = None if scheme.delta_k == 0 else np.exp(1j * scheme.delta_k * z)
    t_ns = time_axis_ns(grid, units)
    acc = CascadeAccumulator(len(t_ns))
    if resume and checkpoint and os.path.exists(checkpoint):
        acc = CascadeAccumulator.load(checkpoint)
    total = ensemble.n_realizations
    while acc.next_realization < total:
        r0 = acc.next_realization
        r1 = min(total, r0 + options.batch_size)
        seeds = [np.random.SeedSequence(entropy=ensemble.master_seed, spawn_key=(r,)) for r in range(r0, r1)]
        A, B, P, rej = _run_batch(scheme, grid, units, options, seeds, t_ns, dz, phase)
        if len(A):
            acc.add_batch(A, B, P)
        acc.rejected += rej
        acc.next_realization = r1
        if checkpoint:
            acc.save(checkpoint, {"scheme": asdict(scheme), "grid": asdict(grid), "seed": ensemble.master_seed})
        if progress:
            progress(r1, total)
    if acc.rejected > options.max_reject_fraction * max(total, 1):
        raise InstabilityError(f"{acc.rejected} of {total} realizations diverged; reduce dt")
    return CascadeResult.from_accumulator(acc, t_ns, units)


# ---------------------------------------------------------------- fitting

@dataclass
class FitResult:
    T_f: float
    ci: tuple
    t_m: float
    n_points: int


def fit_superradiant_time(t, g, fit_range=(1.0, 0.25)) -> FitResult:
    """Exponential fit of a decaying curve from its peak down to a fraction of it.

    Least squares on log g over the samples between the peak and the first point
    below fit_range[1] * peak; returns T_f with a 95% t-interval.
    """
    t = np.asarray(t, dtype=float)
    g = np.real(np.asarray(g))
    k0 = int(np.argmax(g))
    peak = g[k0]
    if peak <= 0:
        raise FitDomainError("curve has no positive peak")
    hi_frac, lo_frac = fit_range
    k = k0
    while k + 1 < len(g) and g[k + 1] >= lo_frac * peak:
        k += 1
    sel = slice(k0, k + 1)
    tt, gg = t[sel], g[sel]
    if np.any(gg <= 0):
        raise FitDomainError("non-positive values inside the fit range")
    if len(tt) < 3:
        raise FitDomainError("fewer than 3 points in the fit range")
    res = stats.linregress(tt, np.log(gg))
    slope = res.slope
    if slope >= 0:
        raise FitDomainError("curve is not decaying")
    q = stats.t.ppf(0.975, len(tt) - 2)
    lo, hi = slope - q * res.stderr, slope + q * res.stderr
    T = -1 / slope
    ci = (-1 / lo, -1 / hi) if hi < 0 else (-1 / lo, np.inf)
    return FitResult(float(T), (float(ci[0]), float(ci[1])), float(tt[0]), len(tt))


def correlation_section(result: CascadeResult):
    """(t_m, tau, G(t_m, t_m + tau), SE) at the time of the largest Re G with t_i >= t_s."""
    G = result.G.real.copy()
    n = G.shape[0]
    G[np.tril_indices(n, -1)] = -np.inf
    ts, ti = np.unravel_index(np.argmax(G), G.shape)
    sec = result.G[ts, ts:]
    se = result.G_se[ts, ts:]
    tau = result.t_ns[ts:] - result.t_ns[ts]
    return result.t_ns[ts], tau, sec, se


def reference_time_ns(scheme: CascadeScheme) -> float:
    """T_1 = gamma03^-1 / (N mu_bar + 1) for the scheme's cylinder, in ns."""
    from .analytic_cascade import EnsembleShape, superradiant_factor

    lam = scheme.wavelength_m
    shape = EnsembleShape.from_cylinder(scheme.length_m / lam, scheme.radius_m / lam, scheme.density_cm3, lam)
    return float(1 / scheme.gamma03_per_ns / superradiant_factor(shape))
