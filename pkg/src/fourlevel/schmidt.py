"""Schmidt decomposition of a gridded two-photon amplitude and its entropy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analytic_cascade import CollectiveDecay, PumpPulse, two_photon_spectrum


class DegenerateInputError(ValueError):
    pass


class InvalidSpectrumError(ValueError):
    pass


class NormalizationError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralGrid:
    w_min: float = -1200.0
    w_max: float = 1200.0
    n_points: int = 2000

    def __post_init__(self):
        if not self.w_min < self.w_max:
            raise ValueError("w_min must be below w_max")
        if self.n_points < 64:
            raise ValueError("n_points must be >= 64")

    @property
    def omega(self) -> np.ndarray:
        return np.linspace(self.w_min, self.w_max, self.n_points)

    @property
    def dw(self) -> float:
        return (self.w_max - self.w_min) / (self.n_points - 1)


@dataclass
class SchmidtModes:
    lambdas: np.ndarray
    signal_modes: np.ndarray  # rows psi_n(omega_s)
    idler_modes: np.ndarray  # rows phi_n(omega_i)
    dws: float
    dwi: float

    def reconstruct(self, n_modes: int | None = None) -> np.ndarray:
        k = len(self.lambdas) if n_modes is None else n_modes
        return np.einsum("n,ns,ni->si", np.sqrt(self.lambdas[:k]),
                         self.signal_modes[:k], self.idler_modes[:k])


def decompose(f_grid, dws: float = 1.0, dwi: float = 1.0, n_modes: int | None = None) -> SchmidtModes:
    """Singular values of f sqrt(dws dwi) give sqrt(lambda_n); modes carry 1/sqrt(dw)."""
    f = np.asarray(f_grid, dtype=complex)
    norm2 = np.sum(np.abs(f) ** 2) * dws * dwi
    if not np.all(np.isfinite(f)):
        raise DegenerateInputError("non-finite amplitude")
    if norm2 == 0:
        raise DegenerateInputError("all-zero amplitude")
    M = f * np.sqrt(dws * dwi / norm2)
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    k = len(s) if n_modes is None else n_modes
    lam = s[:k] ** 2
    # absorb the phase of the signal mode into the idler mode so the product is unchanged
    sig = U[:, :k].T
    idl = Vh[:k]
    j = np.argmax(np.abs(sig), axis=1)
    ph = sig[np.arange(k), j]
    ph = ph / np.where(np.abs(ph) == 0, 1, np.abs(ph))
    sig = sig / ph[:, None]
    idl = idl * ph[:, None]
    return SchmidtModes(lam, sig / np.sqrt(dws), idl / np.sqrt(dwi), dws, dwi)


def kernel_eigenvalues(f_grid, dws: float = 1.0, dwi: float = 1.0) -> np.ndarray:
    """Eigenvalues of the one-photon kernel K1(ws, ws') = int f(ws, wi) f*(ws', wi) dwi."""
    f = np.asarray(f_grid, dtype=complex)
    f = f / np.sqrt(np.sum(np.abs(f) ** 2) * dws * dwi)
    K = (f @ f.conj().T) * dwi
    w = np.linalg.eigvalsh(K * dws)
    return np.sort(w)[::-1]


def entropy(lambdas, base: float = np.e) -> float:
    """von Neumann entropy -sum lambda log lambda (nats by default, 0 log 0 = 0)."""
    lam = np.asarray(lambdas, dtype=float)
    if np.any(lam < -1e-10):
        raise InvalidSpectrumError("negative Schmidt coefficient")
    lam = lam[lam > 0]
    return float(max(0.0, -np.sum(lam * np.log(lam)) / np.log(base)))


def mode_overlap(phi_j, Phi, dw: float, lambdas=None):
    """Idler/Raman mode overlaps |int phi_j(w) Phi*(w) dw|^2.

    Returns the per-mode array, or sum_j lambda_j |...|^2 when lambdas is given.
    Phi must be unit-normalized on the grid.
    """
    phi = np.atleast_2d(np.asarray(phi_j, dtype=complex))
    Phi = np.asarray(Phi, dtype=complex)
    nrm = np.sum(np.abs(Phi) ** 2) * dw
    if abs(nrm - 1) > 1e-6:
        raise NormalizationError(f"Phi norm is {nrm}, expected 1")
    amp = phi @ np.conj(Phi) * dw
    per_mode = np.abs(amp) ** 2
    if lambdas is None:
        return per_mode
    lam = np.asarray(lambdas, dtype=float)[: len(per_mode)]
    return float(np.sum(lam * per_mode[: len(lam)]))


def cascade_schmidt(tau: float, factor: float, grid: SpectralGrid = SpectralGrid(),
                    n_modes: int | None = None) -> SchmidtModes:
    """Schmidt modes of the cascade amplitude for pulse width tau and N mu_bar + 1 = factor.

    Frequencies are in units of the natural idler rate Gamma3 (so Gamma3N = factor).
    """
    w = grid.omega
    f = two_photon_spectrum(w, w, PumpPulse(tau), CollectiveDecay.from_factor(factor))
    return decompose(f, grid.dw, grid.dw, n_modes)


def fwhm(x, y) -> float:
    """Full width at half maximum of a single-peaked sampled curve (linear interpolation)."""
    y = np.asarray(y, dtype=float)
    i = int(np.argmax(y))
    half = y[i] / 2
    lo = i
    while lo > 0 and y[lo] > half:
        lo -= 1
    hi = i
    while hi < len(y) - 1 and y[hi] > half:
        hi += 1
    xl = np.interp(half, [y[lo], y[lo + 1]], [x[lo], x[lo + 1]])
    xr = np.interp(half, [y[hi], y[hi - 1]], [x[hi], x[hi - 1]])
    return float(xr - xl)
