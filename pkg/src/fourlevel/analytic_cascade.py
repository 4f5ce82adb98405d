"""Closed-form superradiant cascade emission.

Geometric factor mu_bar for a cylinder, collective idler decay
Gamma3N = (N mu_bar + 1) Gamma3, the signal amplitude for Gaussian pumps, the
long-time two-photon spectrum and the signal-idler correlation.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special


class AccuracyError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnsembleShape:
    H: float  # k3 h
    A: float  # k3 a
    N: int

    def __post_init__(self):
        if not (self.H > 0 and self.A > 0):
            raise ValueError("H and A must be positive")
        if self.N < 1:
            raise ValueError("N must be >= 1")

    @classmethod
    def from_cylinder(cls, h_over_lambda: float, a_over_lambda: float, density_cm3: float,
                      wavelength_m: float) -> "EnsembleShape":
        """Cylinder of height h and radius a (in wavelengths) at a given atom density."""
        lam = wavelength_m
        vol = np.pi * (a_over_lambda * lam) ** 2 * (h_over_lambda * lam)
        N = max(1, int(round(density_cm3 * 1e6 * vol)))
        k = 2 * np.pi
        return cls(k * h_over_lambda, k * a_over_lambda, N)


@dataclass(frozen=True)
class CollectiveDecay:
    gamma3: float
    n_mu: float
    delta_omega_i: float = 0.0

    def __post_init__(self):
        if self.n_mu < 0 or self.gamma3 <= 0:
            raise ValueError("need gamma3 > 0 and n_mu >= 0")

    @property
    def gamma3N(self) -> float:
        return (self.n_mu + 1) * self.gamma3

    @classmethod
    def from_factor(cls, factor: float, gamma3: float = 1.0, delta_omega_i: float = 0.0):
        """From the superradiant factor N mu_bar + 1."""
        return cls(gamma3, factor - 1.0, delta_omega_i)


@dataclass(frozen=True)
class PumpPulse:
    tau: float
    area_a: float = 1.0
    area_b: float = 1.0
    delta1: float | None = None
    delta2: float | None = None

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.delta1 is not None and self.delta2 is not None:
            if self.tau * min(abs(self.delta1), abs(self.delta2)) < 1:
                warnings.warn("pulse is not adiabatic: tau < 1/|Delta|", stacklevel=2)

    @property
    def coupling(self) -> float:
        """Omega_a Omega_b / (4 Delta1 Delta2) in pulse areas; detunings default to 1."""
        d1 = 1.0 if self.delta1 is None else self.delta1
        d2 = 1.0 if self.delta2 is None else self.delta2
        return self.area_a * self.area_b / (4 * d1 * d2)


def _mu_integrand(x, H, A):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    one_m = 1 - x
    sq = 1 - x * x
    inner = (np.abs(x) < 1 - 1e-7)
    xi = x[inner]
    out[inner] = ((1 + xi**2) / (one_m[inner] ** 2 * sq[inner])
                  * np.sin(0.5 * H * one_m[inner]) ** 2 * special.j1(A * np.sqrt(sq[inner])) ** 2)
    # analytic limits near the endpoints
    hi = x >= 1 - 1e-7
    lo = x <= -1 + 1e-7
    out[hi] = H**2 * A**2 / 8
    out[lo] = np.sin(H) ** 2 * A**2 / 8
    return out


def _prefactor(shape: EnsembleShape) -> float:
    return 6 * (shape.N - 1) / (shape.N * shape.A**2 * shape.H**2)


def mu_bar(shape: EnsembleShape, rtol: float = 1e-10) -> float:
    """Geometric factor by adaptive Gauss-Kronrod quadrature.

    The interval is split at the zeros of the oscillating factors so each piece is
    smooth; two successive refinements must agree to 1e-8 relative.
    """
    if shape.N == 1:
        return 0.0
    H, A = shape.H, shape.A
    f = lambda x: float(_mu_integrand(np.array([x]), H, A)[0])
    # breakpoints: zeros of sin(H(1-x)/2) and a coarse grid that resolves J1 oscillations
    n_osc = int(np.ceil(max(H, A) / np.pi)) + 4
    edges = np.linspace(-1, 1, 2 * n_osc + 1)

    def total(limit):
        s = 0.0
        # convergence is judged by comparing two refinements below, not by quad's own flags
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            for a, b in zip(edges[:-1], edges[1:]):
                val, _ = integrate.quad(f, a, b, epsabs=0, epsrel=rtol, limit=limit)
                s += val
        return s

    s1 = total(200)
    s2 = total(400)
    if abs(s1 - s2) > 1e-8 * max(abs(s2), 1e-300):
        raise AccuracyError(f"mu_bar quadrature unconverged: {s1} vs {s2}")
    return _prefactor(shape) * s2


def mu_bar_riemann(shape: EnsembleShape, n: int = 1_000_000) -> float:
    """Midpoint Riemann sum on the open interval (brute-force oracle)."""
    if shape.N == 1:
        return 0.0
    x = -1 + (np.arange(n) + 0.5) * (2.0 / n)
    return _prefactor(shape) * float(np.sum(_mu_integrand(x, shape.H, shape.A)) * (2.0 / n))


def superradiant_factor(shape: EnsembleShape) -> float:
    """N mu_bar + 1."""
    return shape.N * mu_bar(shape) + 1.0


def two_photon_spectrum(dws, dwi, pulse: PumpPulse, decay: CollectiveDecay, normalize: bool = True):
    """Long-time two-photon amplitude f on a grid (dws along axis 0, dwi along axis 1).

    With normalize=True the amplitude is scaled so sum |f|^2 dws dwi = 1 on the grid
    (requires uniformly spaced 1-D inputs).
    """
    dws = np.asarray(dws, dtype=float)
    dwi = np.asarray(dwi, dtype=float)
    S, I = np.meshgrid(dws, dwi, indexing="ij")
    f = np.exp(-((S + I) ** 2) * pulse.tau**2 / 8) / (decay.gamma3N / 2 - 1j * I)
    if normalize:
        if dws.ndim != 1 or dwi.ndim != 1 or len(dws) < 2 or len(dwi) < 2:
            raise ValueError("normalization needs 1-D grids")
        ds, di = dws[1] - dws[0], dwi[1] - dwi[0]
        f = f / np.sqrt(np.sum(np.abs(f) ** 2) * ds * di)
    return f


def _one_plus_erf_scaled(z, log_scale):
    """exp(log_scale) * (1 + erf(z)) evaluated without overflow via the Faddeeva function."""
    # 1 + erf(z) = erfc(-z) = exp(-z^2) w(-i z); w is bounded only in the upper half plane,
    # so for Re z > 0 use erfc(-z) = 2 - exp(-z^2) w(i z)
    z = np.asarray(z, dtype=complex)
    log_scale = np.asarray(log_scale, dtype=complex)
    z, log_scale = np.broadcast_arrays(z, log_scale)
    out = np.empty(z.shape, dtype=complex)
    neg = z.real <= 0
    zn, ln = z[neg], log_scale[neg]
    out[neg] = np.exp(ln - zn * zn) * special.wofz(-1j * zn)
    zp, lp = z[~neg], log_scale[~neg]
    out[~neg] = 2 * np.exp(lp) - np.exp(lp - zp * zp) * special.wofz(1j * zp)
    return out[()] if out.ndim == 0 else out


def signal_amplitude(t, dws, pulse: PumpPulse, decay: CollectiveDecay):
    """Signal emission amplitude C_s(t, dws) for Gaussian pumps of width tau.

    Coupling constants, polarization overlaps and the phase-matching sum are set to 1.
    """
    t = np.asarray(t, dtype=float)
    tau, G = pulse.tau, decay.gamma3N
    pref = pulse.coupling / (np.pi * tau**2)
    b = G / 2 + 1j * np.asarray(dws, dtype=float)
    z = (4 * t - b * tau**2) / (2 * np.sqrt(2) * tau)
    log_scale = (-G / 2 + 1j * decay.delta_omega_i) * t + b * b * tau**2 / 8
    # the Gaussian-decay product can be large/small separately; combine in log space
    return pref * (tau / 2) * np.sqrt(np.pi / 2) * _one_plus_erf_scaled(z, log_scale)


def signal_source(t, dws, pulse: PumpPulse, decay: CollectiveDecay):
    """Driving term of dC/dt = (-Gamma3N/2 + i dw_i) C + source(t)."""
    tau = pulse.tau
    pref = pulse.coupling / (np.pi * tau**2)
    return pref * np.exp(1j * (decay.delta_omega_i + dws) * t - 2 * t**2 / tau**2)


def g2(dt, decay: CollectiveDecay):
    """Normalized signal-idler correlation exp(-Gamma3N dt) for dt >= 0, zero before."""
    dt = np.asarray(dt, dtype=float)
    return np.where(dt >= 0, np.exp(-decay.gamma3N * np.clip(dt, 0, None)), 0.0)
