"""DLCZ repeater metrics for a spectrally entangled cascade source.

Entanglement swapping fidelity F, heralding probability P_H and success
probability P_S for non-resolving (NRPD) and number-resolving (PNRD) detectors,
plus polarization-entangled-state projection and teleportation success.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class DetectorKind(str, Enum):
    NRPD = "nrpd"
    PNRD = "pnrd"


@dataclass(frozen=True)
class DetectorModel:
    kind: DetectorKind = DetectorKind.NRPD
    eta_t: float = 1.0
    eta_eff: float = 1.0  # cancels in F, P_H, P_S; kept for the normalization check

    def __post_init__(self):
        object.__setattr__(self, "kind", DetectorKind(self.kind))
        for name in ("eta_t", "eta_eff"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class SwapInput:
    lambdas: tuple
    eta_r: float = 1.0
    overlap: float | None = None  # defaults to lambda_1 (Raman mode matched to phi_1)

    def __post_init__(self):
        lam = np.sort(np.asarray(self.lambdas, dtype=float))[::-1]
        if np.any(lam < -1e-12) or abs(lam.sum() - 1) > 1e-8:
            raise ValueError("lambdas must be non-negative and sum to 1")
        object.__setattr__(self, "lambdas", tuple(lam))
        if self.eta_r <= 0:
            raise ValueError("eta_r must be positive")
        ov = self.lambda1 if self.overlap is None else float(self.overlap)
        if ov < -1e-12 or ov > self.lambda1 + 1e-8:
            raise ValueError("overlap must lie in [0, lambda_1]")
        object.__setattr__(self, "overlap", ov)

    @property
    def lambda1(self) -> float:
        return self.lambdas[0]

    @property
    def purity(self) -> float:
        return float(np.sum(np.square(self.lambdas)))


def _heralding_denominator(eta_r: float) -> float:
    return (np.sqrt(eta_r) + 1 / np.sqrt(eta_r)) ** 2


def _multi_pair_term(inp: SwapInput, det: DetectorModel) -> float:
    s = 1 + inp.purity
    if det.kind is DetectorKind.NRPD:
        return inp.eta_r * (2 - det.eta_t) * s / 2
    return inp.eta_r * (1 - det.eta_t) * s


def swap_metrics(inp: SwapInput, det: DetectorModel):
    """(F, P_H, P_S) of entanglement swapping."""
    if inp.eta_r <= 0:
        raise ValueError("eta_r must be positive")
    m = _multi_pair_term(inp, det)
    num = 1 + inp.overlap
    F = num / (m + 2)
    den = _heralding_denominator(inp.eta_r)
    P_H = (det.eta_t * m + 2 * det.eta_t) / den
    P_S = det.eta_t * num / den
    return float(F), float(P_H), float(P_S)


def pme_success(lambdas, eta_r: float, eta_t: float) -> float:
    """Success probability of projecting the polarization maximally entangled state."""
    inp = SwapInput(tuple(lambdas), eta_r)
    DetectorModel(eta_t=eta_t)
    l1 = inp.lambda1
    return float(4 * (1 + l1**2) / (eta_r * (2 - eta_t) * (1 + inp.purity) + 4) ** 2)


def teleport_success(d0: complex, lambdas, eta_r: float, eta_t: float,
                     detector: DetectorKind | str = DetectorKind.NRPD) -> float:
    """Teleportation success probability.

    The swap fidelity entering here is the NRPD one for either detector kind: the
    number-resolving variant leaves this probability unchanged.
    """
    if abs(d0) > 1 + 1e-12:
        raise ValueError("|d0| must not exceed 1")
    DetectorKind(detector)
    inp = SwapInput(tuple(lambdas), eta_r)
    F, _, _ = swap_metrics(inp, DetectorModel(DetectorKind.NRPD, eta_t))
    p0 = min(abs(d0) ** 2, 1.0)
    p1 = 1 - p0
    l1 = inp.lambda1
    return float(F**2 / (1 + l1) ** 2 * (1 + (2 * l1**2 - 2) * p0 * p1))


def output_normalization(eta1: float, eta2: float, eta_eff, f_grid, dws: float, dwi: float,
                         Phi, dw: float) -> float:
    """Trace of the post-selection density operator before the telecom interference.

    eta_eff may be a scalar or an array on the idler grid (and on the Raman grid).
    With unit-normalized amplitudes and flat eta_eff this is
    eta_eff^2 [eta1 (1 - eta2) + eta2 (1 - eta1)]^2 / 4.
    """
    f = np.asarray(f_grid, dtype=complex)
    Phi = np.asarray(Phi, dtype=complex)
    e_i = np.broadcast_to(np.asarray(eta_eff, dtype=float), (f.shape[1],))
    e_r = np.broadcast_to(np.asarray(eta_eff, dtype=float), Phi.shape)
    If = float(np.sum(np.abs(f) ** 2 * e_i[None, :]) * dws * dwi)
    IP = float(np.sum(np.abs(Phi) ** 2 * e_r) * dw)
    return (eta1**2 * (1 - eta2) ** 2 / 4 * If * If
            + eta1 * eta2 * (1 - eta1) * (1 - eta2) / 2 * If * IP
            + eta2**2 * (1 - eta1) ** 2 / 4 * IP * IP)
