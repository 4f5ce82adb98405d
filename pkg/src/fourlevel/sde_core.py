"""Stratonovich SDE integration with the semi-implicit midpoint scheme.

The scheme iterates x_m = x_n + f(t_m, x_m) dt/2 to a fixed point, then steps
x_{n+1} = 2 x_m - x_n.  Noise values xi = dW/dt are drawn once per step at the
start of the interval and held fixed during the iteration.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


class InvalidGridError(ValueError):
    pass


class StepFailure(RuntimeError):
    def __init__(self, step: int, residual: float):
        super().__init__(f"midpoint iteration did not converge at step {step} (residual {residual:.3e})")
        self.step = step
        self.residual = residual


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidGridError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 1:
            raise InvalidGridError(f"n_steps must be >= 1, got {self.n_steps}")

    def nodes(self) -> np.ndarray:
        # computed from the index, never by accumulation
        return self.t0 + np.arange(self.n_steps + 1) * self.dt

    def node(self, k: int) -> float:
        return self.t0 + k * self.dt


@dataclass(frozen=True)
class EnsembleConfig:
    n_realizations: int
    master_seed: int

    def __post_init__(self):
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")

    def stream(self, r: int) -> np.random.Generator:
        """Independent generator for realization r, derived from (master_seed, r)."""
        ss = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(int(r),))
        return np.random.Generator(np.random.PCG64(ss))


@dataclass
class SdeSystem:
    dimension: int
    drift: Callable[[float, np.ndarray], np.ndarray]
    noise: Callable[[float, np.ndarray], np.ndarray]
    n_noise: int


def wiener_increments(n_noise: int, dt: float, stream: np.random.Generator) -> np.ndarray:
    """Real Wiener increments dW ~ N(0, dt); the discrete noise value is dW/dt."""
    if not dt > 0:
        raise InvalidGridError(f"dt must be positive, got {dt}")
    return stream.standard_normal(n_noise) * np.sqrt(dt)


def ito_to_stratonovich(system: SdeSystem, jacobian: Callable | None = None) -> SdeSystem:
    """Return the Stratonovich-equivalent system, drift A - 1/2 sum_jk B_jk d_j B_ik.

    `jacobian(t, x)` may return dB_ik/dx_j as an array of shape (dim, dim, n_noise)
    indexed [j, i, k]; otherwise central differences with h = 1e-6 max(1, |x|) are used.
    The derivative is taken along the real axis, which is the complex derivative
    for holomorphic noise matrices.
    """
    dim = system.dimension

    def fd_jacobian(t, x):
        x = np.asarray(x, dtype=complex)
        out = np.empty((dim, dim, system.n_noise), dtype=complex)
        for j in range(dim):
            h = 1e-6 * max(1.0, abs(x[j]))
            e = np.zeros(dim, dtype=complex)
            e[j] = h
            out[j] = (np.asarray(system.noise(t, x + e)) - np.asarray(system.noise(t, x - e))) / (2 * h)
        return out

    jac = jacobian or fd_jacobian

    def drift(t, x):
        B = np.asarray(system.noise(t, x))
        dB = jac(t, x)
        corr = -0.5 * np.einsum("jk,jik->i", B, dB)
        return np.asarray(system.drift(t, x)) + corr

    return SdeSystem(dim, drift, system.noise, system.n_noise)


def _midpoint_step(f, x, t_mid, dt, tol, max_iter, step):
    z = x
    for _ in range(max_iter):
        z_new = x + f(t_mid, z) * (dt / 2)
        res = np.max(np.abs(z_new - z))
        z = z_new
        if res <= tol * max(1.0, np.max(np.abs(z))):
            return 2 * z - x
    raise StepFailure(step, float(res))


def integrate_midpoint(system: SdeSystem, state0, grid: TimeGrid, stream: np.random.Generator,
                       tol: float = 1e-12, max_iter: int = 50) -> np.ndarray:
    """Integrate a Stratonovich SDE; returns the (n_steps+1, dim) complex trajectory."""
    if not tol > 0 or max_iter < 1:
        raise ValueError("tol must be > 0 and max_iter >= 1")
    x = np.asarray(state0, dtype=complex).reshape(system.dimension)
    traj = np.empty((grid.n_steps + 1, system.dimension), dtype=complex)
    traj[0] = x
    for n in range(grid.n_steps):
        xi = wiener_increments(system.n_noise, grid.dt, stream) / grid.dt
        t_n = grid.node(n)

        def f(t, z, xi=xi):
            return np.asarray(system.drift(t, z)) + np.asarray(system.noise(t, z)) @ xi

        x = _midpoint_step(f, x, t_n + grid.dt / 2, grid.dt, tol, max_iter, n)
        traj[n + 1] = x
    return traj


def kubo_system() -> SdeSystem:
    """Kubo oscillator dz = i z xi dt in Stratonovich form (Ito drift -z/2)."""
    return SdeSystem(1, lambda t, z: np.zeros(1, dtype=complex),
                     lambda t, z: np.array([[1j * z[0]]]), 1)


def kubo_paths(config: EnsembleConfig, grid: TimeGrid, tol: float = 1e-12,
               max_iter: int = 50) -> np.ndarray:
    """All realizations of the Kubo oscillator, shape (R, n_steps+1), z(0) = 1.

    Vectorized over realizations; realization r draws its noise from config.stream(r)
    in the same order as integrate_midpoint would.
    """
    R, dt = config.n_realizations, grid.dt
    dW = np.stack([config.stream(r).standard_normal(grid.n_steps) for r in range(R)]) * np.sqrt(dt)
    xi = dW / dt
    z = np.ones(R, dtype=complex)
    out = np.empty((R, grid.n_steps + 1), dtype=complex)
    out[:, 0] = z
    for n in range(grid.n_steps):
        x = z
        zm = x
        for _ in range(max_iter):
            zm_new = x + 1j * zm * xi[:, n] * (dt / 2)
            res = np.max(np.abs(zm_new - zm))
            zm = zm_new
            if res <= tol:
                break
        else:
            raise StepFailure(n, float(res))
        z = 2 * zm - x
        out[:, n + 1] = z
    return out


def kubo_ensemble_mean(config: EnsembleConfig, grid: TimeGrid):
    """Ensemble mean of z(t) and its standard error (complex, per node)."""
    paths = kubo_paths(config, grid)
    R = paths.shape[0]
    mean = paths.mean(axis=0)
    se = (paths.real.std(axis=0, ddof=1) + 1j * paths.imag.std(axis=0, ddof=1)) / np.sqrt(R)
    return mean, se


def to_interleaved(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    return np.stack([x.real, x.imag], axis=-1).reshape(*x.shape[:-1], -1)


def from_interleaved(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    v = v.reshape(*v.shape[:-1], -1, 2)
    return v[..., 0] + 1j * v[..., 1]
