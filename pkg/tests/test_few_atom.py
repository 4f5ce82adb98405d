import numpy as np
import pytest
from hypothesis import given, strategies as st

from fourlevel.few_atom import (AtomGeometry, build_basis, coupling_matrices, dipole_kernels, evolve_lindblad,
                                independent_p1, liouvillian, steady_state_exact)

# frozen from the Liouvillian null vector at side 3 lambda, Omega_a = 0.2, Delta1 = 5 (gamma = 1)
P1S_3LAMBDA = 1.60574e-3
P2S_3LAMBDA = 9.636e-7


def test_two_atom_single_excitation_basis():
    geom = AtomGeometry(np.array([[0, 0, 0], [0.3, 0.1, 0.2]]))
    B = build_basis(geom, 1)
    ph = geom.phases()
    sym = np.zeros(4, dtype=complex)
    sym[0b10], sym[0b01] = ph[0], ph[1]
    sym /= np.sqrt(2)
    assert abs(abs(np.vdot(B[0], sym)) - 1) < 1e-12
    anti = np.zeros(4, dtype=complex)
    anti[0b10], anti[0b01] = ph[0], -ph[1]
    anti /= np.sqrt(2)
    assert abs(abs(np.vdot(B[1], anti)) - 1) < 1e-12


@pytest.mark.parametrize("k", [0, 1, 2, 3, 4])
def test_sector_basis_orthonormal(k):
    B = build_basis(AtomGeometry.square(0.7), k)
    np.testing.assert_allclose(B @ B.conj().T, np.eye(len(B)), atol=1e-12)


def test_kernels_far_field_vanish():
    F, G = dipole_kernels(np.array([1e6]), np.array([0.0]))
    assert abs(F[0]) < 1e-5 and abs(G[0]) < 1e-5


def test_kernel_short_distance_limit():
    F, _ = dipole_kernels(np.array([1e-4]), np.array([0.3]))
    assert F[0] == pytest.approx(1.0, abs=1e-6)


def test_coupling_matrices_symmetric():
    F, G = coupling_matrices(AtomGeometry.square(0.4))
    np.testing.assert_allclose(F, F.T)
    np.testing.assert_allclose(G, G.T)
    assert np.all(np.diag(F) == 1) and np.all(np.diag(G) == 0)


def test_liouvillian_trace_preserving():
    L = liouvillian(AtomGeometry.square(1.3), 0.2, 5.0, 1.0)
    tr = np.eye(16).reshape(-1)
    assert np.max(np.abs(tr @ L)) < 1e-12


def test_steady_state_3lambda():
    P1s, _, P2s, _, rho = steady_state_exact(AtomGeometry.square(3.0), 0.2, 5.0, 1.0)
    assert P1s == pytest.approx(P1S_3LAMBDA, rel=1e-4)
    assert P2s == pytest.approx(P2S_3LAMBDA, rel=1e-3)
    np.testing.assert_allclose(rho, rho.conj().T, atol=1e-12)


def test_time_evolution_reaches_exact_steady_state():
    pops = evolve_lindblad(AtomGeometry.square(3.0), 0.2, 5.0, 1.0, t_end=16.3)
    assert pops.P1s[-1] == pytest.approx(P1S_3LAMBDA, rel=2e-3)
    assert pops.trace_drift < 1e-8


def test_large_spacing_recovers_independent_atoms():
    P1s, *_ = steady_state_exact(AtomGeometry.square(5.0), 0.2, 5.0, 1.0)
    assert 0.95 <= P1s / independent_p1(0.2, 5.0, 1.0) <= 1.05


def test_no_drive_stays_in_ground_state():
    pops = evolve_lindblad(AtomGeometry.square(1.0), 0.0, 5.0, 1.0, t_end=1.0, dt=0.01)
    assert np.max(np.abs(pops.P1s)) == 0 and np.max(np.abs(pops.P2s)) == 0


def test_rejects_coincident_atoms():
    with pytest.raises(ValueError):
        AtomGeometry(np.zeros((2, 3)))


@given(st.floats(0.05, 3.0), st.floats(-10, 10).filter(lambda d: abs(d) > 0.1))
def test_steady_populations_physical(omega, delta):
    P1s, P1ns, P2s, P2ns, rho = steady_state_exact(AtomGeometry.square(0.8), omega, delta, 1.0)
    for p in (P1s, P1ns, P2s, P2ns):
        assert -1e-10 <= p <= 1 + 1e-10
    assert abs(np.trace(rho) - 1) < 1e-10
    assert np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2)) > -1e-9
