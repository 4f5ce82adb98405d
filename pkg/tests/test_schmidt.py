import numpy as np
import pytest
from hypothesis import given, strategies as st

from fourlevel.schmidt import (DegenerateInputError, InvalidSpectrumError, NormalizationError, SpectralGrid,
                               cascade_schmidt, decompose, entropy, fwhm, kernel_eigenvalues, mode_overlap)

SMALL = SpectralGrid(-300.0, 300.0, 512)


@pytest.fixture(scope="module")
def reference_modes():
    return cascade_schmidt(0.25, 5.0)


@pytest.fixture(scope="module")
def small_modes():
    return cascade_schmidt(0.25, 5.0, SMALL)


def test_grid_validation():
    with pytest.raises(ValueError):
        SpectralGrid(1.0, -1.0)
    with pytest.raises(ValueError):
        SpectralGrid(n_points=32)
    g = SpectralGrid(-1.0, 1.0, 101)
    assert g.dw == pytest.approx(0.02)


def test_separable_amplitude_is_rank_one():
    w = np.linspace(-10, 10, 200)
    f = np.outer(np.exp(-w**2), 1 / (1 - 1j * w))
    m = decompose(f, w[1] - w[0], w[1] - w[0])
    assert m.lambdas[0] == pytest.approx(1.0, abs=1e-12)
    assert np.all(m.lambdas[1:] < 1e-10)
    assert entropy(m.lambdas) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("f", [np.zeros((8, 8)), np.full((8, 8), np.nan)])
def test_degenerate_input(f):
    with pytest.raises(DegenerateInputError):
        decompose(f)


def test_renormalizes_and_reconstructs(small_modes):
    m = small_modes
    assert m.lambdas.sum() == pytest.approx(1.0, abs=1e-8)
    assert np.all(np.diff(m.lambdas) <= 1e-15) and np.all(m.lambdas >= 0)
    dw = SMALL.dw
    w = SMALL.omega
    from fourlevel.analytic_cascade import CollectiveDecay, PumpPulse, two_photon_spectrum
    f = two_photon_spectrum(w, w, PumpPulse(0.25), CollectiveDecay.from_factor(5.0))
    f = f / np.sqrt(np.sum(np.abs(f) ** 2) * dw * dw)
    err = np.linalg.norm(m.reconstruct() - f) / np.linalg.norm(f)
    assert err < 1e-6


def test_modes_orthonormal(small_modes):
    m = small_modes
    k = 20
    for modes, dw in ((m.signal_modes, m.dws), (m.idler_modes, m.dwi)):
        G = modes[:k].conj() @ modes[:k].T * dw
        np.testing.assert_allclose(G, np.eye(k), atol=1e-8)


def test_signal_mode_phase_convention(small_modes):
    for row in small_modes.signal_modes[:5]:
        j = np.argmax(np.abs(row))
        assert abs(row[j].imag) < 1e-12 and row[j].real > 0


def test_kernel_eigenproblem_agrees_with_svd(small_modes):
    w = SMALL.omega
    from fourlevel.analytic_cascade import CollectiveDecay, PumpPulse, two_photon_spectrum
    f = two_photon_spectrum(w, w, PumpPulse(0.25), CollectiveDecay.from_factor(5.0))
    ev = kernel_eigenvalues(f, SMALL.dw, SMALL.dw)
    np.testing.assert_allclose(ev[:50], small_modes.lambdas[:50], atol=1e-8)


@given(st.integers(1, 40))
def test_uniform_entropy(n):
    assert entropy(np.full(n, 1.0 / n)) == pytest.approx(np.log(n), abs=1e-12)


def test_entropy_edge_cases():
    assert entropy([1.0]) == 0.0
    assert entropy([0.5, 0.5, 0.0]) == pytest.approx(np.log(2))
    assert entropy([0.5, 0.5], base=2) == pytest.approx(1.0)
    with pytest.raises(InvalidSpectrumError):
        entropy([1.1, -0.1])


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=20).filter(lambda v: sum(v) > 1e-3))
def test_entropy_nonnegative(v):
    lam = np.array(v) / sum(v)
    assert entropy(lam) >= 0


def test_matched_overlap_equals_lambda1(small_modes):
    m = small_modes
    Phi = m.idler_modes[0]
    per_mode = mode_overlap(m.idler_modes, Phi, m.dwi)
    assert per_mode[0] == pytest.approx(1.0, abs=1e-8)
    total = mode_overlap(m.idler_modes, Phi, m.dwi, m.lambdas)
    assert total == pytest.approx(m.lambdas[0], abs=1e-8)


def test_orthogonal_overlap_vanishes():
    w = np.linspace(-5, 5, 256)
    dw = w[1] - w[0]
    phi = np.exp(-w**2)[None, :] / np.sqrt(np.sum(np.exp(-2 * w**2)) * dw)
    odd = w * np.exp(-w**2)
    odd = odd / np.sqrt(np.sum(odd**2) * dw)
    assert mode_overlap(phi, odd, dw)[0] < 1e-10


def test_overlap_matches_double_riemann_sum(small_modes):
    m = small_modes
    rng = np.random.default_rng(3)
    Phi = rng.normal(size=SMALL.n_points) + 1j * rng.normal(size=SMALL.n_points)
    Phi /= np.sqrt(np.sum(np.abs(Phi) ** 2) * m.dwi)
    k = 6
    brute = 0.0
    for j in range(k):
        phi = m.idler_modes[j]
        # int int phi(w) phi*(w') Phi*(w) Phi(w') dw dw'
        D = np.outer(phi * np.conj(Phi), np.conj(phi) * Phi) * m.dwi**2
        brute += m.lambdas[j] * D.sum().real
    assert mode_overlap(m.idler_modes[:k], Phi, m.dwi, m.lambdas[:k]) == pytest.approx(brute, abs=1e-8)


def test_overlap_rejects_unnormalized():
    with pytest.raises(NormalizationError):
        mode_overlap(np.ones((1, 4)), np.ones(4), 1.0)


def test_reference_lambda1(reference_modes):
    assert reference_modes.lambdas[0] == pytest.approx(0.80, abs=0.02)
    assert reference_modes.lambdas.sum() == pytest.approx(1.0, abs=1e-8)


def test_entanglement_grows_with_pulse_and_decay():
    g = SpectralGrid(-600.0, 600.0, 1000)
    s = {k: entropy(cascade_schmidt(*k, g).lambdas) for k in [(0.25, 5.0), (0.5, 5.0), (0.5, 10.0)]}
    assert s[(0.5, 5.0)] > s[(0.25, 5.0)]
    assert s[(0.5, 10.0)] > s[(0.5, 5.0)]


@pytest.mark.slow
def test_grid_refinement_stability(reference_modes):
    fine = cascade_schmidt(0.25, 5.0, SpectralGrid(n_points=4000), n_modes=3)
    assert abs(fine.lambdas[0] / reference_modes.lambdas[0] - 1) < 5e-3


def test_fwhm_of_sampled_gaussian():
    x = np.linspace(-10, 10, 4001)
    assert fwhm(x, np.exp(-x**2 / 2)) == pytest.approx(2 * np.sqrt(2 * np.log(2)), rel=1e-5)


@pytest.mark.xfail(strict=True, reason="leading mode is broadened by the idler Lorentzian; "
                                       "measured width is about 11% above the bare Gaussian value")
def test_signal_mode_width_regression(reference_modes):
    w = SpectralGrid().omega
    width = fwhm(w, np.abs(reference_modes.signal_modes[0]))
    assert width == pytest.approx(4 * np.sqrt(2 * np.log(2)) / 0.25, rel=0.10)
