import numpy as np
import pytest
from hypothesis import given, strategies as st

from fourlevel.analytic_cascade import (AccuracyError, CollectiveDecay, EnsembleShape, PumpPulse, g2, mu_bar,
                                        mu_bar_riemann, signal_amplitude, signal_source, superradiant_factor,
                                        two_photon_spectrum)
from fourlevel.schmidt import fwhm

# (h/lambda, a/lambda) at 8e10 cm^-3, 795 nm; shapes kept small enough for the Riemann oracle
ORACLE_SHAPES = [(10, 2), (50, 5), (100, 10), (200, 3), (20, 5)]
# root-solved along a = 20 lambda for N mu_bar + 1 = 4 and 6
CONTOUR_SHAPES = [(751.7, 20.0, 4.0), (1339.3, 20.0, 6.0)]


def _shape(h, a):
    return EnsembleShape.from_cylinder(h, a, 8e10, 795e-9)


@pytest.mark.parametrize("h, a", ORACLE_SHAPES)
def test_mu_bar_matches_riemann_oracle(h, a):
    s = _shape(h, a)
    assert abs(mu_bar(s) - mu_bar_riemann(s)) / mu_bar_riemann(s) < 1e-6


def test_single_atom_has_no_enhancement():
    s = EnsembleShape(10.0, 3.0, 1)
    assert mu_bar(s) == 0.0 and superradiant_factor(s) == 1.0


@pytest.mark.parametrize("h, a, target", CONTOUR_SHAPES)
def test_contour_regression(h, a, target):
    assert superradiant_factor(_shape(h, a)) == pytest.approx(target, rel=0.1)


def test_accuracy_error_when_refinements_disagree(monkeypatch):
    import fourlevel.analytic_cascade as ac
    # the two refinement passes differ only in the subdivision limit; make their results disagree
    monkeypatch.setattr(ac.integrate, "quad", lambda f, a, b, **k: (float(k["limit"]), 0.0))
    with pytest.raises(AccuracyError):
        mu_bar(EnsembleShape(2.0, 1.0, 5))


def test_mu_bar_falls_with_radius_beyond_first_lobe():
    vals = [mu_bar(EnsembleShape(60.0, A, 1000)) for A in (10.0, 20.0, 40.0)]
    assert vals[0] > vals[1] > vals[2]


def test_spectrum_normalized_and_peaks_on_antidiagonal():
    w = np.linspace(-60, 60, 241)
    f = two_photon_spectrum(w, w, PumpPulse(0.3), CollectiveDecay.from_factor(5))
    dw = w[1] - w[0]
    assert np.sum(np.abs(f) ** 2) * dw * dw == pytest.approx(1.0, abs=1e-6)
    # at fixed idler detuning the maximum sits at dws = -dwi
    j = 200
    assert w[np.argmax(np.abs(f[:, j]))] == pytest.approx(-w[j], abs=dw)


def test_idler_slice_is_lorentzian_of_width_gamma3N():
    w = np.linspace(-50, 50, 4001)
    f = two_photon_spectrum(np.array([0.0, 0.1]), w, PumpPulse(0.01), CollectiveDecay.from_factor(5),
                            normalize=False)
    assert fwhm(w, np.abs(f[0]) ** 2) == pytest.approx(5.0, rel=0.01)


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-50, 50))
def test_gaussian_depends_on_sum_lorentzian_on_idler(a, b, shift):
    pulse, dec = PumpPulse(0.2), CollectiveDecay.from_factor(3)

    def gauss(x, y):
        f = two_photon_spectrum(np.array([x]), np.array([y]), pulse, dec, normalize=False)[0, 0]
        return f * (dec.gamma3N / 2 - 1j * y)

    # removing the idler Lorentzian leaves a function of the sum alone
    assert abs(gauss(a, b) - gauss(a + shift, b - shift)) < 1e-12


def test_signal_amplitude_matches_direct_quadrature():
    from scipy import integrate
    pulse, dec = PumpPulse(1.3), CollectiveDecay(1.0, 3.0, 0.4)
    rate = dec.gamma3N / 2 - 1j * dec.delta_omega_i
    for t in (-2.0, 0.0, 1.5, 4.0):
        g = lambda s: np.exp(-rate * (t - s)) * signal_source(s, 0.7, pulse, dec)
        ref = (integrate.quad(lambda s: g(s).real, -20, t, epsabs=1e-14)[0]
               + 1j * integrate.quad(lambda s: g(s).imag, -20, t, epsabs=1e-14)[0])
        assert abs(signal_amplitude(t, 0.7, pulse, dec) - ref) < 1e-10 * max(1.0, abs(ref))


def test_signal_amplitude_limits():
    pulse, dec = PumpPulse(1.0), CollectiveDecay.from_factor(5)
    assert abs(signal_amplitude(-20.0, 0.3, pulse, dec)) < 1e-12
    assert abs(signal_amplitude(60.0, 0.3, pulse, dec)) < 1e-12


@pytest.mark.parametrize("dws", [0.0, 0.7, -2.0])
def test_signal_amplitude_obeys_its_ode(dws):
    pulse, dec = PumpPulse(1.3), CollectiveDecay(1.0, 3.0, 0.4)
    t = np.linspace(-2, 4, 61)
    h = 1e-5
    dC = (signal_amplitude(t + h, dws, pulse, dec) - signal_amplitude(t - h, dws, pulse, dec)) / (2 * h)
    rhs = ((-dec.gamma3N / 2 + 1j * dec.delta_omega_i) * signal_amplitude(t, dws, pulse, dec)
           + signal_source(t, dws, pulse, dec))
    scale = np.max(np.abs(rhs))
    assert np.max(np.abs(dC - rhs)) / scale < 1e-6


def test_g2_values():
    dec = CollectiveDecay.from_factor(5)
    assert g2(0.0, dec) == 1.0
    assert g2(-1.0, dec) == 0.0
    assert g2(1 / 5, dec) == pytest.approx(np.exp(-1), rel=1e-12)


def test_g2_log_linear_slope():
    dec = CollectiveDecay.from_factor(7.5)
    t = np.linspace(0, 3 / dec.gamma3N, 50)
    slope = np.polyfit(t, np.log(g2(t, dec)), 1)[0]
    assert slope == pytest.approx(-dec.gamma3N, rel=1e-10)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        EnsembleShape(-1.0, 1.0, 3)
    with pytest.raises(ValueError):
        PumpPulse(0.0)
    with pytest.raises(ValueError):
        CollectiveDecay(1.0, -0.5)


def test_non_adiabatic_pulse_warns():
    with pytest.warns(UserWarning):
        PumpPulse(0.1, delta1=1.0, delta2=2.0)
