from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import linalg

from fourlevel.cascade_sim import (ATOMIC, CONJ, N_NOISE, NOISE_DIAGONAL, NOISE_PAIRS, OPERATOR_LEVELS,
                                   CascadeAccumulator, CascadeCoefficients, CascadeGrid, CascadeScheme,
                                   FitDomainError, InstabilityError, ScaledUnits, ShootingError,
                                   SimulationOptions, TranscriptionError, correlation_section, diffusion, drift,
                                   einstein_check, field_noise, fit_superradiant_time, noise_vector,
                                   random_states, shooting_solve, simulate_ensemble, solve_fields,
                                   stratonovich_correction_generic, stratonovich_terms, time_axis_ns)
from fourlevel.cascade_sim import _table
from fourlevel.sde_core import EnsembleConfig

SCHEME = CascadeScheme(delta2=0.3)
TINY = CascadeGrid(n_t=9, n_z=6, dt=0.9)


@pytest.fixture(scope="module")
def coeffs():
    return CascadeCoefficients(SCHEME, SCHEME.units(), 0.4 + 0.2j, 1.0 - 0.3j)


# ---------------------------------------------------------------- independent Heisenberg-picture oracle

def _op(a, b):
    m = np.zeros((4, 4), dtype=complex)
    m[a, b] = 1
    return m


def _heisenberg_drift(state, c):
    """i[H, O] + sum C^+ O C - {C^+ C, O}/2 for every |a><b|, mapped to c-numbers.

    Raising terms carry E+, lowering terms E-, so H is not Hermitian off the physical manifold.
    """
    Eip, Eim, Esp, Esm = state[1:5]
    H = (-c.d1 * _op(1, 1) - c.d2 * _op(2, 2)
         - (c.oa * _op(1, 0) + np.conj(c.oa) * _op(0, 1)) - (c.ob * _op(2, 1) + np.conj(c.ob) * _op(1, 2))
         - (Esp * _op(2, 3) + Esm * _op(3, 2)) - (Eip * _op(3, 0) + Eim * _op(0, 3)))
    jumps = [np.sqrt(c.g01) * _op(0, 1), np.sqrt(c.g12) * _op(1, 2), np.sqrt(c.g32) * _op(3, 2),
             np.sqrt(c.g03) * _op(0, 3)]
    ground = 1 - state[11] - state[12] - state[13]
    out = {}
    for k, (a, b) in list(OPERATOR_LEVELS.items()) + [(0, (0, 0))]:
        O = _op(a, b)
        M = 1j * (H @ O - O @ H)
        for C in jumps:
            Cd = C.conj().T
            M += Cd @ O @ C - 0.5 * (Cd @ C @ O + O @ Cd @ C)
        out[k] = M[0, 0] * ground + sum(M[p, q] * state[m] for m, (p, q) in OPERATOR_LEVELS.items())
    return out


def test_drift_matches_heisenberg_oracle(coeffs):
    states = random_states(1000, np.random.default_rng(11))
    d = drift(states.T, coeffs)
    for n, state in enumerate(states):
        ref = _heisenberg_drift(state, coeffs)
        for k in ATOMIC:
            assert abs(d[k, n] - ref[k]) < 1e-12 * max(1.0, abs(ref[k]))


def test_population_sum_conserved_with_equal_couplings():
    scheme = CascadeScheme(g_ratio=1.0)
    c = CascadeCoefficients(scheme, scheme.units(), 0.4, 1.0)
    rng = np.random.default_rng(2)
    x = random_states(1, rng)[0] * 0.05
    x[1:5] = [0.02 + 0.01j, 0.02 - 0.01j, 0.03j, -0.03j]
    x[13], x[12], x[11] = 0.3, 0.1, 0.05
    ground = 1 - 0.45
    h = 1e-3
    for _ in range(1000):
        d = drift(x[:, None], c)[:, 0]
        ground += h * _heisenberg_drift(x, c)[0]
        x = x + h * d
    assert abs(ground + x[11] + x[12] + x[13] - 1) < 1e-8


def test_drift_at_empty_state_is_pump_only(coeffs):
    x = np.zeros((20, 1), dtype=complex)
    d = drift(x, coeffs)[:, 0]
    # only the ground-state coherences driven by pump a survive
    assert d[5] == pytest.approx(1j * coeffs.oa) and d[19] == pytest.approx(-1j * np.conj(coeffs.oa))
    assert np.all(np.delete(d, [5, 19]) == 0)
    s = stratonovich_terms(x, coeffs)[:, 0]
    assert s[13] == pytest.approx((-5 * coeffs.g01 + coeffs.g12) / 4)
    assert s[5] == pytest.approx(1j * coeffs.oa / 2)


def test_drift_conjugate_symmetry(coeffs):
    # on a state whose daggered variables are conjugates, the drifts are conjugates too
    x = random_states(4, np.random.default_rng(5)).T
    x[[2, 4]] = np.conj(x[[1, 3]])
    for k in (5, 6, 7, 8, 9, 10):
        x[CONJ[k]] = np.conj(x[k])
    for k in (11, 12, 13):
        x[k] = x[k].real
    d = drift(x, coeffs)
    for k in ATOMIC:
        np.testing.assert_allclose(d[CONJ[k]], np.conj(d[k]), atol=1e-13)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_generic_correction_matches_closed_form(coeffs, seed):
    x = random_states(3, np.random.default_rng(seed)).T
    np.testing.assert_allclose(stratonovich_correction_generic(x, coeffs), stratonovich_terms(x, coeffs),
                               atol=1e-13)


# ---------------------------------------------------------------- diffusion and noise

def test_diffusion_symmetric_and_conjugate_images(coeffs):
    x = random_states(2, np.random.default_rng(8)).T
    D = diffusion(x, coeffs)
    for (i, j), v in D.items():
        np.testing.assert_array_equal(v, D[(j, i)])
    # on a physical state the image entries are conjugates of the listed ones
    y = x.copy()
    y[[2, 4]] = np.conj(y[[1, 3]])
    for k in (5, 6, 7, 8, 9, 10):
        y[CONJ[k]] = np.conj(y[k])
    for k in (11, 12, 13):
        y[k] = y[k].real
    Dy = diffusion(y, coeffs)
    for (i, j), v in _table(y, coeffs).items():
        np.testing.assert_allclose(Dy[(int(CONJ[i]), int(CONJ[j]))], np.conj(v), atol=1e-13)


def test_noise_matrix_reproduces_diffusion_exactly(coeffs):
    x = random_states(1, np.random.default_rng(4)).T
    # columns of B from unit normals; the positive-P identity is B B^T = D (no conjugation)
    B = noise_vector(x, coeffs, np.eye(N_NOISE))
    BBt = B @ B.T
    D = diffusion(x, coeffs)
    for i in range(3, 20):
        for j in range(3, 20):
            want = complex(np.ravel(D.get((i, j), 0.0))[0])
            assert abs(BBt[i, j] - want) < 1e-12 * max(1.0, abs(want)), (i, j)


def test_field_noise_matches_full_noise(coeffs):
    x = random_states(3, np.random.default_rng(9)).T
    xi = np.random.default_rng(10).standard_normal((N_NOISE, 3))
    F = noise_vector(x, coeffs, xi, 0.7)
    F3, F4 = field_noise(x, coeffs, xi, 0.7)
    np.testing.assert_allclose(F3, F[3], atol=1e-14)
    np.testing.assert_allclose(F4, F[4], atol=1e-14)


def test_zero_diffusion_gives_zero_noise(coeffs):
    xi = np.random.default_rng(0).standard_normal((N_NOISE, 5))
    D = {(i, i): 0.0 for i in NOISE_DIAGONAL}
    D.update({p: 0.0 for p in NOISE_PAIRS})
    assert np.all(noise_vector(np.zeros((20, 5)), None, xi, D=D) == 0)


def test_noise_count():
    assert N_NOISE == 117


def test_noise_moments_every_group_within_three_sigma(coeffs):
    # groups (i)-(ix) are keyed by the first atomic label 5..13, group (x) by the signal field
    x = random_states(1, np.random.default_rng(1)).T
    scale = 0.8
    M = 400_000
    F = noise_vector(x, coeffs, np.random.default_rng(7).standard_normal((N_NOISE, M)), scale)
    D = diffusion(x, coeffs)
    z = defaultdict(list)
    for (i, j) in _table(x, coeffs):
        p = F[i] * F[j]
        want = complex(np.ravel(D[(i, j)])[0]) * scale**2
        se = p.real.std() / np.sqrt(M), p.imag.std() / np.sqrt(M)
        dev = p.mean() - want
        z[i].append(max(abs(dev.real) / se[0], abs(dev.imag) / se[1]))
    assert sorted(z) == [3] + list(range(5, 14))
    for group, vals in z.items():
        assert max(vals) < 3, (group, vals)


def test_single_diagonal_and_pair_moments():
    rng = np.random.default_rng(12)
    D = {(i, i): 0.0 for i in NOISE_DIAGONAL}
    D.update({p: 0.0 for p in NOISE_PAIRS})
    D[(9, 9)] = 0.7 - 0.2j
    D[(5, 6)] = 0.3 + 0.5j
    M = 100_000
    F = noise_vector(np.zeros((20, 1)), None, rng.standard_normal((N_NOISE, M)), D=D)
    for (i, j), want in (((9, 9), 0.7 - 0.2j), ((5, 6), 0.3 + 0.5j), ((5, 5), 0.0), ((6, 6), 0.0)):
        p = F[i] * F[j]
        se = p.real.std() / np.sqrt(M) + 1j * p.imag.std() / np.sqrt(M)
        assert abs((p.mean() - want).real) < 3 * se.real and abs((p.mean() - want).imag) < 3 * se.imag


# ---------------------------------------------------------------- Einstein relation

def test_einstein_worked_entry(coeffs):
    states = random_states(1000, np.random.default_rng(3))
    rep = einstein_check(states, coeffs, entries=[(13, 8)])
    assert rep.max_discrepancy < 1e-12


def test_einstein_full_table(coeffs):
    rep = einstein_check(random_states(10, np.random.default_rng(6)), coeffs, raise_on_error=True)
    assert rep.ok and len(rep.per_entry) == 120


def test_einstein_zero_state(coeffs):
    from fourlevel.cascade_sim import einstein_diffusion
    z = np.zeros(20, dtype=complex)
    z[0] = 1
    zero_pumps = CascadeCoefficients(SCHEME, SCHEME.units(), 0.0, 0.0)
    for e in ((13, 8), (13, 13), (9, 5)):
        assert einstein_diffusion(*e, z, zero_pumps) == 0
        assert complex(np.ravel(diffusion(z[:, None], zero_pumps).get(e, 0.0))[0]) == 0


def test_einstein_flags_transcription_error(coeffs, monkeypatch):
    import fourlevel.cascade_sim as cs
    orig = cs._table

    def broken(x, c, phase=None):
        t = orig(x, c, phase)
        t[(8, 13)] = t[(8, 13)] * 1.001
        return t

    monkeypatch.setattr(cs, "_table", broken)
    with pytest.raises(TranscriptionError, match=r"\(8, 13\)|\(13, 8\)"):
        einstein_check(random_states(2, np.random.default_rng(0)), coeffs, entries=[(13, 8)], raise_on_error=True)


# ---------------------------------------------------------------- shooting

def test_shooting_matches_linear_bvp_oracle():
    A = np.array([[-0.4, 1.1j], [0.7j, 0.2]])
    L, n = 1.7, 801
    z = np.linspace(0, L, n)
    Ez = np.stack([linalg.expm(A * zz) for zz in z])  # (n, 2, 2)

    def propagate(y0):
        return np.einsum("nij,j->in", Ez, y0)

    # y1(0) = 0.5 given, y2(L) = -0.3 + 0.2i required
    prof, it = shooting_solve(propagate, [0.5, 0.0], [1], [-0.3 + 0.2j])
    # closed form: y2(0) from the last row of exp(A L)
    M = Ez[-1]
    y20 = (-0.3 + 0.2j - M[1, 0] * 0.5) / M[1, 1]
    assert abs(prof[1, 0] - y20) < 1e-8 and abs(prof[1, -1] - (-0.3 + 0.2j)) < 1e-8
    assert it <= 3


def test_shooting_trivial_and_stagnation():
    prof, it = shooting_solve(lambda y0: np.repeat(y0[:, None], 5, axis=1), [0.0, 0.0], [1], [0.0])
    assert it == 0 and np.all(prof == 0)
    with pytest.raises(ShootingError):
        shooting_solve(lambda y0: np.ones((2, 5), dtype=complex), [0.0, 0.0], [1], [0.0])


def test_solve_fields_boundaries(coeffs):
    x = random_states(3, np.random.default_rng(13)).T[:, None, :].repeat(7, axis=1)
    E = solve_fields(x, coeffs, 0.05)
    # signal vanishes at the far end, idler at the entrance
    assert np.max(np.abs(E[[2, 3], -1])) < 1e-8 and np.max(np.abs(E[[0, 1], 0])) < 1e-14
    zero = solve_fields(np.zeros_like(x), coeffs, 0.05)
    assert np.all(zero == 0)


# ---------------------------------------------------------------- units, ensemble, fitting

def test_cooperation_time_at_reference_density():
    assert ScaledUnits.from_density(1e10).T_c * 1e9 == pytest.approx(0.35, abs=0.01)


def test_grid_lookup():
    assert CascadeGrid.for_density(5e8) == CascadeGrid(101, 44, 0.9)
    with pytest.raises(ValueError):
        CascadeGrid.for_density(3e9)
    with pytest.raises(ValueError):
        CascadeGrid(1, 4, 0.1)


def test_no_noise_no_pumps_is_dark():
    res = simulate_ensemble(SCHEME, TINY, EnsembleConfig(3, 1), SimulationOptions(noise=False, pumps=False))
    assert np.all(res.I_s == 0) and np.all(res.I_i == 0) and np.all(res.G == 0)


def test_batch_size_does_not_change_results():
    a = simulate_ensemble(SCHEME, TINY, EnsembleConfig(6, 4), SimulationOptions(batch_size=2))
    b = simulate_ensemble(SCHEME, TINY, EnsembleConfig(6, 4), SimulationOptions(batch_size=6))
    np.testing.assert_allclose(a.G, b.G, rtol=1e-12, atol=1e-300)
    np.testing.assert_allclose(a.populations, b.populations, rtol=1e-12, atol=1e-300)
    assert np.any(a.G != 0)


def test_checkpoint_resume_matches_straight_run(tmp_path):
    ck = str(tmp_path / "ck.npz")
    simulate_ensemble(SCHEME, TINY, EnsembleConfig(4, 9), SimulationOptions(batch_size=2), checkpoint=ck)
    acc = CascadeAccumulator.load(ck)
    assert acc.count == 4 and acc.next_realization == 4
    resumed = simulate_ensemble(SCHEME, TINY, EnsembleConfig(8, 9), SimulationOptions(batch_size=2),
                                checkpoint=ck, resume=True)
    straight = simulate_ensemble(SCHEME, TINY, EnsembleConfig(8, 9), SimulationOptions(batch_size=2))
    np.testing.assert_allclose(resumed.G, straight.G, rtol=1e-12, atol=1e-300)
    assert resumed.n_accepted == 8


def test_divergence_is_rejected_and_reported():
    with pytest.raises(InstabilityError):
        simulate_ensemble(SCHEME, TINY, EnsembleConfig(3, 0), SimulationOptions(cap=1e-30))


def test_time_axis_uses_midpoints():
    u = SCHEME.units()
    t = time_axis_ns(TINY, u)
    assert len(t) == TINY.n_t - 1 and t[0] == pytest.approx(0.5 * TINY.dt * u.T_c * 1e9)


@given(st.floats(1.0, 100.0), st.floats(1e-6, 1e6))
def test_fit_exact_exponential_and_rescaling(T, a):
    t = np.linspace(0, 3 * T, 80)
    g = np.exp(-t / T)
    f1 = fit_superradiant_time(t, g)
    f2 = fit_superradiant_time(t, a * g)
    assert f1.T_f == pytest.approx(T, abs=1e-6)
    assert abs(f1.T_f - f2.T_f) < 1e-10 * T
    assert f1.ci[0] <= f1.T_f <= f1.ci[1]


def test_fit_reference_value():
    t = np.linspace(0, 40, 200)
    assert fit_superradiant_time(t, np.exp(-t / 9.4)).T_f == pytest.approx(9.4, abs=1e-6)


@pytest.mark.parametrize("g", [np.zeros(10), -np.ones(10), np.array([1.0, 0.1, 0.01, 0.001])])
def test_fit_domain_errors(g):
    with pytest.raises(FitDomainError):
        fit_superradiant_time(np.arange(len(g), dtype=float), g)


def test_correlation_section_picks_causal_maximum():
    from fourlevel.cascade_sim import CascadeResult
    n = 6
    t = np.arange(n, dtype=float)
    G = np.zeros((n, n), dtype=complex)
    G[4, 1] = 10  # acausal, ignored
    G[2, 3] = 5
    res = CascadeResult(t, *(np.zeros(n),) * 4, G, G * 0, np.zeros((3, n)), np.zeros((3, n)), 1, 0,
                        SCHEME.units())
    t_m, tau, sec, _ = correlation_section(res)
    assert t_m == 2 and np.all(tau == [0, 1, 2, 3]) and sec[1] == 5
