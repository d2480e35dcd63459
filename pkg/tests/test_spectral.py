import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obsmech.errors import ConsistencyError, ContractError
from obsmech.model import DenseOperator, PureState, build_theta_state
from obsmech.spectral import (SpectralDecomposition, dephase, diagonalize, evolve, evolve_many, group_levels,
                              jump_tolerance, symmetry_witness, time_average_series, time_grid)

import oracles as orc

THETAS = [k * math.pi / 16 for k in range(5)]


def test_diagonalize_reconstructs(sys6):
    sd = sys6.sd
    U, w = sd.eigenvectors, sd.eigenvalues
    assert np.abs(U @ np.diag(w) @ U.conj().T - sys6.H.entries).max() < 1e-12
    assert np.all(np.diff(w) >= 0)
    assert sd.diag_residual < 1e-11


def test_diagonalize_phase_convention(sys6):
    U = sys6.sd.eigenvectors
    piv = U[np.abs(U).argmax(axis=0), np.arange(U.shape[1])]
    assert np.all(piv.real > 0) and np.allclose(np.imag(piv), 0)


def test_diagonalize_rejects_non_hermitian():
    with pytest.raises(ContractError):
        diagonalize(DenseOperator(np.array([[0, 1], [0, 0]], dtype=complex)))


def test_flat_spectrum_is_one_level():
    g = group_levels(diagonalize(DenseOperator(np.eye(4), hermitian=True)))
    assert g.n_levels == 1 and list(g.degeneracies) == [4]


def test_grouping_recovers_planted_degeneracies(rng):
    levels = np.array([-2.0, -1.3, 0.0, 0.4, 1.7])
    mult = [1, 3, 2, 4, 1]
    w = np.repeat(levels, mult)
    Q, _ = np.linalg.qr(rng.normal(size=(w.size, w.size)))
    g = group_levels(diagonalize(DenseOperator(Q @ np.diag(w) @ Q.T, hermitian=True)))
    assert list(g.degeneracies) == mult
    assert np.allclose(g.group_energies, levels, atol=1e-12)
    assert not g.fallback


def test_grouping_fallback_on_generic_spectrum():
    w = np.array([0.0, 0.5, 1.5, 3.0])
    tau, fb = jump_tolerance(w, 1e-15)
    assert fb and tau == 1e-10
    g = group_levels(SpectralDecomposition(w, np.eye(4), 1e-15))
    assert g.n_levels == 4


def test_grouping_requires_sorted():
    with pytest.raises(ContractError):
        group_levels(SpectralDecomposition(np.array([1.0, 0.0]), np.eye(2), 0.0))


def test_chain_spectrum_has_su2_multiplets(sys6):
    # total spin multiplets have odd dimension 2S+1
    g = sys6.grouping
    assert g.degeneracies.sum() == 64
    assert np.all(g.degeneracies % 2 == 1)
    assert g.tolerance < 1e-10


@pytest.mark.parametrize("factor", [1.0, 10.0, 100.0, 1e3, 1e4, 1e5])
def test_grouping_stable_under_safety_factor(sys6, factor):
    ref = sys6.grouping
    g = group_levels(sys6.sd, factor)
    assert np.array_equal(g.bounds, ref.bounds)


def _dense_expect(rho, M):
    return np.trace(rho @ M)


@pytest.mark.parametrize("theta", THETAS)
def test_dephasing_conserves_moments(sys6, theta):
    psi = build_theta_state(sys6.spec, theta)
    st_ = dephase(psi, sys6.grouping, sys6.sd)
    rho0 = np.outer(psi.amplitudes, psi.amplitudes.conj())
    rinf = st_.rho_inf.entries
    H = sys6.H.entries
    assert abs(np.trace(rinf) - 1) < 1e-12
    assert abs(_dense_expect(rinf, H) - _dense_expect(rho0, H)) < 1e-9
    for Q in sys6.charges:
        q = Q.to_dense()
        assert abs(_dense_expect(rinf, q) - _dense_expect(rho0, q)) < 1e-9
    assert np.isclose(st_.energy_probs.sum(), 1)


def test_dephasing_matches_dense_oracle(sys6):
    psi = build_theta_state(sys6.spec, math.pi / 8)
    rho0 = np.outer(psi.amplitudes, psi.amplitudes.conj())
    ref = orc.dephase_dense(rho0, sys6.H.entries)
    got = dephase(psi, sys6.grouping, sys6.sd).rho_inf.entries
    assert np.abs(got - ref).max() < 1e-10


def test_dephasing_idempotent_and_commutes(sys6):
    psi = build_theta_state(sys6.spec, 3 * math.pi / 16)
    rinf = dephase(psi, sys6.grouping, sys6.sd).rho_inf
    twice = dephase(rinf, sys6.grouping, sys6.sd).rho_inf
    assert np.abs(twice.entries - rinf.entries).max() < 1e-12
    H = sys6.H.entries
    assert np.linalg.norm(H @ rinf.entries - rinf.entries @ H) < 1e-10


def test_dephasing_mixed_trace_check(sys6):
    rho = np.eye(64) / 64
    st_ = dephase(rho, sys6.grouping, sys6.sd)
    assert np.allclose(st_.rho_inf.entries, rho, atol=1e-12)
    assert np.allclose(st_.energy_probs, sys6.grouping.degeneracies / 64)


def test_dephasing_energy_components(sys6):
    psi = build_theta_state(sys6.spec, math.pi / 4)
    st_ = dephase(psi, sys6.grouping, sys6.sd)
    H = sys6.H.entries
    for v, n in zip(st_.energy_components(), st_.levels):
        assert np.linalg.norm(H @ v - sys6.grouping.group_energies[n] * v) < 1e-10


def test_dephasing_bad_trace_raises():
    sd = SpectralDecomposition(np.array([0.0, 1.0]), np.eye(2), 0.0)
    g = group_levels(sd)
    with pytest.raises(ConsistencyError):
        # a rank-deficient eigenbasis drops half the weight
        dephase(np.diag([0.5, 0.5]), g, SpectralDecomposition(sd.eigenvalues, np.array([[1.0, 0], [0, 0]]), 0.0))


def test_evolution_matches_expm(sys6):
    from scipy.linalg import expm

    psi = build_theta_state(sys6.spec, math.pi / 8)
    t = 1.37
    ref = expm(-1j * t * sys6.H.entries) @ psi.amplitudes
    assert np.allclose(evolve(psi, sys6.sd, t).amplitudes, ref, atol=1e-11)
    many = evolve_many(psi, sys6.sd, np.array([0.0, t]))
    assert np.allclose(many[:, 0], psi.amplitudes)
    assert np.allclose(many[:, 1], ref, atol=1e-11)


def test_long_time_average_approaches_dephased(sys6):
    psi = build_theta_state(sys6.spec, math.pi / 8)
    P = orc.projector_1(6, "z", 3, 0)
    times = time_grid(0.05, 2000.0)
    states = evolve_many(psi, sys6.sd, times)
    series = np.einsum("it,ij,jt->t", states.conj(), P, states).real
    rinf = dephase(psi, sys6.grouping, sys6.sd).rho_inf.entries
    assert abs(series.mean() - np.trace(rinf @ P).real) < 5e-3


def test_time_grid():
    t = time_grid()
    assert t[0] == 0 and math.isclose(t[-1], 40.02) and t.size == 2002
    with pytest.raises(ValueError):
        time_grid(0.0, 1.0)


def test_time_average_series():
    out = time_average_series([1.0, 2.0, 3.0])
    assert out["mean"] == 2.0 and math.isclose(out["mad"], 2 / 3)
    with pytest.raises(ValueError):
        time_average_series([])


@pytest.mark.parametrize("n", [4, 6])
def test_symmetry_witness_chain(n):
    from obsmech.model import ChainSpec
    from obsmech.pipeline import system

    s = system(ChainSpec(n))
    W1, W2 = symmetry_witness(s.sd, s.grouping)
    H = s.H.entries
    for W in (W1, W2):
        w = W.entries
        assert np.linalg.norm(w @ w.conj().T - np.eye(2**n)) < 1e-10
        assert np.linalg.norm(w @ H - H @ w) / np.linalg.norm(H) < 1e-10
    c = W1.entries @ W2.entries - W2.entries @ W1.entries
    assert np.linalg.norm(c, 2) > 1


def test_symmetry_witness_nondegenerate():
    sd = diagonalize(DenseOperator(np.diag([0.0, 1.0, 2.5, 4.0]), hermitian=True))
    assert symmetry_witness(sd, group_levels(sd)) is None


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-5, 5), min_size=2, max_size=8), st.integers(0, 2**31 - 1))
def test_grouping_property_integer_spectra(levels, seed):
    # integer-valued spectra rotated by a random orthogonal matrix keep their multiplicities
    w = np.sort(np.array(levels, dtype=float))
    Q, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(w.size, w.size)))
    g = group_levels(diagonalize(DenseOperator(Q @ np.diag(w) @ Q.T, hermitian=True)))
    _, counts = np.unique(w, return_counts=True)
    assert list(g.degeneracies) == list(counts)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_dephasing_property_random_mixed(seed):
    r = np.random.default_rng(seed)
    H = np.diag(np.repeat([0.0, 1.0, 2.0], [2, 3, 1])).astype(complex)
    sd = diagonalize(DenseOperator(H, hermitian=True))
    g = group_levels(sd)
    A = r.normal(size=(6, 6)) + 1j * r.normal(size=(6, 6))
    rho = A @ A.conj().T
    rho /= np.trace(rho)
    out = dephase(rho, g, sd).rho_inf.entries
    assert np.allclose(out, orc.dephase_dense(rho, H), atol=1e-10)
    assert abs(np.trace(out) - 1) < 1e-12
    assert np.linalg.eigvalsh(out).min() > -1e-12


def test_pure_state_dephase_requires_normalized():
    with pytest.raises(ValueError):
        PureState(np.zeros(4))
