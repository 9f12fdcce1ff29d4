import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obs_thermo.dynamics import ControlSchedule, propagate
from obs_thermo.errors import NotHermitianError, ValidationError
from obs_thermo.lie import OperatorBasis, close_algebra, gram_schmidt, project_onto, traceless_part
from obs_thermo.observability import (
    DensityState, Stationarity, decompose_state, decompose_states, measured_output,
    output_from_decomposition, split_hamiltonian, stationarity_check,
)
from obs_thermo.operators import SIGMA_X, SIGMA_Y, SIGMA_Z, embed_site

from conftest import random_density, random_hermitian, random_ket


def _su_basis(n):
    rng = np.random.default_rng(0)
    lie, _ = close_algebra([random_hermitian(rng, n), random_hermitian(rng, n)])
    assert len(lie) == n * n - 1
    return gram_schmidt(lie)


def _perp_state(rng, v, base, eps=0.05):
    """``base`` shifted along a direction orthogonal to span(v)."""
    _, _, perp = project_onto(v, traceless_part(random_hermitian(rng, v.n)))
    perp = perp / np.linalg.norm(perp, 2)
    return base + eps * perp * np.linalg.eigvalsh(base)[0]


# --- DensityState ---

def test_density_state_validation():
    with pytest.raises(ValidationError):
        DensityState(np.diag([0.5, 0.6]))
    with pytest.raises(ValidationError):
        DensityState(np.diag([1.2, -0.2]))
    with pytest.raises(ValidationError):
        DensityState(np.array([[0.5, 0.5], [0.0, 0.5]]))
    rho = DensityState.from_ket([1, 1j])
    assert rho.purity == pytest.approx(1.0)
    assert DensityState.maximally_mixed(4).purity == pytest.approx(0.25)


# --- decompose_state ---

def test_decompose_fully_observable(rng):
    v = _su_basis(3)
    rho = random_density(rng, 3)
    dec = decompose_state(rho, v)
    np.testing.assert_allclose(dec.rho_o, rho - np.eye(3) / 3, atol=1e-12)
    assert np.abs(dec.rho_u).max() < 1e-12


def test_decompose_maximally_mixed(v41):
    dec = decompose_state(DensityState.maximally_mixed(16), v41[0])
    assert np.abs(dec.rho_o).max() == 0 and np.abs(dec.rho_u).max() == 0
    np.testing.assert_allclose(dec.effective_state(), np.eye(16) / 16)


def test_decompose_unobservable_state(rng, vfull, central_spin):
    v = vfull[0]
    rho = _perp_state(rng, v, np.eye(16) / 16, eps=0.9)
    DensityState(rho)
    dec = decompose_state(rho, v)
    assert np.abs(dec.rho_o).max() < 1e-12
    assert measured_output(rho, central_spin.observable) == pytest.approx(0.0, abs=1e-12)


def test_decompose_invariants(rng, v41):
    v = v41[0]
    for _ in range(10):
        rho = random_density(rng, 16, rank=3)
        dec = decompose_state(rho, v)
        np.testing.assert_allclose(dec.rho_o + dec.rho_u + np.eye(16) / 16, rho, atol=1e-12)
        assert np.abs([np.vdot(b, dec.rho_u) for b in v.elements]).max() < 1e-10
        np.testing.assert_allclose(decompose_states(rho[None], v)[0], dec.theta, atol=1e-14)


def test_decompose_requires_orthonormal(central_spin):
    raw = OperatorBasis.from_matrices([central_spin.observable])
    with pytest.raises(ValidationError):
        decompose_state(np.eye(16) / 16, raw)


def test_projection_idempotent(rng, v41):
    v = v41[0]
    rho = random_density(rng, 16)
    dec = decompose_state(rho, v)
    again = decompose_state(dec.effective_matrix(), v)
    np.testing.assert_allclose(again.theta, dec.theta, atol=1e-10)


# --- measured_output ---

def test_measured_output_examples(central_spin, rho_up):
    s = central_spin.observable
    assert measured_output(rho_up, s) == pytest.approx(0.0, abs=1e-15)
    assert measured_output(np.eye(16) / 16, s) == pytest.approx(np.trace(s).real / 16)
    plus = np.array([[0.5, 0.5], [0.5, 0.5]])
    assert measured_output(np.kron(plus, np.eye(8) / 8), s) == pytest.approx(1.0)
    with pytest.raises(NotHermitianError):
        measured_output(rho_up, 1j * s)


def test_output_identity_1000_states(central_spin, v41, vfull):
    rng = np.random.default_rng(2024)
    s = central_spin.observable + 0.7 * np.eye(16)
    for v in (v41[0], vfull[0]):
        worst = 0.0
        for _ in range(1000):
            rho = random_density(rng, 16, rank=int(rng.integers(1, 17)))
            dec = decompose_state(rho, v)
            worst = max(worst, abs(measured_output(rho, s) - output_from_decomposition(dec, s)))
        assert worst < 1e-10


def _random_controls(rng, n_runs, n_slots=20):
    return [ControlSchedule(0.0, 1.0, rng.uniform(-3, 3, size=(n_slots, 1))) for _ in range(n_runs)]


def test_indistinguishable_states_give_equal_outputs(central_spin, vfull):
    rng = np.random.default_rng(99)
    v = vfull[0]
    rho1 = random_density(rng, 16)
    rho2 = _perp_state(rng, v, rho1, eps=0.5)
    DensityState(rho2)
    np.testing.assert_allclose(decompose_state(rho1, v).theta, decompose_state(rho2, v).theta,
                               atol=1e-12)
    s = central_spin.observable
    worst = 0.0
    for sched in _random_controls(rng, 50):
        y1 = np.einsum("ab,tba->t", s, propagate(central_spin, sched, rho1)).real
        y2 = np.einsum("ab,tba->t", s, propagate(central_spin, sched, rho2)).real
        worst = max(worst, np.abs(y1 - y2).max())
    assert worst < 1e-8


def test_truncated_span_does_not_fix_outputs(central_spin, v41):
    """States agreeing on the 41 truncated coefficients can still be told apart."""
    rng = np.random.default_rng(99)
    v = v41[0]
    rho1 = random_density(rng, 16)
    rho2 = _perp_state(rng, v, rho1, eps=0.5)
    s = central_spin.observable
    worst = 0.0
    for sched in _random_controls(rng, 5):
        y1 = np.einsum("ab,tba->t", s, propagate(central_spin, sched, rho1)).real
        y2 = np.einsum("ab,tba->t", s, propagate(central_spin, sched, rho2)).real
        worst = max(worst, np.abs(y1 - y2).max())
    assert worst > 1e-4


# --- split_hamiltonian ---

def test_split_examples(central_spin, v41):
    v = v41[0]
    h = 2.0 * v.elements[3] - v.elements[7]
    sp = split_hamiltonian(h, v)
    assert np.abs(sp.h_u).max() < 1e-12
    sp = split_hamiltonian(3.0 * np.eye(16), v)
    assert np.abs(sp.h_o).max() < 1e-12
    np.testing.assert_allclose(sp.h_u, 3.0 * np.eye(16), atol=1e-12)
    sp = split_hamiltonian(central_spin.drift, v)
    assert np.linalg.norm(sp.h_o) > 1 and np.linalg.norm(sp.h_u) > 1
    assert np.linalg.norm(sp.h_o @ sp.h_u - sp.h_u @ sp.h_o) > 1


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_split_invariants(seed):
    rng = np.random.default_rng(seed)
    lie, _ = close_algebra([np.kron(SIGMA_Z, SIGMA_Z), np.kron(SIGMA_X, np.eye(2))])
    v = gram_schmidt(lie)
    h = random_hermitian(rng, 4) + rng.normal() * np.eye(4)
    sp = split_hamiltonian(h, v)
    np.testing.assert_allclose(sp.h_o + sp.h_u, h, atol=1e-12)
    assert np.abs(project_onto(v, sp.h_u)[0]).max() < 1e-10
    np.testing.assert_allclose(sp.h_coeffs, [np.vdot(b, h).real for b in v.elements], atol=1e-12)
    hu_traceless = sp.h_u - np.trace(sp.h_u) / 4 * np.eye(4)
    assert abs(np.vdot(sp.h_o, hu_traceless)) < 1e-10


def test_split_dimension_mismatch(v41):
    with pytest.raises(ValidationError):
        split_hamiltonian(SIGMA_Z, v41[0])


# --- stationarity_check ---

def test_stationarity_abelian_diagonal():
    lie = gram_schmidt(OperatorBasis.from_matrices([np.kron(SIGMA_Z, np.eye(2)),
                                                    np.kron(np.eye(2), SIGMA_Z)]))
    v = gram_schmidt(OperatorBasis.from_matrices([np.kron(SIGMA_Z, SIGMA_Z)]))
    assert stationarity_check(v, lie) == [Stationarity.COMMUTES_WITH_L]


def test_stationarity_su2_neither():
    su2, _ = close_algebra([SIGMA_X, SIGMA_Y])
    assert set(stationarity_check(su2, su2)) == {Stationarity.NEITHER}


def test_stationarity_center_commutes():
    # u(1) x su(2): the sigma_z (x) I direction is central
    lie, _ = close_algebra([np.kron(SIGMA_Z, np.eye(2)), np.kron(np.eye(2), SIGMA_X),
                            np.kron(np.eye(2), SIGMA_Y)])
    v = OperatorBasis.from_matrices([np.kron(SIGMA_Z, np.eye(2)) / 2])
    assert stationarity_check(v, lie) == [Stationarity.COMMUTES_WITH_L]
    assert stationarity_check(OperatorBasis.from_matrices([embed_site(SIGMA_X, 1, 2)]), lie) == [
        Stationarity.NEITHER]


def test_stationarity_dimension_mismatch(v41):
    su2, _ = close_algebra([SIGMA_X, SIGMA_Y])
    with pytest.raises(ValidationError):
        stationarity_check(v41[0], su2)
