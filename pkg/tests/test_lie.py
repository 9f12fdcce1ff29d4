import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obs_thermo.errors import RankDeficientError, ValidationError
from obs_thermo.lie import (
    OperatorBasis, close_algebra, gram_schmidt, is_ideal, observability_space, project_onto,
    same_span, span_contains, traceless_part,
)
from obs_thermo.models import CentralSpinSpec, build_central_spin, dim_formula
from obs_thermo.operators import SIGMA_X, SIGMA_Y, SIGMA_Z, embed_site

from conftest import random_hermitian


def _su(n):
    """Orthonormal basis of traceless Hermitian n x n matrices."""
    mats = []
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), complex)
            e[i, j] = e[j, i] = 1 / np.sqrt(2)
            mats.append(e)
            e = np.zeros((n, n), complex)
            e[i, j], e[j, i] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            mats.append(e)
    for k in range(1, n):
        d = np.zeros(n)
        d[:k], d[k] = 1, -k
        mats.append(np.diag(d / np.linalg.norm(d)).astype(complex))
    return OperatorBasis.from_matrices(mats, orthonormal=True)


def _assert_basis_invariants(b: OperatorBasis, rank_tol=1e-9):
    for e in b.elements:
        assert abs(np.trace(e)) < 1e-12
        assert np.abs(e - e.conj().T).max() < 1e-12
    assert len(b) <= b.n ** 2 - 1
    sv = np.linalg.svd(b.vectors(), compute_uv=False)
    assert sv.min() > rank_tol


# --- traceless_part ---

def test_traceless_part_examples():
    s = embed_site(SIGMA_X, 0, 4)
    np.testing.assert_array_equal(traceless_part(s), s)
    np.testing.assert_array_equal(traceless_part(np.eye(4)), np.zeros((4, 4)))
    np.testing.assert_allclose(traceless_part(np.diag([2.0, 0.0])), SIGMA_Z)


# --- close_algebra ---

def test_closure_su2():
    basis, rep = close_algebra([SIGMA_Z, SIGMA_X])
    assert rep.dimension == 3
    assert sorted(basis.depths) == [0, 0, 1]
    assert span_contains(basis, SIGMA_Y)
    _assert_basis_invariants(basis)


def test_closure_single_generator():
    basis, rep = close_algebra([SIGMA_Z])
    assert (rep.dimension, rep.max_depth) == (1, 0)
    assert rep.closed


def test_closure_errors():
    with pytest.raises(ValidationError):
        close_algebra([])
    with pytest.raises(ValidationError):
        close_algebra([SIGMA_Z, np.eye(4)])


def test_closure_central_spin_n3(central_spin, lie3):
    basis, rep = lie3
    assert rep.dimension == 78
    assert rep.max_depth == 11
    assert rep.generator_count == 2
    assert rep.bracket_rule == "generators"
    assert rep.dimension == len(basis) and rep.max_depth == max(basis.depths)
    _assert_basis_invariants(basis)


@pytest.mark.parametrize("n_bath", [1, 2, 3])
def test_closure_matches_formula(n_bath):
    sys_ = build_central_spin(CentralSpinSpec(n_bath))
    _, rep = close_algebra([sys_.drift, *sys_.controls])
    assert rep.dimension == dim_formula(n_bath)


@pytest.mark.slow
def test_closure_matches_formula_n4():
    t = time.perf_counter()
    sys_ = build_central_spin(CentralSpinSpec(4))
    _, rep = close_algebra([sys_.drift, *sys_.controls])
    assert rep.dimension == dim_formula(4) == 137
    assert time.perf_counter() - t < 600


def test_closure_order_independent(central_spin):
    a, _ = close_algebra([central_spin.drift, *central_spin.controls])
    b, _ = close_algebra([*central_spin.controls, central_spin.drift])
    assert same_span(a, b, 1e-9)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_closure_random_pair_is_full_su_n(seed):
    # two generic Hermitian matrices generate su(n)
    rng = np.random.default_rng(seed)
    basis, rep = close_algebra([random_hermitian(rng, 3), random_hermitian(rng, 3)])
    assert rep.dimension == 8
    assert rep.closed


def test_depth_cap_marks_unclosed(central_spin, lie3):
    _, rep = close_algebra([central_spin.drift, *central_spin.controls], max_depth=3)
    assert rep.max_depth == 3 and not rep.closed


# --- observability_space ---

def test_observability_full_closure_n3(vfull, lie3):
    v, rep = vfull
    # the full invariant span: every bracket with L stays inside
    assert rep.closed
    assert is_ideal(v, lie3[0])
    assert (rep.dimension, rep.max_depth) == (78, 2)


def test_observability_truncated_is_41(v41):
    v, rep = v41
    assert (rep.dimension, rep.max_depth) == (41, 1)
    assert not rep.closed


def test_observability_fully_controllable():
    rng = np.random.default_rng(5)
    lie, _ = close_algebra([random_hermitian(rng, 4), random_hermitian(rng, 4)])
    v, rep = observability_space(lie, random_hermitian(rng, 4))
    assert rep.dimension == 15


def test_observability_identity_observable_is_empty(lie3):
    v, rep = observability_space(lie3[0], 2.5 * np.eye(16))
    assert len(v) == 0 and rep.dimension == 0


def test_observability_depth_zero_is_traceless_observable(central_spin, vfull, lie3):
    v, _ = observability_space(lie3[0], central_spin.observable + 3 * np.eye(16))
    s0 = traceless_part(central_spin.observable)
    np.testing.assert_allclose(v.elements[0], s0 / np.linalg.norm(s0), atol=1e-14)
    assert v.depths[0] == 0


def test_observability_inside_lie(vfull, v41, lie3):
    for basis in (vfull[0], v41[0]):
        for e in basis.elements:
            assert span_contains(lie3[0], e, 1e-9)


# --- gram_schmidt ---

def test_gram_schmidt_examples():
    paulis = OperatorBasis.from_matrices([SIGMA_X / np.sqrt(2), SIGMA_Y / np.sqrt(2)])
    out = gram_schmidt(paulis)
    assert out.orthonormal
    np.testing.assert_allclose(np.abs(out.elements), np.abs(paulis.elements), atol=1e-15)
    out = gram_schmidt(OperatorBasis.from_matrices([SIGMA_Z, SIGMA_Z + SIGMA_X]))
    np.testing.assert_allclose(out.elements[0], SIGMA_Z / np.sqrt(2), atol=1e-15)
    np.testing.assert_allclose(out.elements[1], SIGMA_X / np.sqrt(2), atol=1e-15)


def test_gram_schmidt_rank_deficient():
    with pytest.raises(RankDeficientError):
        gram_schmidt(OperatorBasis.from_matrices([SIGMA_Z, 2 * SIGMA_Z]))


def test_gram_schmidt_central_spin(v41, vfull):
    for v, _ in (v41, vfull):
        assert np.abs(v.gram() - np.eye(len(v))).max() < 1e-10
        assert np.linalg.cond(v.gram()) < 1 + 1e-8


def test_gram_schmidt_same_span(central_spin, lie3):
    raw, _ = observability_space(lie3[0], central_spin.observable, max_depth=1)
    assert same_span(raw, gram_schmidt(raw), 1e-10)


# --- is_ideal / project_onto ---

def test_is_ideal_examples():
    su2, _ = close_algebra([SIGMA_Z, SIGMA_X])
    assert not is_ideal(OperatorBasis.from_matrices([SIGMA_Z]), su2)
    assert is_ideal(su2, su2)


def test_truncated_span_is_not_ideal(v41, lie3):
    assert not is_ideal(v41[0], lie3[0])


def test_project_onto_examples(v41, rng):
    v = v41[0]
    a = 0.3 * v.elements[0] - 1.2 * v.elements[5]
    coeffs, in_span, res = project_onto(v, a)
    assert np.abs(res).max() < 1e-12
    # something orthogonal to the span
    b = random_hermitian(rng, 16)
    _, _, perp = project_onto(v, traceless_part(b))
    _, in_span, _ = project_onto(v, perp)
    assert np.abs(in_span).max() < 1e-12
    # idempotent
    _, p1, _ = project_onto(v, b)
    c2, p2, _ = project_onto(v, p1)
    np.testing.assert_allclose(p2, p1, atol=1e-12)


def test_project_onto_requires_orthonormal(central_spin):
    b = OperatorBasis.from_matrices([central_spin.observable])
    with pytest.raises(ValidationError):
        project_onto(b, central_spin.observable)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_projection_properties(seed):
    rng = np.random.default_rng(seed)
    lie, _ = close_algebra([np.kron(SIGMA_Z, SIGMA_Z), np.kron(SIGMA_X, np.eye(2))])
    v = gram_schmidt(lie)
    a = traceless_part(random_hermitian(rng, 4))
    coeffs, in_span, res = project_onto(v, a)
    np.testing.assert_allclose(in_span + res, a, atol=1e-12)
    assert np.abs([np.vdot(b, res) for b in v.elements]).max() < 1e-10
    np.testing.assert_allclose(coeffs, [np.vdot(b, a).real for b in v.elements], atol=1e-12)
