import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghlab.errors import InvalidElement, NotHyperbolic
from ghlab.linalg_lie import (
    E_MATRICES,
    J,
    Q,
    Q_TABLE,
    SL2Element,
    SO22Element,
    So22Algebra,
    Sl2Algebra,
    ads_length,
    algebra_defect,
    e_basis,
    phi_alg_matrix,
    phi_group,
    phi_group_matrix,
    projective_distance,
    q_conjugate,
    random_sl2,
    rho_so22_matrix,
    sl2_exp,
    so22_exp,
    translation_length,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_sl2_element_rejects_bad_determinant():
    with pytest.raises(InvalidElement):
        SL2Element(1.0, 1.0, 1.0, 1.0)
    SL2Element(2.0, 0.0, 0.0, 0.5)


def test_sl2_inverse_and_product():
    A = SL2Element.from_matrix([[2.0, 3.0], [1.0, 2.0]])
    prod = A @ A.inverse()
    assert np.allclose(prod.matrix, np.eye(2))


def test_mobius_action_fixes_i_under_rotation():
    t = 0.7
    R = SL2Element(np.cos(t), np.sin(t), -np.sin(t), np.cos(t))
    assert abs(R.act(1j) - 1j) < 1e-15


def test_phi_of_unipotent_matches_hand_computation():
    got = phi_group_matrix(np.array([[1.0, 1.0], [0.0, 1.0]]))
    want = np.array([
        [1.0, -1.0, 1.0, 0.0],
        [1.0, 0.5, 0.5, 0.0],
        [1.0, -0.5, 1.5, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
    assert np.array_equal(got, want)


def test_phi_identity():
    assert np.array_equal(phi_group_matrix(np.eye(2)), np.eye(4))


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_phi_is_homomorphism_into_so22(seed):
    rng = np.random.default_rng(seed)
    A, B = random_sl2(rng), random_sl2(rng)
    PA, PB = phi_group_matrix(A), phi_group_matrix(B)
    scale = np.abs(PA).max() * np.abs(PB).max()
    assert np.abs(PA @ PB - phi_group_matrix(A @ B)).max() <= 1e-12 * scale
    SO22Element(PA)


def test_phi_kills_minus_identity():
    A = random_sl2(np.random.default_rng(1))
    assert np.allclose(phi_group_matrix(-A), phi_group_matrix(A))


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_phi_alg_is_derivative_of_phi(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(2, 2))
    X[1, 1] = -X[0, 0]
    h = 1e-6
    fd = (phi_group_matrix(sl2_exp(h * X)) - phi_group_matrix(sl2_exp(-h * X))) / (2 * h)
    assert np.abs(fd - phi_alg_matrix(X)).max() < 1e-6 * max(1, np.abs(X).max() ** 2)
    assert np.allclose(phi_group_matrix(sl2_exp(X)), so22_exp(phi_alg_matrix(X)), atol=1e-9)


def test_so22_element_checks_invariants():
    with pytest.raises(InvalidElement):
        SO22Element(np.diag([2.0, 0.5, 1.0, 1.0]))
    with pytest.raises(InvalidElement):
        SO22Element(np.diag([-1.0, 1.0, 1.0, 1.0]))


def test_algebra_invariant():
    for E in e_basis():
        assert algebra_defect(E.m) == 0.0
    with pytest.raises(InvalidElement):
        So22Algebra(np.eye(4))


def test_e_basis_is_linearly_independent():
    assert np.linalg.matrix_rank(E_MATRICES.reshape(6, 16)) == 6


def test_sl2_algebra_roundtrip():
    X = Sl2Algebra(1.0, 2.0, 3.0)
    assert Sl2Algebra.from_matrix(X.matrix) == X


def test_q_table_by_entrywise_sign_flip():
    for i, (sign, j) in Q_TABLE.items():
        assert np.array_equal(Q @ E_MATRICES[i - 1] @ np.linalg.inv(Q), sign * E_MATRICES[j - 1])
        assert np.array_equal(q_conjugate(E_MATRICES[i - 1]), sign * E_MATRICES[j - 1])


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_rho_so22_preserves_split_form(seed):
    rng = np.random.default_rng(seed)
    A, B = random_sl2(rng), random_sl2(rng)
    M = rho_so22_matrix(A, B)
    assert np.abs(M.T @ J @ M - J).max() <= 1e-10 * np.abs(M).max() ** 2
    # M -> A M B^t on an arbitrary matrix, read back in the same basis
    N = rng.normal(size=(2, 2))
    from ghlab.linalg_lie import RHO_BASIS

    v = RHO_BASIS.T @ N.ravel()
    assert np.allclose(RHO_BASIS @ (M @ v), (A @ N @ B.T).ravel())


def test_translation_length():
    A = np.diag([np.e, 1 / np.e])
    assert translation_length(A) == pytest.approx(2.0, abs=1e-14)
    with pytest.raises(NotHyperbolic):
        translation_length(np.eye(2))
    assert ads_length(2.0, 4.0) == 3.0


def test_projective_distance_ignores_sign():
    A = random_sl2(np.random.default_rng(3))
    assert projective_distance(A, -A) == 0.0


def test_phi_group_wrapper():
    assert phi_group(SL2Element(1.0, 0.0, 0.0, 1.0)).trace == 4.0
