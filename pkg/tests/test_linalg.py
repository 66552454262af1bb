import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cram.errors import ContractError
from cram.linalg import (
    matrix_sqrt,
    numerical_rank,
    psd_eig,
    scaled_nuclear_norm,
    scaled_spectral_norm,
    soft_threshold_svd,
    sqrt_pinv,
)

from oracles import prox_gradient_oracle, prox_objective


def test_psd_eig_diagonal():
    s = psd_eig(np.diag([4.0, 1.0]))
    np.testing.assert_allclose(s.values, [4.0, 1.0])
    np.testing.assert_allclose(np.abs(s.basis), np.eye(2), atol=1e-12)


def test_psd_eig_identity():
    np.testing.assert_allclose(psd_eig(np.eye(3)).values, [1.0, 1.0, 1.0])


def test_psd_eig_reconstructs(rng):
    G = rng.normal(size=(4, 4))
    A = G @ G.T
    s = psd_eig(A)
    assert np.linalg.norm(s.reconstruct() - A) < 1e-8
    np.testing.assert_allclose(s.basis.T @ s.basis, np.eye(4), atol=1e-10)
    assert np.all(np.diff(s.values) <= 0) and np.all(s.values >= 0)


def test_psd_eig_clamps_tiny_negative():
    s = psd_eig(np.diag([1.0, -1e-12]))
    assert s.values[-1] == 0.0


@pytest.mark.parametrize("A", [np.array([[1.0, 2.0], [0.0, 1.0]]), np.diag([1.0, -1e-3]), np.ones((2, 3))])
def test_psd_eig_rejects(A):
    with pytest.raises(ContractError):
        psd_eig(A)


def test_matrix_sqrt_examples(rng):
    np.testing.assert_allclose(matrix_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)
    np.testing.assert_array_equal(matrix_sqrt(np.zeros((3, 3))), np.zeros((3, 3)))
    G = rng.normal(size=(5, 5))
    A = G @ G.T
    R = matrix_sqrt(A)
    assert np.linalg.norm(R @ R - A) < 1e-8
    assert np.linalg.eigvalsh(R).min() > -1e-10


def test_matrix_sqrt_fixes_projectors(rng):
    Q, _ = np.linalg.qr(rng.normal(size=(6, 3)))
    Pi = Q @ Q.T
    np.testing.assert_allclose(matrix_sqrt(Pi), Pi, atol=1e-10)


def test_sqrt_pinv_examples(rng):
    np.testing.assert_allclose(sqrt_pinv(np.diag([4.0, 0.0]), 1e-8), np.diag([0.5, 0.0]), atol=1e-15)
    np.testing.assert_allclose(sqrt_pinv(np.eye(3)), np.eye(3), atol=1e-14)
    G = rng.normal(size=(4, 2))
    A = G @ G.T
    proj = sqrt_pinv(A) @ matrix_sqrt(A)
    Q, _ = np.linalg.qr(G)
    np.testing.assert_allclose(proj, Q @ Q.T, atol=1e-8)


def test_soft_threshold_identity_at_zero(rng):
    P = rng.normal(size=(7, 3))
    np.testing.assert_array_equal(soft_threshold_svd(P, 0.0), P)


def test_soft_threshold_full_threshold():
    # (1/n) P^T P = diag(4, 1); lambda = 3 exceeds sqrt(tau_max) = 2
    P = np.array([[2.0, 1.0], [2.0, -1.0], [-2.0, 1.0], [-2.0, -1.0]])
    np.testing.assert_allclose(P.T @ P / 4, np.diag([4.0, 1.0]))
    np.testing.assert_array_equal(soft_threshold_svd(P, 3.0), np.zeros_like(P))


def test_soft_threshold_isotropic():
    P = np.array([[2.0, 0.0], [0.0, 2.0]])
    np.testing.assert_allclose(soft_threshold_svd(P, np.sqrt(2) / 2), 0.5 * P, atol=1e-14)


def test_soft_threshold_matches_prox_oracle(rng):
    P = rng.normal(size=(8, 3))
    M = soft_threshold_svd(P, 0.7)
    assert np.linalg.norm(M - prox_gradient_oracle(P, 0.7)) <= 1e-6


def test_soft_threshold_shape_errors():
    with pytest.raises(ContractError):
        soft_threshold_svd(np.zeros(3), 1.0)
    with pytest.raises(ContractError):
        soft_threshold_svd(np.zeros((3, 2)), -1.0)


def test_scaled_norms(rng):
    assert scaled_nuclear_norm(np.zeros((4, 2))) == 0.0
    assert scaled_spectral_norm(np.zeros((4, 2))) == 0.0
    ones = np.ones((4, 1))
    assert scaled_nuclear_norm(ones) == pytest.approx(1.0, abs=1e-15)
    assert scaled_spectral_norm(ones) == pytest.approx(1.0, abs=1e-15)
    F = rng.normal(size=(10, 3))
    s = np.linalg.svd(F, compute_uv=False)
    assert scaled_nuclear_norm(F) == pytest.approx(s.sum() / np.sqrt(10), rel=1e-14)
    assert scaled_spectral_norm(F) == pytest.approx(s.max() / np.sqrt(10), rel=1e-14)


def test_numerical_rank(rng):
    assert numerical_rank(np.eye(3), 1e-6) == 3
    assert numerical_rank(np.zeros((5, 4)), 1e-6) == 0
    u, v = rng.normal(size=6), rng.normal(size=4)
    assert numerical_rank(np.outer(u, v) + 1e-12 * rng.normal(size=(6, 4)), 1e-6) == 1
    with pytest.raises(ContractError):
        numerical_rank(np.eye(2), 1.5)


def test_duality_attained(rng):
    for _ in range(20):
        n, q = rng.integers(3, 15), rng.integers(1, 5)
        F = rng.normal(size=(n, q))
        G = F @ sqrt_pinv(F.T @ F / n)
        inner = np.sum(G * F) / n
        assert inner == pytest.approx(scaled_nuclear_norm(F), abs=1e-8)
        assert scaled_spectral_norm(G) <= 1 + 1e-8


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**31 - 1),
    n=st.integers(1, 20),
    q=st.integers(1, 5),
)
def test_rank_nonincreasing_in_lambda(seed, n, q):
    P = np.random.default_rng(seed).normal(size=(n, q))
    ranks = [numerical_rank(soft_threshold_svd(P, lam)) for lam in np.linspace(0, 3, 25)]
    assert all(a >= b for a, b in zip(ranks, ranks[1:]))


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**31 - 1),
    n=st.integers(1, 20),
    q=st.integers(1, 5),
    lam=st.floats(0.0, 3.0),
)
def test_prox_beats_oracle_objective(seed, n, q, lam):
    P = np.random.default_rng(seed).normal(size=(n, q))
    M = soft_threshold_svd(P, lam)
    assert prox_objective(P, M, lam) <= prox_objective(P, prox_gradient_oracle(P, lam, steps=300), lam) + 1e-9
