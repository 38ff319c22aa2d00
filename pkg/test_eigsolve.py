"""
Tests du solveur propre généralisé (réduction de Cholesky et oracle)
"""

import numpy as np
import pytest

from core.eigsolve import as_sym_matrix, default_ridge, fix_signs, solve_gep, solve_gep_oracle
from core.errors import DimensionMismatch, InsufficientSpectrum, NonFinite, SingularB


def random_spd(rng, order):
    G = rng.standard_normal((order, order))
    return G @ G.T + order * np.eye(order)


def test_diagonal_pair():
    """A = diag(1,2,3), B = I : deux plus petites valeurs et vecteurs de base"""
    solution = solve_gep(np.diag([1.0, 2.0, 3.0]), np.eye(3), 2, ridge=0.0)
    np.testing.assert_allclose(solution.eigenvalues, [1.0, 2.0], atol=1e-12)
    np.testing.assert_allclose(solution.eigenvectors, np.eye(3)[:, :2], atol=1e-12)
    assert solution.count == 2
    assert solution.rank_deficiency_count == 0


def test_identity_ratio():
    """A = B : toutes les valeurs propres valent 1"""
    rng = np.random.default_rng(3)
    B = random_spd(rng, 6)
    solution = solve_gep(B, B, 6, ridge=0.0)
    np.testing.assert_allclose(solution.eigenvalues, np.ones(6), rtol=1e-10)


@pytest.mark.parametrize("seed", range(20))
def test_matches_oracle_on_random_pair(seed):
    rng = np.random.default_rng(seed)
    order = int(rng.integers(2, 33))
    A = random_spd(rng, order)
    B = random_spd(rng, order)
    fast = solve_gep(A, B, order, ridge=0.0)
    slow = solve_gep_oracle(A, B)
    np.testing.assert_allclose(fast.eigenvalues, slow.eigenvalues, rtol=1e-8)
    residual = A @ fast.eigenvectors - B @ fast.eigenvectors * fast.eigenvalues
    assert np.linalg.norm(residual, axis=0).max() <= 1e-6 * np.linalg.norm(A)


@pytest.mark.parametrize("seed", range(10))
def test_rayleigh_ratio_and_b_norm(seed):
    rng = np.random.default_rng(seed)
    order = int(rng.integers(2, 17))
    A = random_spd(rng, order)
    B = random_spd(rng, order)
    ridge = default_ridge(B)
    solution = solve_gep(A, B, order, ridge=ridge)
    B_reg = B + ridge * np.eye(order)
    V = solution.eigenvectors

    np.testing.assert_allclose(np.einsum("ij,ij->j", V, B_reg @ V), np.ones(order), atol=1e-8)
    ratios = np.einsum("ij,ij->j", V, A @ V) / np.einsum("ij,ij->j", V, B_reg @ V)
    np.testing.assert_allclose(ratios, solution.eigenvalues, rtol=1e-8)
    assert np.all(np.diff(solution.eigenvalues) >= 0)
    assert np.all(solution.eigenvalues >= 0)

    residuals = np.linalg.norm(A @ V - (B_reg @ V) * solution.eigenvalues, axis=0)
    assert residuals.max() <= 1e-6 * np.linalg.norm(A, "fro")


@pytest.mark.parametrize("seed", range(5))
def test_congruence_invariance(seed):
    """Les valeurs propres ne changent pas sous A -> PᵀAP, B -> PᵀBP"""
    rng = np.random.default_rng(100 + seed)
    order = 10
    A = random_spd(rng, order)
    B = random_spd(rng, order)
    P = rng.standard_normal((order, order)) + 3.0 * np.eye(order)
    base = solve_gep(A, B, order, ridge=0.0).eigenvalues
    moved = solve_gep(P.T @ A @ P, P.T @ B @ P, order, ridge=0.0).eigenvalues
    np.testing.assert_allclose(moved, base, rtol=1e-8)


def test_null_space_pairs_are_skipped():
    A = np.diag([0.0, 1.0, 2.0])
    solution = solve_gep(A, np.eye(3), 2, ridge=0.0)
    np.testing.assert_allclose(solution.eigenvalues, [1.0, 2.0])
    assert solution.rank_deficiency_count == 1

    with pytest.raises(InsufficientSpectrum):
        solve_gep(A, np.eye(3), 3, ridge=0.0)

    relaxed = solve_gep(A, np.eye(3), 3, ridge=0.0, strict=False)
    assert relaxed.count == 2


def test_ridge_dominated_direction_is_skipped():
    """Direction où B est nul : valeur propre ~1/ridge, écartée"""
    B = np.diag([1.0, 1.0, 0.0])
    solution = solve_gep(np.eye(3), B, 2)
    np.testing.assert_allclose(solution.eigenvalues, [1.0, 1.0], rtol=1e-6)
    assert solution.rank_deficiency_count == 1
    assert np.allclose(solution.eigenvectors[2], 0.0)


def test_default_ridge():
    assert default_ridge(np.diag([2.0, 4.0])) == pytest.approx(3e-8)
    assert default_ridge(np.zeros((0, 0))) == 0.0


def test_errors():
    with pytest.raises(NonFinite):
        solve_gep(np.array([[np.nan, 0.0], [0.0, 1.0]]), np.eye(2), 1)
    with pytest.raises(DimensionMismatch):
        solve_gep(np.eye(2), np.eye(3), 1)
    with pytest.raises(DimensionMismatch):
        solve_gep(np.eye(2), np.eye(2), 3)
    with pytest.raises(DimensionMismatch):
        solve_gep(np.ones((2, 3)), np.eye(2), 1)
    with pytest.raises(SingularB):
        solve_gep(np.eye(3), -np.eye(3), 1)


def test_inputs_are_symmetrized():
    A = np.array([[2.0, 1.0], [0.0, 2.0]])
    sym = as_sym_matrix(A)
    np.testing.assert_array_equal(sym, [[2.0, 0.5], [0.5, 2.0]])
    assert not sym.flags.writeable
    solution = solve_gep(A, np.eye(2), 2, ridge=0.0)
    np.testing.assert_allclose(solution.eigenvalues, [1.5, 2.5])


def test_fix_signs():
    vectors = np.array([[0.1, 3.0], [-2.0, 0.5]])
    fixed = fix_signs(vectors)
    np.testing.assert_array_equal(fixed, [[-0.1, 3.0], [2.0, 0.5]])


def test_oracle_examples():
    """Oracle : opérateur nul, rapport 1×1, limite d'ordre"""
    zero = solve_gep_oracle(np.zeros((3, 3)), np.eye(3))
    np.testing.assert_allclose(zero.eigenvalues, np.zeros(3), atol=1e-12)

    ratio = solve_gep_oracle(np.array([[5.0]]), np.array([[2.0]]))
    assert ratio.eigenvalues[0] == pytest.approx(2.5, rel=1e-8)

    with pytest.raises(DimensionMismatch):
        solve_gep_oracle(np.eye(65), np.eye(65))


def test_solver_is_deterministic():
    rng = np.random.default_rng(8)
    A = random_spd(rng, 12)
    B = random_spd(rng, 12)
    first = solve_gep(A, B, 4)
    second = solve_gep(A, B, 4)
    np.testing.assert_array_equal(first.eigenvalues, second.eigenvalues)
    np.testing.assert_array_equal(first.eigenvectors, second.eigenvectors)
