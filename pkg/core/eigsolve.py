"""
Problème aux valeurs propres généralisé symétrique A v = λ B v

SSMA (espace des variables, ordre d) et KEMA (espace des échantillons, ordre n)
se ramènent tous deux à ce problème. La résolution passe par une réduction de
Cholesky de B + ridge·I puis une décomposition symétrique standard.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from core.errors import (
    ConvergenceFailure,
    DimensionMismatch,
    InsufficientSpectrum,
    NonFinite,
    SingularB,
)
from utils.logging_config import get_logger

logger = get_logger("manialign.eigsolve")

NULL_THRESHOLD = 1e-9
RESIDUAL_TOLERANCE = 1e-6
ORACLE_MAX_ORDER = 64
ORACLE_JITTER = 1e-9


@dataclass(frozen=True)
class EigenSolution:
    """Paires propres triées par valeur propre croissante (colonne i <-> valeur i)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    rank_deficiency_count: int = 0

    @property
    def count(self) -> int:
        return int(self.eigenvalues.shape[0])


def as_sym_matrix(values, name: str = "matrix") -> np.ndarray:
    """
    Valide une matrice carrée finie et renvoie sa partie symétrique (X + Xᵀ)/2.

    La copie renvoyée est en lecture seule.
    """
    matrix = np.array(values, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatch("eigsolve", f"{name} must be square, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise NonFinite("eigsolve", f"{name} contains NaN or Inf")
    matrix = 0.5 * (matrix + matrix.T)
    matrix.setflags(write=False)
    return matrix


def default_ridge(B: np.ndarray) -> float:
    order = B.shape[0]
    if order == 0:
        return 0.0
    return max(1e-8 * float(np.trace(B)) / order, 0.0)


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Oriente chaque colonne pour que son entrée de plus grand module soit positive."""
    if vectors.size == 0:
        return vectors
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _check_pair(A, B) -> tuple[np.ndarray, np.ndarray]:
    A = as_sym_matrix(A, "A")
    B = as_sym_matrix(B, "B")
    if A.shape != B.shape:
        raise DimensionMismatch("eigsolve", f"A has order {A.shape[0]} but B has order {B.shape[0]}")
    return A, B


def solve_gep(A, B, num_vectors: int, ridge: float | None = None, strict: bool = True) -> EigenSolution:
    """
    Renvoie les num_vectors plus petites paires propres utiles de A v = λ (B + ridge·I) v.

    Une paire est écartée (espace nul) quand sa valeur propre est sous
    1e-9·max(|λ|, 1), le maximum étant pris sur les paires dont la forme
    quadratique vᵀBv domine la contribution du ridge. Les paires dominées par
    le ridge (vᵀBv <= ridge·vᵀv) sont elles aussi écartées : ce sont des directions
    où B est nul, sans signification pour le quotient de Rayleigh.

    Args:
        A: Matrice symétrique (pénalités)
        B: Matrice symétrique semi-définie positive (dissimilarités)
        num_vectors: Nombre de paires demandées
        ridge: Régularisation ajoutée à B (défaut 1e-8·tr(B)/ordre)
        strict: Si False, renvoie moins de paires plutôt que d'échouer

    Returns:
        EigenSolution avec vecteurs de B-norme unitaire
    """
    A, B = _check_pair(A, B)
    order = A.shape[0]
    if num_vectors < 0 or num_vectors > order:
        raise DimensionMismatch("eigsolve", f"num_vectors={num_vectors} outside [0, {order}]")
    if ridge is None:
        ridge = default_ridge(B)
    if ridge < 0 or not np.isfinite(ridge):
        raise NonFinite("eigsolve", f"ridge must be a finite nonnegative number, got {ridge}")

    B_reg = B + ridge * np.eye(order)
    try:
        chol = la.cholesky(B_reg, lower=True)
    except la.LinAlgError as e:
        raise SingularB("eigsolve", f"B + ridge*I is not positive definite (ridge={ridge:.3g}): {e}") from e

    # C = L⁻¹ A L⁻ᵀ
    half = la.solve_triangular(chol, A, lower=True)
    reduced = la.solve_triangular(chol, half.T, lower=True)
    reduced = 0.5 * (reduced + reduced.T)
    values, rotated = la.eigh(reduced)
    vectors = la.solve_triangular(chol.T, rotated, lower=False)

    b_quad = np.einsum("ij,ij->j", vectors, B @ vectors)
    ridge_quad = ridge * np.einsum("ij,ij->j", vectors, vectors)
    ridge_dominated = b_quad <= ridge_quad if ridge > 0 else np.zeros(order, dtype=bool)
    finite_values = values[~ridge_dominated]
    scale = max(float(np.max(np.abs(finite_values))) if finite_values.size else 0.0, 1.0)
    null_mask = ridge_dominated | (values < NULL_THRESHOLD * scale)
    rank_deficiency = int(np.count_nonzero(null_mask))

    usable = np.flatnonzero(~null_mask)
    if usable.size < num_vectors:
        if strict:
            raise InsufficientSpectrum(
                "eigsolve",
                f"requested {num_vectors} eigenpairs but only {usable.size} are outside the null space "
                f"({rank_deficiency} null pairs of {order})",
            )
        logger.warning(f"Only {usable.size} usable eigenpairs, {num_vectors} requested")
        num_vectors = int(usable.size)

    chosen = usable[:num_vectors]
    eigenvalues = values[chosen].copy()
    eigenvectors = fix_signs(vectors[:, chosen])

    norm_a = float(np.linalg.norm(A, "fro"))
    bound = RESIDUAL_TOLERANCE * max(norm_a, np.finfo(np.float64).tiny)
    residuals = np.linalg.norm(A @ eigenvectors - (B_reg @ eigenvectors) * eigenvalues, axis=0)
    if residuals.size and float(residuals.max()) > bound:
        raise ConvergenceFailure(
            "eigsolve",
            f"residual {float(residuals.max()):.3e} exceeds bound {bound:.3e}",
        )

    logger.debug(
        f"solve_gep order={order} ridge={ridge:.3g} returned={num_vectors} null={rank_deficiency}"
    )
    return EigenSolution(eigenvalues, eigenvectors, rank_deficiency)


def solve_gep_oracle(A, B) -> EigenSolution:
    """
    Spectre complet par réduction directe (B + 1e-9·I)⁻¹A, réservé aux tests.

    Indépendant du chemin de Cholesky : inverse explicite puis décomposition
    d'une matrice non symétrique.
    """
    A, B = _check_pair(A, B)
    order = A.shape[0]
    if order > ORACLE_MAX_ORDER:
        raise DimensionMismatch("eigsolve", f"oracle is limited to order {ORACLE_MAX_ORDER}, got {order}")
    B_reg = B + ORACLE_JITTER * np.eye(order)
    try:
        inverse = np.linalg.inv(B_reg)
    except np.linalg.LinAlgError as e:
        raise SingularB("eigsolve", f"B + 1e-9*I is singular: {e}") from e
    if not np.all(np.isfinite(inverse)):
        raise SingularB("eigsolve", "B + 1e-9*I is numerically singular")

    values, vectors = np.linalg.eig(inverse @ A)
    order_idx = np.argsort(values.real, kind="stable")
    values = values.real[order_idx]
    vectors = vectors.real[:, order_idx]
    norms = np.sqrt(np.abs(np.einsum("ij,ij->j", vectors, B_reg @ vectors)))
    norms[norms == 0] = 1.0
    return EigenSolution(values, fix_signs(vectors / norms), 0)
