"""
Alignement de variétés semi-supervisé (SSMA, primal) et à noyau (KEMA, dual)

Les deux modes minimisent (μ·GEO + SIM) / DIS :
- SSMA : X(μL_g + L_s)Xᵀ φ = λ X L_d Xᵀ φ, ordre d = Σ d_m
- KEMA : K(μL_g + L_s)K α = λ K L_d K α, résolu dans l'image numérique de K
  (ordre r = Σ rang(K_m) <= n), norme RKHS pénalisée pour les noyaux rbf

Les vecteurs propres sont découpés en blocs par domaine (offsets de variables
en primal, offsets d'échantillons en dual) ; un échantillon du domaine m se
projette avec son seul bloc.
"""

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as la

from core.eigsolve import default_ridge, fix_signs, solve_gep
from core.errors import (
    ConfigError,
    DataError,
    DegenerateDIS,
    DimensionMismatch,
    InsufficientSpectrum,
    NonFinite,
    UnknownDomain,
)
from core.graphs import (
    LaplacianTriple,
    SparseSym,
    assemble_block_geo,
    knn_graph,
    label_graphs,
    laplacian,
    tie_graphs,
)
from core.kernels import BlockKernel, assemble_block_kernel, gram
from models.config import AlignmentConfig
from models.dataset import MultiDomainCollection
from models.projection import DUAL_KEMA, PRIMAL_SSMA, AlignmentModel, LatentData
from utils.logging_config import get_logger, log_function_call
from utils.step_logger import pipeline_logger

logger = get_logger("manialign.alignment")

DEFAULT_MAX_P = 50
DEFAULT_KERNEL_REG = 1e-3
KERNEL_RANGE_TOLERANCE = 1e-10


@dataclass(frozen=True)
class _Spectrum:
    blocks: tuple[np.ndarray, ...]
    eigenvalues: np.ndarray
    rank_deficiency: int
    ridge: float


def penalty_matrix(L: LaplacianTriple, mu_on: str = "geo") -> np.ndarray:
    """μL_g + L_s (mu_on="geo") ou L_g + μL_s (mu_on="sim")."""
    if mu_on == "geo":
        return L.mu * L.L_g + L.L_s
    if mu_on == "sim":
        return L.L_g + L.mu * L.L_s
    raise DataError("alignment", f"unknown mu placement '{mu_on}'")


def _check_dis(B: np.ndarray, reference: float):
    if not np.any(np.abs(B) > 1e-12 * max(reference, 1.0)):
        raise DegenerateDIS("alignment", "dissimilarity matrix is numerically zero, no class contrast to preserve")


def _solve_and_slice(A, B, p, offsets, ridge, strict, scale_by_sqrt_lambda, lift=None) -> _Spectrum:
    order = A.shape[0]
    if p > order:
        raise DimensionMismatch("alignment", f"p={p} exceeds eigenproblem order {order}")
    if ridge is None:
        ridge = default_ridge(B)
    with pipeline_logger.step("eigsolve", order=order, p=p):
        solution = solve_gep(A, B, p, ridge=ridge, strict=strict)
    vectors = solution.eigenvectors
    if lift is not None:
        vectors = fix_signs(lift @ vectors)
    if scale_by_sqrt_lambda:
        vectors = vectors * np.sqrt(np.clip(solution.eigenvalues, 0.0, None))
    blocks = tuple(
        np.ascontiguousarray(vectors[offsets[m]:offsets[m + 1]]) for m in range(len(offsets) - 1)
    )
    return _Spectrum(blocks, solution.eigenvalues, solution.rank_deficiency_count, float(ridge))


def fit_ssma(
    data: MultiDomainCollection,
    L: LaplacianTriple,
    p: int,
    ridge: float | None = None,
    scale_by_sqrt_lambda: bool = True,
    mu_on: str = "geo",
    strict: bool = True,
) -> AlignmentModel:
    """
    Alignement linéaire dans l'espace des variables.

    Args:
        data: Collection multi-domaines (ordre global des échantillons)
        L: Laplaciens de géométrie, similarité et dissimilarité (ordre n)
        p: Dimension latente
        ridge: Régularisation de B (défaut 1e-8·tr(B)/d)
        scale_by_sqrt_lambda: Projecteurs F = λ^½ φ
        mu_on: Terme pondéré par μ ("geo" ou "sim")
        strict: Échouer si moins de p paires propres utiles

    Returns:
        AlignmentModel primal, un bloc d_m × p par domaine
    """
    if L.order != data.n:
        raise DimensionMismatch("alignment", f"Laplacians have order {L.order}, collection has {data.n} samples")
    X = data.block_data_matrix()
    A = X @ penalty_matrix(L, mu_on) @ X.T
    B = X @ L.L_d @ X.T
    _check_dis(B, float(np.max(np.abs(X))) ** 2)

    spectrum = _solve_and_slice(A, B, p, data.feature_offsets, ridge, strict, scale_by_sqrt_lambda)
    return AlignmentModel(
        mode=PRIMAL_SSMA,
        projectors=spectrum.blocks,
        eigenvalues=spectrum.eigenvalues,
        mu=L.mu,
        p=int(spectrum.eigenvalues.shape[0]),
        scale_by_sqrt_lambda=scale_by_sqrt_lambda,
        mu_on=mu_on,
        metadata={
            "dims": data.dims,
            "sizes": data.sizes,
            "ridge": spectrum.ridge,
            "rank_deficiency": spectrum.rank_deficiency,
            "class_dictionary": list(data.class_dictionary),
        },
    )


def kernel_range(block: np.ndarray, tol: float = KERNEL_RANGE_TOLERANCE) -> tuple[np.ndarray, np.ndarray]:
    """
    Partie numériquement non nulle du spectre d'un bloc de noyau : K_m ≈ U S Uᵀ.

    Returns:
        (U de taille n_m × r_m, S de longueur r_m), valeurs propres > tol·max(S)
    """
    values, vectors = la.eigh(block)
    top = float(values[-1]) if values.size else 0.0
    keep = values > tol * top if top > 0 else np.zeros(values.shape, dtype=bool)
    return vectors[:, keep], values[keep]


def fit_kema(
    data: MultiDomainCollection,
    L: LaplacianTriple,
    K: BlockKernel,
    p: int,
    ridge: float | None = None,
    scale_by_sqrt_lambda: bool = True,
    mu_on: str = "geo",
    strict: bool = True,
    kernel_reg: float = DEFAULT_KERNEL_REG,
) -> AlignmentModel:
    """
    Alignement à noyau dans l'espace des échantillons.

    Le problème K(μL_g + L_s)K α = λ K L_d K α est résolu dans l'image numérique de
    K : avec K_m = U_m S_m U_mᵀ et Φ = ⊕ U_m S_m^½, on pose α = ⊕ U_m S_m^-½ w et
    on résout (ΦᵀPΦ + γ I_rbf) w = λ ΦᵀL_dΦ w. γ = kernel_reg·λ_max(ΦᵀL_dΦ) pénalise
    la norme RKHS des seuls domaines à noyau rbf ; un noyau linéaire reste
    l'équivalent exact de SSMA.

    Les échantillons d'apprentissage de chaque domaine sont conservés dans le
    modèle : la projection hors échantillon passe par le vecteur noyau K_i^m.
    """
    if L.order != data.n or K.assembled.shape[0] != data.n:
        raise DimensionMismatch(
            "alignment",
            f"Laplacians (order {L.order}) and kernel (order {K.assembled.shape[0]}) must match n={data.n}",
        )
    if p > data.n:
        raise DimensionMismatch("alignment", f"p={p} exceeds eigenproblem order {data.n}")
    if kernel_reg < 0:
        raise ConfigError("alignment", f"kernel_reg must be nonnegative, got {kernel_reg}")

    features, lifts, regularized, ranks = [], [], [], []
    for m, (block, spec) in enumerate(zip(K.per_domain, K.specs)):
        U, S = kernel_range(block)
        if S.size == 0:
            raise DegenerateDIS("alignment", f"kernel of domain {m} is numerically zero")
        features.append(U * np.sqrt(S))
        lifts.append(U / np.sqrt(S))
        regularized.append(np.full(S.size, spec.kind == "rbf"))
        ranks.append(int(S.size))
    Phi = la.block_diag(*features)
    rank = Phi.shape[1]

    A = Phi.T @ penalty_matrix(L, mu_on) @ Phi
    B = Phi.T @ L.L_d @ Phi
    _check_dis(B, float(np.max(np.abs(K.assembled))) ** 2)
    gamma = 0.0
    mask = np.concatenate(regularized)
    if kernel_reg > 0 and mask.any():
        gamma = kernel_reg * float(la.eigvalsh(B, subset_by_index=[rank - 1, rank - 1])[0])
        A = A + np.diag(gamma * mask)

    if p > rank:
        if strict:
            raise InsufficientSpectrum("alignment", f"p={p} exceeds the numerical rank {rank} of the kernel")
        logger.warning(f"Kernel rank {rank} below requested p={p}, keeping {rank} dimensions")
        p = rank

    spectrum = _solve_and_slice(A, B, p, data.sample_offsets, ridge, strict, scale_by_sqrt_lambda,
                                lift=la.block_diag(*lifts))
    return AlignmentModel(
        mode=DUAL_KEMA,
        projectors=spectrum.blocks,
        eigenvalues=spectrum.eigenvalues,
        mu=L.mu,
        p=int(spectrum.eigenvalues.shape[0]),
        scale_by_sqrt_lambda=scale_by_sqrt_lambda,
        mu_on=mu_on,
        kernel_specs=tuple(K.specs),
        training_samples=tuple(np.array(dom.features) for dom in data.domains),
        metadata={
            "dims": data.dims,
            "sizes": data.sizes,
            "ridge": spectrum.ridge,
            "rank_deficiency": spectrum.rank_deficiency + data.n - rank,
            "class_dictionary": list(data.class_dictionary),
            "bandwidths": K.bandwidths,
            "kernel_rank": ranks,
            "kernel_reg": gamma,
        },
    )


def transform(model: AlignmentModel, domain_id: int, X_new) -> LatentData:
    """
    Projette de nouveaux échantillons du domaine domain_id dans l'espace latent.

    Primal : X_new f^m. Dual : K(X_new, échantillons stockés du domaine m) α^m.
    """
    if not 0 <= domain_id < model.num_domains:
        raise UnknownDomain("alignment", f"unknown domain {domain_id} (model has {model.num_domains})")
    X_new = np.asarray(X_new, dtype=np.float64)
    if X_new.ndim == 1:
        X_new = X_new[None, :]
    expected = model.input_dimension(domain_id)
    if X_new.ndim != 2 or X_new.shape[1] != expected:
        raise DimensionMismatch(
            "alignment", f"domain {domain_id} expects {expected} features, got shape {X_new.shape}"
        )
    if not np.all(np.isfinite(X_new)):
        raise NonFinite("alignment", "samples to transform contain NaN or Inf")

    block = model.projectors[domain_id]
    if model.p == 0 or X_new.shape[0] == 0:
        coordinates = np.zeros((X_new.shape[0], model.p))
    elif model.is_dual:
        K_new = gram(X_new, model.training_samples[domain_id], model.kernel_specs[domain_id])
        coordinates = K_new @ block
    else:
        coordinates = X_new @ block
    return LatentData(coordinates, np.full(X_new.shape[0], domain_id, dtype=np.int64))


def project_collection(model: AlignmentModel, data: MultiDomainCollection) -> LatentData:
    """Coordonnées latentes de tous les échantillons, dans l'ordre global."""
    return LatentData.concatenate([transform(model, m, dom.features) for m, dom in enumerate(data.domains)])


def build_laplacians(data: MultiDomainCollection, config: AlignmentConfig) -> tuple[LaplacianTriple, dict]:
    """
    Graphes k-NN par domaine puis graphes étiquettes (ou liens sémantiques).

    Returns:
        (LaplacianTriple, métadonnées : k effectif par domaine, voie utilisée)
    """
    effective_k = []
    graphs = []
    for m, dom in enumerate(data.domains):
        k = min(config.k, dom.n - 1)
        if k < config.k:
            logger.warning(f"Domain {m} has {dom.n} samples, k reduced from {config.k} to {k}")
        effective_k.append(k)
        graphs.append(knn_graph(dom.features, k) if k >= 1 else SparseSym.empty(dom.n))
    L_g = assemble_block_geo(graphs, data.n)

    use_ties = data.ties.has_ties if config.use_ties is None else config.use_ties
    if use_ties:
        W_s, W_d = tie_graphs(data.ties, data.labels, config.dis_weight_ties)
    else:
        W_s, W_d = label_graphs(data.labels, data.domain_of, config.include_within_domain)

    triple = LaplacianTriple(L_g, laplacian(W_s), laplacian(W_d), config.mu)
    metadata = {
        "k": config.k,
        "k_effective": effective_k,
        "graphs": "ties" if use_ties else "labels",
        "similarity_edges": W_s.num_edges,
        "dissimilarity_edges": W_d.num_edges,
    }
    return triple, metadata


@log_function_call(logger)
def fit(data: MultiDomainCollection, config: AlignmentConfig, run_id: str | None = None) -> AlignmentModel:
    """
    Chaîne complète : graphes, laplaciens, noyaux (KEMA), problème propre.

    Sans p explicite, p = min(d, 50) et le modèle peut en garder moins si le
    spectre utile est plus court.
    """
    run_id = run_id or pipeline_logger.new_run_id()

    with pipeline_logger.step("graphs", run_id=run_id, domains=data.M, n=data.n):
        L, graph_meta = build_laplacians(data, config)

    strict = config.p is not None
    p = config.p if config.p is not None else min(data.d, DEFAULT_MAX_P)

    if config.mode == "ssma":
        model = fit_ssma(
            data, L, p,
            ridge=config.ridge,
            scale_by_sqrt_lambda=config.scale_by_sqrt_lambda,
            mu_on=config.mu_on,
            strict=strict,
        )
    else:
        with pipeline_logger.step("kernels", run_id=run_id):
            K = assemble_block_kernel(
                data, config.kernel_specs(data.M), seed=config.seed, max_samples=config.bandwidth_max_samples
            )
        model = fit_kema(
            data, L, K, p,
            ridge=config.ridge,
            scale_by_sqrt_lambda=config.scale_by_sqrt_lambda,
            mu_on=config.mu_on,
            strict=strict,
            kernel_reg=config.kernel_reg,
        )

    metadata = {**model.metadata, **graph_meta, "p_requested": p}
    model = replace(model, metadata=metadata)
    pipeline_logger.log_fit_summary(run_id, config.mode, model.p, model.eigenvalues, metadata["rank_deficiency"])
    return model
