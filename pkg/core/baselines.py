"""
Méthodes de comparaison

- histogram_match : transfert bande par bande par appariement des quantiles
- fit_kcca : CCA à noyau régularisée sur des paires d'échantillons (représentants des liens)
- common_band_subset : restriction aux bandes communes (référence « sans adaptation »)
"""

from dataclasses import dataclass

import numpy as np

from core.eigsolve import solve_gep
from core.errors import DataError, DimensionMismatch, EmptyDataset, EmptyObject, NoCommonBands, NonFinite, TooFewPairs
from core.kernels import KernelSpec, gram, median_bandwidth
from models.dataset import NO_TIE, MultiDomainCollection
from utils.logging_config import get_logger

logger = get_logger("manialign.baselines")

DEFAULT_BINS = 256
DEFAULT_KCCA_EPS = 1e-3


def _as_bands(values, name: str) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    if values.ndim != 2 or values.shape[0] == 0:
        raise EmptyDataset("baselines", f"{name} values are empty")
    if not np.all(np.isfinite(values)):
        raise NonFinite("baselines", f"{name} values contain NaN or Inf")
    return values


@dataclass(frozen=True)
class HistogramMap:
    """Une fonction de transfert monotone affine par morceaux par bande (noeuds source -> noeuds référence)."""

    source_knots: tuple[np.ndarray, ...]
    reference_knots: tuple[np.ndarray, ...]

    @property
    def num_bands(self) -> int:
        return len(self.source_knots)

    def apply(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        flat = values.ndim == 1
        values = values[:, None] if flat else values
        if values.shape[1] != self.num_bands:
            raise DimensionMismatch("baselines", f"map has {self.num_bands} bands, values have {values.shape[1]}")
        mapped = np.column_stack([
            np.interp(values[:, band], self.source_knots[band], self.reference_knots[band])
            for band in range(self.num_bands)
        ])
        return mapped[:, 0] if flat else mapped


def _band_transfer(source: np.ndarray, reference: np.ndarray, bins: int, band: int) -> tuple[np.ndarray, np.ndarray]:
    levels = np.linspace(0.0, 1.0, bins)
    source_q = np.quantile(source, levels)
    reference_q = np.quantile(reference, levels)

    knots, inverse = np.unique(source_q, return_inverse=True)
    if knots.size == 1:
        logger.warning(f"Band {band}: constant source values, using affine min/max fallback")
        low, high = float(reference.min()), float(reference.max())
        middle = 0.5 * (low + high)
        value = float(knots[0])
        return np.array([value - 1.0, value, value + 1.0]), np.array([low, middle, high])
    # noeuds source dupliqués : moyenne des quantiles de référence correspondants
    targets = np.bincount(inverse, weights=reference_q) / np.bincount(inverse)
    return knots, np.maximum.accumulate(targets)


def histogram_match(source_band_values, reference_band_values, bins: int = DEFAULT_BINS) -> HistogramMap:
    """
    Appariement d'histogrammes par interpolation des quantiles empiriques.

    Args:
        source_band_values: Valeurs source (n_s × bandes, ou vecteur pour une bande)
        reference_band_values: Valeurs de référence (n_r × bandes)
        bins: Nombre de noeuds de quantiles (>= 2)

    Returns:
        HistogramMap
    """
    if bins < 2:
        raise DataError("baselines", f"bins must be >= 2, got {bins}")
    source = _as_bands(source_band_values, "source")
    reference = _as_bands(reference_band_values, "reference")
    if source.shape[1] != reference.shape[1]:
        raise DimensionMismatch("baselines", f"{source.shape[1]} source bands vs {reference.shape[1]} reference bands")
    transfers = [_band_transfer(source[:, b], reference[:, b], bins, b) for b in range(source.shape[1])]
    return HistogramMap(tuple(t[0] for t in transfers), tuple(t[1] for t in transfers))


@dataclass(frozen=True)
class PairedProjection:
    """
    Projections kCCA des deux vues.

    Les coefficients duaux agissent sur les noyaux centrés ; les statistiques de
    centrage du jeu d'apprentissage sont conservées pour la projection hors échantillon.
    """

    alphas: tuple[np.ndarray, np.ndarray]
    samples: tuple[np.ndarray, np.ndarray]
    specs: tuple[KernelSpec, KernelSpec]
    eps: float
    p: int
    correlations: np.ndarray
    eigenvalues: np.ndarray

    def transform(self, view: int, X) -> np.ndarray:
        if view not in (0, 1):
            raise DataError("baselines", f"view must be 0 or 1, got {view}")
        train = self.samples[view]
        K_train = gram(train, train, self.specs[view])
        K_new = gram(X, train, self.specs[view])
        centered = K_new - K_train.mean(axis=0)[None, :] - K_new.mean(axis=1)[:, None] + K_train.mean()
        return centered @ self.alphas[view]


def _center(K: np.ndarray) -> np.ndarray:
    q = K.shape[0]
    H = np.eye(q) - np.full((q, q), 1.0 / q)
    return H @ K @ H


def _resolve(spec: KernelSpec, X: np.ndarray) -> KernelSpec:
    if spec.resolved:
        return spec
    return KernelSpec("rbf", median_bandwidth(X))


def fit_kcca(paired_A, paired_B, specs=None, eps: float = DEFAULT_KCCA_EPS, p: int = 2) -> PairedProjection:
    """
    CCA à noyau régularisée.

    [[0, KaKb], [KbKa, 0]] w = ρ blockdiag((Ka+εI)², (Kb+εI)²) w, résolu par
    eigsolve sur le problème décalé (2B − A) w = (2 − ρ) B w pour obtenir les
    plus grandes corrélations en premier.

    Args:
        paired_A: Vue A, q × d_A (ligne i appariée à la ligne i de B)
        paired_B: Vue B, q × d_B
        specs: Noyau par vue (un seul KernelSpec ou une paire ; défaut linéaire)
        eps: Régularisation (> 0)
        p: Nombre de directions canoniques

    Returns:
        PairedProjection ; correlations = corrélation empirique des scores appariés
    """
    A_view = np.asarray(paired_A, dtype=np.float64)
    B_view = np.asarray(paired_B, dtype=np.float64)
    if A_view.ndim != 2 or B_view.ndim != 2:
        raise DimensionMismatch("baselines", "paired views must be 2-D matrices")
    q = A_view.shape[0]
    if B_view.shape[0] != q:
        raise TooFewPairs("baselines", f"views have {q} and {B_view.shape[0]} rows, pairs must match")
    if q < max(p, 2):
        raise TooFewPairs("baselines", f"{q} pairs for p={p}")
    if not eps > 0:
        raise DataError("baselines", f"eps must be > 0, got {eps}")
    if specs is None:
        specs = KernelSpec("linear")
    if isinstance(specs, KernelSpec):
        specs = (specs, specs)
    specs = (_resolve(specs[0], A_view), _resolve(specs[1], B_view))

    Ka = _center(gram(A_view, A_view, specs[0]))
    Kb = _center(gram(B_view, B_view, specs[1]))
    zero = np.zeros((q, q))
    cross = np.block([[zero, Ka @ Kb], [Kb @ Ka, zero]])
    Ra = Ka + eps * np.eye(q)
    Rb = Kb + eps * np.eye(q)
    B = np.block([[Ra @ Ra, zero], [zero, Rb @ Rb]])

    solution = solve_gep(2.0 * B - cross, B, p, ridge=0.0)
    rho = 2.0 - solution.eigenvalues
    alpha_a = solution.eigenvectors[:q]
    alpha_b = solution.eigenvectors[q:]

    scores_a = Ka @ alpha_a
    scores_b = Kb @ alpha_b
    correlations = np.zeros(p)
    for j in range(p):
        norm = np.linalg.norm(scores_a[:, j]) * np.linalg.norm(scores_b[:, j])
        # scores déjà centrés (noyaux centrés)
        correlations[j] = float(scores_a[:, j] @ scores_b[:, j]) / norm if norm > 0 else 0.0

    logger.debug(f"fit_kcca q={q} p={p} eps={eps:g} correlations={np.round(correlations, 4).tolist()}")
    return PairedProjection(
        alphas=(alpha_a, alpha_b),
        samples=(A_view.copy(), B_view.copy()),
        specs=specs,
        eps=eps,
        p=p,
        correlations=correlations,
        eigenvalues=rho,
    )


def tie_representative(pixels) -> np.ndarray:
    """Spectre du pixel le plus proche de la moyenne de l'objet ; égalité -> plus petit indice."""
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 2 or pixels.shape[0] == 0:
        raise EmptyObject("baselines", "tie object has no pixel in this domain")
    distances = ((pixels - pixels.mean(axis=0)) ** 2).sum(axis=1)
    return pixels[int(np.argmin(distances))].copy()


def tie_pairs(data: MultiDomainCollection, source: int = 0, target: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Paires (représentant source, représentant cible) pour chaque objet présent dans les deux domaines.

    Returns:
        (paired_A, paired_B, identifiants d'objets triés)
    """
    src = data.domain(source)
    tgt = data.domain(target)
    shared = np.intersect1d(src.tie_object[src.tie_object != NO_TIE], tgt.tie_object[tgt.tie_object != NO_TIE])
    if shared.size == 0:
        raise TooFewPairs("baselines", f"domains {source} and {target} share no tie object")
    rows_a, rows_b = [], []
    for obj in shared:
        pixels_a = src.features[src.tie_object == obj]
        pixels_b = tgt.features[tgt.tie_object == obj]
        rows_a.append(tie_representative(pixels_a))
        rows_b.append(tie_representative(pixels_b))
    return np.vstack(rows_a), np.vstack(rows_b), shared


def common_band_subset(data: MultiDomainCollection) -> MultiDomainCollection:
    """
    Garde les bandes dont l'étiquette figure dans tous les domaines, dans l'ordre du premier domaine.
    """
    for dom in data.domains:
        if dom.band_tags is None:
            raise DataError("baselines", f"domain {dom.domain_id} declares no band tags")
    common = [tag for i, tag in enumerate(data.domains[0].band_tags)
              if tag not in data.domains[0].band_tags[:i]
              and all(tag in dom.band_tags for dom in data.domains[1:])]
    if not common:
        raise NoCommonBands("baselines", "domains share no band tag")
    reduced = []
    for dom in data.domains:
        columns = [dom.band_tags.index(tag) for tag in common]
        reduced.append(dom.with_features(dom.features[:, columns], band_tags=tuple(common)))
    logger.info(f"Common bands: {common}")
    return MultiDomainCollection(tuple(reduced), data.class_dictionary)
