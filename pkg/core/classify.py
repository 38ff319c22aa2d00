"""
Classification dans l'espace latent

Un seul classifieur est entraîné sur les étiquettes projetées de tous les
domaines et prédit tous les domaines à la fois. SVM linéaire un-contre-tous
(hinge L2, biais régularisé), SVM à noyau par paramétrisation du représentant
(SVM linéaire sur les colonnes de Gram), et 1-NN.
"""

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.exceptions import ConvergenceWarning
from sklearn.metrics import confusion_matrix
from sklearn.model_selection import StratifiedKFold
from sklearn.svm import LinearSVC

from core.errors import ConfigError, DimensionMismatch, EmptyDataset, LengthMismatch, NonFinite, SingleClass, TooFewPerClass
from core.kernels import KernelSpec, gram, median_bandwidth
from models.reports import ClassifierModel, DomainScore, EvalReport
from utils.logging_config import get_logger

logger = get_logger("manialign.classify")

SVM_TOL = 1e-6
SVM_MAX_ITER = 100_000


@dataclass(frozen=True)
class CVResult:
    best: dict
    table: list[dict]


def _check_training(Z, y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if Z.ndim != 2 or Z.shape[0] != y.shape[0]:
        raise LengthMismatch("classify", f"{Z.shape[0] if Z.ndim else 0} samples for {y.shape[0]} labels")
    if not np.all(np.isfinite(Z)):
        raise NonFinite("classify", "training coordinates contain NaN or Inf")
    classes = np.unique(y)
    if classes.size < 2:
        raise SingleClass("classify", f"at least two classes are required, found {classes.size}")
    return Z, y, classes


def _one_vs_rest(features: np.ndarray, y: np.ndarray, classes: np.ndarray, C: float) -> tuple[np.ndarray, np.ndarray]:
    weights = np.zeros((classes.size, features.shape[1]))
    biases = np.zeros(classes.size)
    for index, label in enumerate(classes):
        target = np.where(y == label, 1, -1)
        svm = LinearSVC(
            C=C, loss="hinge", dual=True, tol=SVM_TOL, max_iter=SVM_MAX_ITER,
            fit_intercept=True, intercept_scaling=1.0, random_state=0,
        )
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ConvergenceWarning)
            svm.fit(features, target)
        if any(issubclass(w.category, ConvergenceWarning) for w in caught):
            logger.warning(f"Linear SVM for class {label} did not converge (C={C})")
        weights[index] = svm.coef_[0]
        biases[index] = svm.intercept_[0]
    return weights, biases


def train_linear_svm(Z, y, C: float = 1.0) -> ClassifierModel:
    """
    SVM linéaire un-contre-tous : min ½‖w‖² + ½b² + C Σ max(0, 1 − y(wᵀz + b)).

    Args:
        Z: Coordonnées latentes n × p
        y: Classe par échantillon
        C: Pénalité hinge (> 0)

    Returns:
        ClassifierModel de type linear_svm
    """
    if not C > 0:
        raise ConfigError("classify", f"C must be > 0, got {C}")
    Z, y, classes = _check_training(Z, y)
    weights, biases = _one_vs_rest(Z, y, classes, C)
    return ClassifierModel(
        kind="linear_svm",
        classes=tuple(int(c) for c in classes),
        weights=weights,
        biases=biases,
        metadata={"C": C, "p": int(Z.shape[1]), "n_train": int(Z.shape[0])},
    )


def train_kernel_svm(Z, y, C: float = 1.0, spec: KernelSpec | None = None) -> ClassifierModel:
    """SVM à noyau : SVM linéaire sur les colonnes K(z, prototypes)."""
    if not C > 0:
        raise ConfigError("classify", f"C must be > 0, got {C}")
    Z, y, classes = _check_training(Z, y)
    spec = spec or KernelSpec("rbf")
    if not spec.resolved:
        spec = KernelSpec("rbf", median_bandwidth(Z))
    features = gram(Z, Z, spec)
    weights, biases = _one_vs_rest(features, y, classes, C)
    return ClassifierModel(
        kind="kernel_svm",
        classes=tuple(int(c) for c in classes),
        weights=weights,
        biases=biases,
        prototypes=Z.copy(),
        kernel_spec=spec,
        metadata={"C": C, "p": int(Z.shape[1]), "n_train": int(Z.shape[0]), "sigma": spec.sigma},
    )


def train_onenn(Z, y) -> ClassifierModel:
    Z, y, classes = _check_training(Z, y)
    return ClassifierModel(
        kind="onenn",
        classes=tuple(int(c) for c in classes),
        prototypes=Z.copy(),
        prototype_labels=y.copy(),
        metadata={"p": int(Z.shape[1]), "n_train": int(Z.shape[0])},
    )


def train(Z, y, kind: str = "linear_svm", C: float = 1.0, sigma: float | str = "half_median") -> ClassifierModel:
    if kind == "linear_svm":
        return train_linear_svm(Z, y, C)
    if kind == "kernel_svm":
        return train_kernel_svm(Z, y, C, KernelSpec("rbf", sigma))
    if kind == "onenn":
        return train_onenn(Z, y)
    raise ConfigError("classify", f"unknown classifier kind '{kind}'")


def decision_scores(model: ClassifierModel, Z_new) -> np.ndarray:
    """Scores un-contre-tous, une colonne par classe (distances négatives pour onenn)."""
    Z_new = np.asarray(Z_new, dtype=np.float64)
    if Z_new.ndim == 1:
        Z_new = Z_new.reshape(-1, model.input_dimension) if Z_new.size else np.zeros((0, model.input_dimension))
    if Z_new.shape[1] != model.input_dimension:
        raise DimensionMismatch("classify", f"model expects {model.input_dimension} columns, got {Z_new.shape[1]}")
    if not np.all(np.isfinite(Z_new)):
        raise NonFinite("classify", "coordinates to classify contain NaN or Inf")
    if model.kind == "linear_svm":
        return Z_new @ model.weights.T + model.biases
    if model.kind == "kernel_svm":
        return gram(Z_new, model.prototypes, model.kernel_spec) @ model.weights.T + model.biases
    distances = cdist(Z_new, model.prototypes, metric="sqeuclidean")
    scores = np.full((Z_new.shape[0], model.num_classes), -np.inf)
    for index, label in enumerate(model.classes):
        scores[:, index] = -distances[:, model.prototype_labels == label].min(axis=1)
    return scores


def predict(model: ClassifierModel, Z_new) -> np.ndarray:
    """Argmax des scores ; égalité -> plus petit identifiant de classe."""
    Z_new = np.asarray(Z_new, dtype=np.float64)
    if Z_new.size == 0:
        return np.zeros(0, dtype=np.int64)
    scores = decision_scores(model, Z_new)
    return np.asarray(model.classes, dtype=np.int64)[np.argmax(scores, axis=1)]


def _kappa(confusion: np.ndarray) -> tuple[float, float]:
    total = confusion.sum()
    observed = float(np.trace(confusion)) / total
    expected = float(confusion.sum(axis=1) @ confusion.sum(axis=0)) / (total * total)
    if expected >= 1.0:
        return observed, 1.0 if observed == 1.0 else 0.0
    return observed, (observed - expected) / (1.0 - expected)


def evaluate(pred, truth, domain_of=None, classes=None) -> EvalReport:
    """
    Précision globale, kappa de Cohen, matrice de confusion et détail par domaine.

    confusion[i, j] = nombre d'échantillons de la classe i prédits j.
    """
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise LengthMismatch("classify", f"{pred.size} predictions for {truth.size} reference labels")
    if truth.size == 0:
        raise EmptyDataset("classify", "nothing to evaluate")
    labels = np.unique(np.concatenate([truth, pred])) if classes is None else np.asarray(classes)
    confusion = confusion_matrix(truth, pred, labels=labels)
    overall, kappa = _kappa(confusion)

    per_domain = {}
    if domain_of is not None:
        domain_of = np.asarray(domain_of, dtype=np.int64)
        if domain_of.shape != truth.shape:
            raise LengthMismatch("classify", "domain_of must have one entry per prediction")
        for domain in np.unique(domain_of):
            mask = domain_of == domain
            oa, kp = _kappa(confusion_matrix(truth[mask], pred[mask], labels=labels))
            per_domain[int(domain)] = DomainScore(int(mask.sum()), oa, kp)

    return EvalReport(overall, kappa, confusion, tuple(int(c) for c in labels), per_domain)


def cross_validate(Z, y, grid: dict, folds: int = 3, seed: int = 0, kind: str = "linear_svm") -> CVResult:
    """
    Validation croisée stratifiée sur la grille {p, C, sigma}.

    p sélectionne les p premières dimensions latentes ; sigma n'intervient que
    pour kernel_svm. Meilleure cellule : précision moyenne maximale, égalités
    départagées par le plus petit p puis le plus petit C.

    Returns:
        CVResult(best, table) ; chaque ligne de table : p, C, sigma, mean_accuracy
    """
    Z, y, classes = _check_training(Z, y)
    counts = np.array([np.count_nonzero(y == c) for c in classes])
    if folds < 2:
        raise ConfigError("classify", f"folds must be >= 2, got {folds}")
    if counts.min() < folds:
        raise TooFewPerClass(
            "classify", f"class {int(classes[np.argmin(counts)])} has {int(counts.min())} samples for {folds} folds"
        )

    p_values = grid.get("p") or [Z.shape[1]]
    too_large = [p for p in p_values if p > Z.shape[1] or p < 1]
    if too_large:
        logger.warning(f"Ignoring p values {too_large} outside [1, {Z.shape[1]}]")
    p_values = [p for p in p_values if 1 <= p <= Z.shape[1]]
    if not p_values:
        raise ConfigError("classify", "no valid latent dimension in the cross-validation grid")
    C_values = grid.get("C") or [1.0]
    sigma_values = (grid.get("sigma") or ["half_median"]) if kind == "kernel_svm" else [None]

    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    splits = list(splitter.split(Z, y))

    table = []
    for p, C, sigma in itertools.product(p_values, C_values, sigma_values):
        scores = []
        for train_idx, valid_idx in splits:
            model = train(Z[train_idx, :p], y[train_idx], kind=kind, C=C, sigma=sigma or "half_median")
            scores.append(float(np.mean(predict(model, Z[valid_idx, :p]) == y[valid_idx])))
        table.append({"p": int(p), "C": float(C), "sigma": sigma, "mean_accuracy": float(np.mean(scores))})

    best = min(table, key=lambda row: (-row["mean_accuracy"], row["p"], row["C"]))
    logger.info(f"Cross-validation best: p={best['p']} C={best['C']} sigma={best['sigma']} "
                f"accuracy={best['mean_accuracy']:.4f} ({len(table)} cells)")
    return CVResult(best, table)


def accuracy_by_dimension(Z_train, y_train, Z_test, y_test, p_max: int | None = None,
                          kind: str = "linear_svm", C: float = 1.0,
                          sigma: float | str = "half_median") -> list[tuple[int, float]]:
    """Précision de test en fonction du nombre de dimensions latentes utilisées (1..p_max)."""
    Z_train = np.asarray(Z_train, dtype=np.float64)
    Z_test = np.asarray(Z_test, dtype=np.float64)
    p_max = Z_train.shape[1] if p_max is None else min(p_max, Z_train.shape[1])
    curve = []
    for p in range(1, p_max + 1):
        model = train(Z_train[:, :p], y_train, kind=kind, C=C, sigma=sigma)
        curve.append((p, float(np.mean(predict(model, Z_test[:, :p]) == np.asarray(y_test)))))
    return curve
