"""
Protocole expérimental : découpage -> échantillonnage -> alignement -> classification -> évaluation

Chaque répétition tire un découpage apprentissage/test stratifié (les pixels des
objets liés restent toujours en apprentissage), choisit les échantillons étiquetés
par classe (domaine principal / autres domaines) et les échantillons non étiquetés,
puis évalue chaque méthode demandée sur le test de tous les domaines.
Les coordonnées sont standardisées sur les échantillons étiquetés et (p, C) est
choisi par validation croisée stratifiée quand la grille `cv` est active (défaut).
Les répétitions peuvent tourner en parallèle ; l'agrégation suit l'ordre des graines.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.model_selection import train_test_split
from sklearn.preprocessing import StandardScaler

from core.alignment import fit, project_collection, transform
from core.baselines import common_band_subset, fit_kcca, histogram_match, tie_pairs
from core.classify import accuracy_by_dimension, cross_validate, evaluate, predict, train
from core.errors import DataError, NoTies, SingleClass
from core.sampling import select_unlabeled
from core.synth import SyntheticDataset
from models.config import ProtocolConfig, RunConfig
from models.dataset import NO_TIE, UNLABELED, MultiDomainCollection
from models.projection import AlignmentModel
from models.reports import EvalReport
from utils.logging_config import get_logger, log_function_call
from utils.step_logger import pipeline_logger

logger = get_logger("manialign.experiment")
summary_logger = get_logger("manialign.experiment.summary")

LATENT_METHODS = ("kema", "ssma")
DEFAULT_KCCA_DIMENSIONS = 10
DEFAULT_CV_DIMENSIONS = 10


@dataclass(frozen=True)
class Split:
    """Indices par domaine : train, test, étiquetés (inclus dans train), non étiquetés."""

    train: tuple[np.ndarray, ...]
    test: tuple[np.ndarray, ...]
    labeled: tuple[np.ndarray, ...]
    unlabeled: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class MethodOutcome:
    report: EvalReport
    p: int | None = None
    curve: list[tuple[int, float]] = field(default_factory=list)


@dataclass(frozen=True)
class RepetitionResult:
    repetition: int
    seed: int
    method: str
    outcome: MethodOutcome


@dataclass
class ExperimentSummary:
    run_id: str
    repetitions: list[RepetitionResult]
    skipped: dict[str, str] = field(default_factory=dict)
    leading_domain: int = 0

    def methods(self) -> list[str]:
        seen = []
        for result in self.repetitions:
            if result.method not in seen:
                seen.append(result.method)
        return seen

    def results(self, method: str) -> list[RepetitionResult]:
        return [r for r in self.repetitions if r.method == method]

    def curve(self, method: str) -> list[tuple[int, float, float]]:
        """(dimension, précision moyenne, écart-type) sur les répétitions."""
        curves = [r.outcome.curve for r in self.results(method) if r.outcome.curve]
        if not curves:
            return []
        length = min(len(c) for c in curves)
        rows = []
        for i in range(length):
            values = np.array([c[i][1] for c in curves])
            rows.append((int(curves[0][i][0]), float(values.mean()), float(values.std())))
        return rows

    def transfer_accuracy(self, report: EvalReport) -> float | None:
        """Précision globale sur le test des domaines autres que le domaine principal."""
        scores = [score for d, score in report.per_domain.items() if d != self.leading_domain]
        total = sum(score.n for score in scores)
        if total == 0:
            return None
        return sum(score.overall_accuracy * score.n for score in scores) / total

    def to_dict(self) -> dict:
        methods = {}
        for method in self.methods():
            results = self.results(method)
            oa = np.array([r.outcome.report.overall_accuracy for r in results])
            kappa = np.array([r.outcome.report.kappa for r in results])
            domains = sorted({d for r in results for d in r.outcome.report.per_domain})
            per_domain = {}
            for d in domains:
                values = np.array([r.outcome.report.per_domain[d].overall_accuracy
                                   for r in results if d in r.outcome.report.per_domain])
                per_domain[str(d)] = {"mean": float(values.mean()), "std": float(values.std())}
            transfer = [self.transfer_accuracy(r.outcome.report) for r in results]
            transfer = np.array([t for t in transfer if t is not None])
            methods[method] = {
                "overall_accuracy": {"mean": float(oa.mean()), "std": float(oa.std())},
                "kappa": {"mean": float(kappa.mean()), "std": float(kappa.std())},
                "per_domain_overall_accuracy": per_domain,
                "transfer_overall_accuracy": (
                    {"mean": float(transfer.mean()), "std": float(transfer.std())} if transfer.size else None
                ),
                "p": [r.outcome.p for r in results],
                "runs": [
                    {"repetition": r.repetition, "seed": r.seed,
                     "overall_accuracy": r.outcome.report.overall_accuracy, "kappa": r.outcome.report.kappa}
                    for r in results
                ],
            }
        return {"repetitions": len({r.repetition for r in self.repetitions}), "methods": methods,
                "skipped": dict(sorted(self.skipped.items()))}


def truth_labels(dataset: SyntheticDataset) -> list[np.ndarray]:
    """Étiquettes de référence par domaine (étiquettes cachées si fournies)."""
    return [dataset.hidden_labels.get(m, dom.labels) for m, dom in enumerate(dataset.collection.domains)]


def _pick_per_class(labels: np.ndarray, candidates: np.ndarray, per_class: int,
                    rng: np.random.Generator, domain: int) -> np.ndarray:
    chosen = []
    for label in np.unique(labels[candidates]):
        if label == UNLABELED:
            continue
        members = candidates[labels[candidates] == label]
        take = min(per_class, members.size)
        if take < per_class:
            logger.warning(f"Domain {domain}: class {label} has {members.size} training samples, {per_class} requested")
        chosen.append(rng.choice(members, size=take, replace=False))
    return np.sort(np.concatenate(chosen)) if chosen else np.zeros(0, dtype=np.int64)


def _split_domain(ties: np.ndarray, truth: np.ndarray, test_fraction: float, state: int, domain: int):
    indices = np.arange(truth.size)
    candidates = indices[(ties == NO_TIE) & (truth != UNLABELED)]
    if candidates.size < 2:
        return indices, np.zeros(0, dtype=np.int64)
    try:
        train_c, test_c = train_test_split(
            candidates, test_size=test_fraction, random_state=state, stratify=truth[candidates]
        )
    except ValueError:
        logger.warning(f"Domain {domain}: stratified split impossible, using a plain random split")
        train_c, test_c = train_test_split(candidates, test_size=test_fraction, random_state=state)
    test = np.sort(test_c)
    return np.setdiff1d(indices, test), test


def make_split(dataset: SyntheticDataset, protocol: ProtocolConfig, seed: int) -> Split:
    collection = dataset.collection
    if protocol.leading_domain >= collection.M:
        raise DataError("experiment", f"leading domain {protocol.leading_domain} out of range (M={collection.M})")
    truth = truth_labels(dataset)
    generators = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(collection.M)]

    train, test, labeled, unlabeled = [], [], [], []
    for m, dom in enumerate(collection.domains):
        rng = generators[m]
        train_m, test_m = _split_domain(dom.tie_object, truth[m], protocol.test_fraction,
                                        int(rng.integers(0, 2**31 - 1)), m)
        per_class = protocol.labeled_per_class_leading if m == protocol.leading_domain else protocol.labeled_per_class_other
        labeled_m = _pick_per_class(dom.labels, train_m, per_class, rng, m) if per_class else np.zeros(0, dtype=np.int64)

        tied = train_m[dom.tie_object[train_m] != NO_TIE]
        pool = np.setdiff1d(train_m, np.union1d(labeled_m, tied))
        count = min(protocol.unlabeled_per_domain, pool.size)
        if count < protocol.unlabeled_per_domain:
            logger.warning(f"Domain {m}: only {pool.size} samples available for {protocol.unlabeled_per_domain} unlabeled")
        chosen = select_unlabeled(dom.features[pool], count, seed=int(rng.integers(0, 2**31 - 1)),
                                  method=protocol.sampling)
        train.append(train_m)
        test.append(test_m)
        labeled.append(labeled_m)
        unlabeled.append(pool[chosen])
    return Split(tuple(train), tuple(test), tuple(labeled), tuple(unlabeled))


def training_collection(collection: MultiDomainCollection, split: Split) -> MultiDomainCollection:
    """Échantillons d'apprentissage de l'alignement : étiquetés, non étiquetés et pixels liés."""
    domains = []
    for m, dom in enumerate(collection.domains):
        tied = split.train[m][dom.tie_object[split.train[m]] != NO_TIE]
        index = np.union1d(np.union1d(split.labeled[m], split.unlabeled[m]), tied)
        subset = dom.subset(index)
        labels = np.where(np.isin(index, split.labeled[m]), subset.labels, UNLABELED)
        domains.append(subset.with_labels(labels))
    return MultiDomainCollection(tuple(domains), collection.class_dictionary)


def _cv_dimensions(protocol: ProtocolConfig, available: int) -> list[int]:
    requested = protocol.cv.p or list(range(1, DEFAULT_CV_DIMENSIONS + 1))
    dimensions = [p for p in requested if 1 <= p <= available]
    return dimensions or [available]


def _fit_predict(Z_lab, y_lab, Z_test, protocol: ProtocolConfig, seed: int):
    """
    Standardise les coordonnées sur les échantillons étiquetés, choisit (p, C, sigma)
    par validation croisée si la grille est active, puis entraîne et prédit.

    Returns:
        (prédictions, coordonnées standardisées d'apprentissage et de test, p, C, sigma)
    """
    classes, counts = np.unique(np.asarray(y_lab), return_counts=True)
    if classes.size < 2:
        raise SingleClass("experiment", f"classifier needs labeled samples of two classes, found {classes.size}")
    scaler = StandardScaler().fit(Z_lab)
    Z_lab, Z_test = scaler.transform(Z_lab), scaler.transform(Z_test)
    p, C, sigma = Z_lab.shape[1], protocol.C, protocol.classifier_sigma
    if protocol.cv is not None:
        smallest = int(counts.min())
        if smallest < protocol.cv.folds:
            logger.warning(f"Smallest class has {smallest} labeled samples for {protocol.cv.folds} folds, "
                           f"cross-validation skipped (C={C})")
        else:
            grid = {"p": _cv_dimensions(protocol, p), "C": protocol.cv.C, "sigma": protocol.cv.sigma}
            best = cross_validate(Z_lab, y_lab, grid, protocol.cv.folds, seed, protocol.classifier).best
            p, C = best["p"], best["C"]
            sigma = best["sigma"] or sigma
    classifier = train(Z_lab[:, :p], y_lab, kind=protocol.classifier, C=C, sigma=sigma)
    return predict(classifier, Z_test[:, :p]), Z_lab, Z_test, p, C, sigma


def _classify(Z_lab, y_lab, Z_test, y_test, domain_of, protocol: ProtocolConfig, seed: int,
              curve: bool = False) -> MethodOutcome:
    predictions, Z_lab, Z_test, p, C, sigma = _fit_predict(Z_lab, y_lab, Z_test, protocol, seed)
    report = evaluate(predictions, y_test, domain_of)
    rows = accuracy_by_dimension(Z_lab, y_lab, Z_test, y_test, kind=protocol.classifier, C=C,
                                 sigma=sigma) if curve else []
    return MethodOutcome(report, int(p), rows)


def _pooled(blocks: list[np.ndarray], indices, labels: list[np.ndarray]):
    Z = np.vstack([block[idx] for block, idx in zip(blocks, indices)])
    y = np.concatenate([lab[idx] for lab, idx in zip(labels, indices)])
    domain_of = np.concatenate([np.full(len(idx), m, dtype=np.int64) for m, idx in enumerate(indices)])
    return Z, y, domain_of


def _run_latent(mode, dataset, split, config: RunConfig, seed, run_id, curve) -> MethodOutcome:
    collection = dataset.collection
    alignment = config.alignment.model_copy(update={"mode": mode, "seed": seed})
    model = fit(training_collection(collection, split), alignment, run_id=run_id)
    blocks = [transform(model, m, dom.features).coordinates for m, dom in enumerate(collection.domains)]
    visible = [dom.labels for dom in collection.domains]
    Z_lab, y_lab, _ = _pooled(blocks, split.labeled, visible)
    Z_test, y_test, domain_of = _pooled(blocks, split.test, truth_labels(dataset))
    return _classify(Z_lab, y_lab, Z_test, y_test, domain_of, config.protocol, seed, curve)


def _run_raw(blocks, dataset, split, config, seed) -> MethodOutcome:
    visible = [dom.labels for dom in dataset.collection.domains]
    Z_lab, y_lab, _ = _pooled(blocks, split.labeled, visible)
    Z_test, y_test, domain_of = _pooled(blocks, split.test, truth_labels(dataset))
    return _classify(Z_lab, y_lab, Z_test, y_test, domain_of, config.protocol, seed)


def _run_no_adaptation(dataset, split, config, seed, run_id, curve) -> MethodOutcome:
    reduced = common_band_subset(dataset.collection)
    return _run_raw([dom.features for dom in reduced.domains], dataset, split, config, seed)


def _run_histogram_matching(dataset, split, config, seed, run_id, curve) -> MethodOutcome:
    reduced = common_band_subset(dataset.collection)
    leading = config.protocol.leading_domain
    reference = reduced.domains[leading].features[split.train[leading]]
    blocks = []
    for m, dom in enumerate(reduced.domains):
        if m == leading:
            blocks.append(dom.features)
            continue
        mapping = histogram_match(dom.features[split.train[m]], reference, config.protocol.histogram_bins)
        blocks.append(mapping.apply(dom.features))
    return _run_raw(blocks, dataset, split, config, seed)


def _run_kcca(dataset, split, config, seed, run_id, curve) -> MethodOutcome:
    collection = dataset.collection
    if collection.M != 2:
        raise NoTies("experiment", "kcca baseline needs exactly two domains")
    leading = config.protocol.leading_domain
    other = 1 - leading
    paired_a, paired_b, _ = tie_pairs(collection, leading, other)
    p = min(paired_a.shape[0] - 1, config.alignment.p or DEFAULT_KCCA_DIMENSIONS)
    specs = config.alignment.kernel_specs(2)
    projection = fit_kcca(paired_a, paired_b, (specs[leading], specs[other]), config.protocol.kcca_eps, p)
    blocks = [None, None]
    blocks[leading] = projection.transform(0, collection.domains[leading].features)
    blocks[other] = projection.transform(1, collection.domains[other].features)
    return _run_raw(blocks, dataset, split, config, seed)


def _run_target_only(dataset, split, config, seed, run_id, curve) -> MethodOutcome:
    """Borne haute : un classifieur par domaine, appris sur ses propres étiquettes (cachées comprises)."""
    protocol = config.protocol
    truth = truth_labels(dataset)
    rng = np.random.default_rng(seed)
    predictions, references, domain_of = [], [], []
    for m, dom in enumerate(dataset.collection.domains):
        labeled = _pick_per_class(truth[m], split.train[m], protocol.labeled_per_class_leading, rng, m)
        if np.unique(truth[m][labeled]).size < 2 or split.test[m].size == 0:
            logger.warning(f"Domain {m}: not enough reference labels for a target-only classifier, skipped")
            continue
        predicted, *_ = _fit_predict(dom.features[labeled], truth[m][labeled], dom.features[split.test[m]],
                                     protocol, seed)
        predictions.append(predicted)
        references.append(truth[m][split.test[m]])
        domain_of.append(np.full(split.test[m].size, m, dtype=np.int64))
    if not predictions:
        raise DataError("experiment", "no domain has reference labels for the target-only baseline")
    report = evaluate(np.concatenate(predictions), np.concatenate(references), np.concatenate(domain_of))
    return MethodOutcome(report)


RUNNERS = {
    "kema": lambda *a: _run_latent("kema", *a),
    "ssma": lambda *a: _run_latent("ssma", *a),
    "no_adaptation": _run_no_adaptation,
    "histogram_matching": _run_histogram_matching,
    "kcca": _run_kcca,
    "target_only": _run_target_only,
}


def run_repetition(dataset: SyntheticDataset, config: RunConfig, repetition: int,
                   run_id: str, curve: bool = False) -> tuple[list[RepetitionResult], dict[str, str]]:
    seed = config.seed + repetition if config.protocol.vary_seed else config.seed
    with pipeline_logger.step("split", run_id=run_id, repetition=repetition, seed=seed):
        split = make_split(dataset, config.protocol, seed)

    results, skipped = [], {}
    for method in config.protocol.methods:
        with pipeline_logger.step(method, run_id=run_id, repetition=repetition):
            try:
                outcome = RUNNERS[method](dataset, split, config, seed, run_id, curve)
            except NoTies as e:
                logger.warning(f"Method {method} skipped: {e}")
                skipped[method] = str(e)
                continue
        pipeline_logger.log_repetition(run_id, repetition, method, outcome.report.overall_accuracy, outcome.report.kappa)
        results.append(RepetitionResult(repetition, seed, method, outcome))
    return results, skipped


@log_function_call(logger)
def run_experiment(dataset: SyntheticDataset, config: RunConfig, threads: int = 1,
                   curve: bool = False, run_id: str | None = None) -> ExperimentSummary:
    """
    Répète le protocole complet config.protocol.repetitions fois.

    Args:
        dataset: Collection et étiquettes cachées éventuelles
        config: Configuration validée
        threads: Taille du pool de répétitions
        curve: Calculer la précision par nombre de dimensions (méthodes latentes)
        run_id: Identifiant d'exécution (généré si absent)

    Returns:
        ExperimentSummary agrégé dans l'ordre des répétitions
    """
    run_id = run_id or pipeline_logger.new_run_id()
    repetitions = range(config.protocol.repetitions)
    logger.info(f"[{run_id}] Experiment: {len(repetitions)} repetitions, methods {config.protocol.methods}, "
                f"{threads} thread(s)")

    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        futures = [pool.submit(run_repetition, dataset, config, r, run_id, curve) for r in repetitions]
        outcomes = [future.result() for future in futures]

    results = [result for batch, _ in outcomes for result in batch]
    skipped = {method: reason for _, batch in outcomes for method, reason in batch.items()}
    summary = ExperimentSummary(run_id, results, skipped, config.protocol.leading_domain)

    for method, stats in summary.to_dict()["methods"].items():
        oa, kappa = stats["overall_accuracy"], stats["kappa"]
        summary_logger.info(f"[{run_id}] {method}: OA {oa['mean']:.4f} ± {oa['std']:.4f}, "
                            f"kappa {kappa['mean']:.4f} ± {kappa['std']:.4f}")
    return summary


def record_summary(summary: ExperimentSummary, archetype: str, config: RunConfig, target=None) -> int:
    """Enregistre une ligne ExperimentRun par (méthode, répétition) ; renvoie le nombre de lignes."""
    from datetime import datetime

    from sqlmodel import Session

    from models.database import init_db
    from models.experiment_run import ExperimentRun

    engine = init_db(target)
    config_json = json.dumps(config.model_dump(mode="json"), sort_keys=True)
    created_at = datetime.now()
    with Session(engine) as session:
        for result in summary.repetitions:
            session.add(ExperimentRun(
                run_id=summary.run_id,
                archetype=archetype,
                method=result.method,
                repetition=result.repetition,
                seed=result.seed,
                overall_accuracy=result.outcome.report.overall_accuracy,
                kappa=result.outcome.report.kappa,
                p=result.outcome.p,
                config_json=config_json,
                created_at=created_at,
            ))
        session.commit()
    logger.info(f"[{summary.run_id}] {len(summary.repetitions)} rows recorded in the experiment ledger")
    return len(summary.repetitions)


def evaluate_model(dataset: SyntheticDataset, model: AlignmentModel | None, protocol: ProtocolConfig,
                   seed: int = 0, curve: bool = False) -> MethodOutcome:
    """
    Évalue un modèle ajusté (ou les bandes communes si model est None).

    Le classifieur apprend sur les échantillons étiquetés visibles et prédit les
    autres échantillons dont la référence est connue ; à défaut, tous les échantillons.
    """
    collection = dataset.collection
    truth = truth_labels(dataset)
    if model is None:
        blocks = [dom.features for dom in common_band_subset(collection).domains]
    else:
        latent = project_collection(model, collection)
        blocks = [latent.for_domain(m) for m in range(collection.M)]

    labeled = [np.flatnonzero(dom.labeled_mask) for dom in collection.domains]
    test = [np.flatnonzero((truth[m] != UNLABELED) & ~dom.labeled_mask) for m, dom in enumerate(collection.domains)]
    if sum(idx.size for idx in test) == 0:
        test = [np.flatnonzero(truth[m] != UNLABELED) for m in range(collection.M)]

    visible = [dom.labels for dom in collection.domains]
    Z_lab, y_lab, _ = _pooled(blocks, labeled, visible)
    Z_test, y_test, domain_of = _pooled(blocks, test, truth)
    return _classify(Z_lab, y_lab, Z_test, y_test, domain_of, protocol, seed, curve and model is not None)