from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from core.errors import BadSpec, DimensionMismatch, EmptyDataset, NonFinite, UnknownDomain

UNLABELED = -1
NO_TIE = -1


@dataclass(frozen=True)
class DomainDataset:
    """
    Échantillons d'un domaine (n_m × d_m), étiquettes et objets de liaison optionnels.

    labels[i] == UNLABELED pour un échantillon non étiqueté,
    tie_object[i] == NO_TIE pour un échantillon hors liens sémantiques.
    """

    features: np.ndarray
    labels: np.ndarray | None = None
    tie_object: np.ndarray | None = None
    domain_id: int = 0
    band_tags: tuple[str, ...] | None = None
    name: str = ""

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] == 0:
            raise EmptyDataset("alignment", f"domain {self.domain_id} has no samples")
        if not np.all(np.isfinite(features)):
            raise NonFinite("alignment", f"domain {self.domain_id} has non-finite features")
        n = features.shape[0]
        labels = np.full(n, UNLABELED, dtype=np.int64) if self.labels is None else np.asarray(self.labels, dtype=np.int64)
        ties = np.full(n, NO_TIE, dtype=np.int64) if self.tie_object is None else np.asarray(self.tie_object, dtype=np.int64)
        if labels.shape != (n,) or ties.shape != (n,):
            raise DimensionMismatch(
                "alignment", f"domain {self.domain_id}: labels/tie_object must have {n} entries"
            )
        if self.band_tags is not None and len(self.band_tags) != features.shape[1]:
            raise DimensionMismatch(
                "alignment", f"domain {self.domain_id}: {len(self.band_tags)} band tags for {features.shape[1]} bands"
            )
        for array in (features, labels, ties):
            array.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "tie_object", ties)
        if self.band_tags is not None:
            object.__setattr__(self, "band_tags", tuple(self.band_tags))

    @property
    def n(self) -> int:
        return int(self.features.shape[0])

    @property
    def d(self) -> int:
        return int(self.features.shape[1])

    @property
    def labeled_mask(self) -> np.ndarray:
        return self.labels != UNLABELED

    def subset(self, index) -> "DomainDataset":
        index = np.asarray(index, dtype=np.int64)
        return DomainDataset(
            features=self.features[index],
            labels=self.labels[index],
            tie_object=self.tie_object[index],
            domain_id=self.domain_id,
            band_tags=self.band_tags,
            name=self.name,
        )

    def with_features(self, features, band_tags=None) -> "DomainDataset":
        return DomainDataset(
            features=features,
            labels=self.labels,
            tie_object=self.tie_object,
            domain_id=self.domain_id,
            band_tags=band_tags,
            name=self.name,
        )

    def with_labels(self, labels) -> "DomainDataset":
        return DomainDataset(
            features=self.features,
            labels=labels,
            tie_object=self.tie_object,
            domain_id=self.domain_id,
            band_tags=self.band_tags,
            name=self.name,
        )


@dataclass(frozen=True)
class TieSet:
    """Objet de liaison et domaine de chaque échantillon global."""

    tie_object: np.ndarray
    domain_of: np.ndarray

    @property
    def has_ties(self) -> bool:
        return bool(np.any(self.tie_object != NO_TIE))


@dataclass(frozen=True)
class MultiDomainCollection:
    """
    Liste ordonnée de domaines.

    L'indice global d'un échantillon est la concaténation dans l'ordre des domaines,
    ordre partagé par les laplaciens, la matrice de noyau et les blocs de projection.
    """

    domains: tuple[DomainDataset, ...]
    class_dictionary: tuple[int, ...] = field(default=())

    def __post_init__(self):
        domains = tuple(self.domains)
        if len(domains) < 2:
            raise BadSpec("alignment", f"at least two domains are required, got {len(domains)}")
        renumbered = tuple(
            dom if dom.domain_id == m else DomainDataset(
                dom.features, dom.labels, dom.tie_object, m, dom.band_tags, dom.name
            )
            for m, dom in enumerate(domains)
        )
        object.__setattr__(self, "domains", renumbered)
        if not self.class_dictionary:
            labels = np.concatenate([dom.labels for dom in renumbered])
            classes = np.unique(labels[labels != UNLABELED])
            object.__setattr__(self, "class_dictionary", tuple(int(c) for c in classes))

    @property
    def M(self) -> int:
        return len(self.domains)

    @property
    def sizes(self) -> list[int]:
        return [dom.n for dom in self.domains]

    @property
    def dims(self) -> list[int]:
        return [dom.d for dom in self.domains]

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def d(self) -> int:
        return sum(self.dims)

    @property
    def sample_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)]).astype(np.int64)

    @property
    def feature_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.dims)]).astype(np.int64)

    @property
    def labels(self) -> np.ndarray:
        return np.concatenate([dom.labels for dom in self.domains])

    @property
    def tie_objects(self) -> np.ndarray:
        return np.concatenate([dom.tie_object for dom in self.domains])

    @property
    def domain_of(self) -> np.ndarray:
        return np.concatenate([np.full(dom.n, m, dtype=np.int64) for m, dom in enumerate(self.domains)])

    @property
    def ties(self) -> TieSet:
        return TieSet(self.tie_objects, self.domain_of)

    def block_data_matrix(self) -> np.ndarray:
        """Matrice X (d × n) bloc-diagonale des données de chaque domaine."""
        return la.block_diag(*[dom.features.T for dom in self.domains])

    def domain(self, domain_id: int) -> DomainDataset:
        if not 0 <= domain_id < self.M:
            raise UnknownDomain("alignment", f"unknown domain {domain_id} (collection has {self.M})")
        return self.domains[domain_id]

    def replace(self, domain_id: int, dataset: DomainDataset) -> "MultiDomainCollection":
        domains = list(self.domains)
        domains[domain_id] = dataset
        return MultiDomainCollection(tuple(domains), self.class_dictionary)
