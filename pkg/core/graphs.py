"""
Graphes de similarité / dissimilarité et laplaciens

W_g : graphe k-NN par domaine (géométrie), assemblé en bloc diagonal.
W_s / W_d : paires étiquetées de même classe / de classes différentes, ou
liens sémantiques (objets co-localisés) quand la cible n'a pas d'étiquettes.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from core.errors import (
    ConfigError,
    DimensionMismatch,
    EmptyDataset,
    KTooLarge,
    NoTies,
    NonFinite,
    OrderMismatch,
    SingleClass,
)
from models.dataset import UNLABELED, NO_TIE, TieSet
from utils.logging_config import get_logger

logger = get_logger("manialign.graphs")


@dataclass(frozen=True)
class SparseSym:
    """Graphe pondéré symétrique à diagonale nulle, stocké en CSR."""

    matrix: sp.csr_matrix

    @classmethod
    def from_triplets(cls, order: int, rows, cols, weights) -> "SparseSym":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        weights = np.asarray(weights, dtype=np.float64)
        if not np.all(np.isfinite(weights)):
            raise NonFinite("graphs", "edge weights must be finite")
        keep = rows != cols
        rows, cols, weights = rows[keep], cols[keep], weights[keep]
        upper = sp.coo_matrix((weights, (rows, cols)), shape=(order, order)).tocsr()
        # symétrisation par le maximum : une arête (i,j) implique (j,i)
        return cls(upper.maximum(upper.T).tocsr())

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "SparseSym":
        dense = np.array(dense, dtype=np.float64)
        np.fill_diagonal(dense, 0.0)
        return cls(sp.csr_matrix(np.maximum(dense, dense.T)))

    @classmethod
    def empty(cls, order: int) -> "SparseSym":
        return cls(sp.csr_matrix((order, order), dtype=np.float64))

    @property
    def order(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def num_edges(self) -> int:
        return int(sp.triu(self.matrix, k=1).nnz)

    def triplets(self) -> list[tuple[int, int, float]]:
        """Arêtes (i, j, w) avec i < j."""
        upper = sp.triu(self.matrix, k=1).tocoo()
        return sorted(zip(upper.row.tolist(), upper.col.tolist(), upper.data.tolist()))

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass(frozen=True)
class LaplacianTriple:
    L_g: np.ndarray
    L_s: np.ndarray
    L_d: np.ndarray
    mu: float = 1.0

    @property
    def order(self) -> int:
        return int(self.L_g.shape[0])


def knn_graph(X, k: int, metric: str = "euclidean") -> SparseSym:
    """
    Graphe k-NN binaire symétrisé par union.

    Les égalités de distance sont départagées par l'indice le plus petit.
    """
    if metric != "euclidean":
        raise ConfigError("graphs", f"unsupported metric '{metric}'")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDataset("graphs", "cannot build a k-NN graph on an empty dataset")
    n = X.shape[0]
    if k < 1 or k >= n:
        raise KTooLarge("graphs", f"k={k} must satisfy 1 <= k < n_m={n}")

    distances = cdist(X, X, metric="sqeuclidean")
    np.fill_diagonal(distances, np.inf)
    neighbours = np.argsort(distances, axis=1, kind="stable")[:, :k]

    rows = np.repeat(np.arange(n), k)
    adjacency = sp.coo_matrix((np.ones(n * k), (rows, neighbours.ravel())), shape=(n, n)).tocsr()
    adjacency.data[:] = 1.0
    union = adjacency.maximum(adjacency.T)
    logger.debug(f"knn_graph n={n} k={k} edges={sp.triu(union, k=1).nnz}")
    return SparseSym(union.tocsr())


def label_graphs(labels, domain_of=None, include_within_domain: bool = True) -> tuple[SparseSym, SparseSym]:
    """
    W_s relie les paires étiquetées de même classe, W_d celles de classes différentes.

    Les échantillons non étiquetés (UNLABELED) n'ont aucune arête.

    Args:
        labels: Classe par échantillon global (-1 = non étiqueté)
        domain_of: Domaine par échantillon (requis si include_within_domain=False)
        include_within_domain: Inclure les paires m = m'

    Returns:
        (W_s, W_d)
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    labeled = np.flatnonzero(labels != UNLABELED)
    classes = np.unique(labels[labeled])
    if classes.size < 2:
        raise SingleClass("graphs", f"at least two labeled classes are required, found {classes.size}")

    sub = labels[labeled]
    same = sub[:, None] == sub[None, :]
    allowed = ~np.eye(labeled.size, dtype=bool)
    if not include_within_domain:
        if domain_of is None:
            raise ConfigError("graphs", "domain_of is required to exclude within-domain pairs")
        dom = np.asarray(domain_of)[labeled]
        allowed &= dom[:, None] != dom[None, :]

    W_s = _embed(n, labeled, (same & allowed).astype(np.float64))
    W_d = _embed(n, labeled, (~same & allowed).astype(np.float64))
    logger.debug(f"label_graphs labeled={labeled.size} classes={classes.size} "
                 f"W_s edges={W_s.num_edges} W_d edges={W_d.num_edges}")
    return W_s, W_d


def tie_graphs(ties: TieSet, source_labels, dis_weight_ties: float = 0.5) -> tuple[SparseSym, SparseSym]:
    """
    Graphes construits à partir des liens sémantiques et des étiquettes source.

    W_s : poids 1 entre pixels d'un même objet (intra et inter domaines) et entre
    paires source étiquetées de même classe.
    W_d : poids 1 entre paires source de classes différentes, dis_weight_ties entre
    pixels d'objets différents (deux objets distincts peuvent partager une classe).
    Les objets présents dans un seul domaine sont ignorés avec un avertissement.
    """
    objects = np.asarray(ties.tie_object, dtype=np.int64)
    domain_of = np.asarray(ties.domain_of, dtype=np.int64)
    labels = np.asarray(source_labels, dtype=np.int64)
    n = objects.shape[0]
    if labels.shape[0] != n or domain_of.shape[0] != n:
        raise DimensionMismatch("graphs", "ties, domains and labels must have the same length")

    objects = objects.copy()
    for obj in np.unique(objects[objects != NO_TIE]):
        members = objects == obj
        if np.unique(domain_of[members]).size < 2:
            logger.warning(f"Tie object {obj} appears in a single domain, ignored")
            objects[members] = NO_TIE

    tied = np.flatnonzero(objects != NO_TIE)
    if tied.size == 0:
        raise NoTies("graphs", "no tie object spans two domains")

    W_s = np.zeros((n, n))
    W_d = np.zeros((n, n))

    tie_ids = objects[tied]
    same_object = tie_ids[:, None] == tie_ids[None, :]
    block = np.ix_(tied, tied)
    W_s[block] = same_object.astype(np.float64)
    W_d[block] = np.where(same_object, 0.0, dis_weight_ties)

    labeled = np.flatnonzero(labels != UNLABELED)
    if labeled.size:
        sub = labels[labeled]
        same_class = sub[:, None] == sub[None, :]
        lab_block = np.ix_(labeled, labeled)
        W_s[lab_block] = np.maximum(W_s[lab_block], same_class)
        W_d[lab_block] = np.maximum(W_d[lab_block], ~same_class)

    result = SparseSym.from_dense(W_s), SparseSym.from_dense(W_d)
    logger.debug(f"tie_graphs objects={np.unique(tie_ids).size} tied pixels={tied.size} "
                 f"labeled={labeled.size} W_s edges={result[0].num_edges} W_d edges={result[1].num_edges}")
    return result


def _embed(order: int, index: np.ndarray, block: np.ndarray) -> SparseSym:
    local = sp.coo_matrix(block)
    return SparseSym.from_triplets(order, index[local.row], index[local.col], local.data)


def laplacian(W: SparseSym) -> np.ndarray:
    """L = D − W (dense), D étant la diagonale des sommes de lignes."""
    dense = W.toarray()
    L = np.diag(dense.sum(axis=1)) - dense
    return L


def assemble_block_geo(per_domain_graphs: list[SparseSym], total_order: int | None = None) -> np.ndarray:
    """Laplacien du graphe géométrique bloc-diagonal (aucune arête inter-domaines)."""
    if not per_domain_graphs:
        raise OrderMismatch("graphs", "at least one domain graph is required")
    block = sp.block_diag([graph.matrix for graph in per_domain_graphs], format="csr")
    if total_order is not None and block.shape[0] != total_order:
        raise OrderMismatch(
            "graphs", f"domain graph orders sum to {block.shape[0]}, expected {total_order}"
        )
    return laplacian(SparseSym(block))


def pairwise_energy(W: SparseSym, Z) -> float:
    """Somme littérale Σ_{i<j} w_ij ‖z_i − z_j‖² sur les arêtes du graphe."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z[:, None]
    total = 0.0
    for i, j, weight in W.triplets():
        diff = Z[i] - Z[j]
        total += weight * float(diff @ diff)
    return total
