"""
Sélection des échantillons non étiquetés par k-means bissectif

On coupe en deux, avec un 2-means, la feuille de plus grand effectif jusqu'à
obtenir `count` feuilles ; chaque feuille fournit son médoïde (l'échantillon le
plus proche du centroïde), qui alimente le graphe de géométrie.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.cluster import KMeans

from core.errors import ConfigError, CountTooLarge, EmptyDataset, NonFinite
from utils.logging_config import get_logger

logger = get_logger("manialign.sampling")

MAX_ITER = 50
MAX_RESEEDS = 5


@dataclass(frozen=True)
class ClusterNode:
    node_id: int
    members: np.ndarray
    centroid: np.ndarray
    parent: int | None = None


@dataclass
class ClusterTree:
    """Arbre de partitionnement ; les feuilles partitionnent les indices d'entrée."""

    nodes: list[ClusterNode] = field(default_factory=list)
    leaves: list[int] = field(default_factory=list)
    splits: list[tuple[int, int, int]] = field(default_factory=list)

    @property
    def num_leaves(self) -> int:
        return len(self.leaves)

    def leaf_members(self) -> list[np.ndarray]:
        return [self.nodes[leaf].members for leaf in sorted(self.leaves)]

    def assignments(self, n: int) -> np.ndarray:
        labels = np.full(n, -1, dtype=np.int64)
        for position, members in enumerate(self.leaf_members()):
            labels[members] = position
        return labels

    def wcss(self, X) -> float:
        """Somme des carrés intra-feuilles."""
        X = np.asarray(X, dtype=np.float64)
        return float(sum(((X[members] - X[members].mean(axis=0)) ** 2).sum() for members in self.leaf_members()))


def _two_means(points: np.ndarray, rng: np.random.Generator) -> np.ndarray | None:
    """Étiquettes 0/1 d'un 2-means, ou None si une des deux moitiés reste vide."""
    if np.ptp(points, axis=0).max(initial=0.0) == 0.0:
        return None
    for attempt in range(MAX_RESEEDS):
        state = int(rng.integers(0, 2**31 - 1))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            labels = KMeans(
                n_clusters=2, init="k-means++", n_init=1, max_iter=MAX_ITER, random_state=state
            ).fit_predict(points)
        if 0 < int(labels.sum()) < labels.size:
            return labels
        logger.debug(f"2-means produced an empty cluster (attempt {attempt + 1}/{MAX_RESEEDS})")
    return None


def bisecting_kmeans(X, num_clusters: int, seed: int = 0) -> ClusterTree:
    """
    K-means bissectif : découpe itérative de la plus grande feuille.

    Égalité d'effectif : la feuille d'identifiant le plus petit est découpée.
    Après MAX_RESEEDS échecs (cluster vide), l'échantillon le plus éloigné du
    centroïde est isolé en singleton.

    Args:
        X: Échantillons n × d
        num_clusters: Nombre de feuilles visé (1 <= num_clusters <= n)
        seed: Graine des initialisations k-means++

    Returns:
        ClusterTree
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDataset("sampling", "cannot cluster an empty dataset")
    if not np.all(np.isfinite(X)):
        raise NonFinite("sampling", "samples contain NaN or Inf")
    n = X.shape[0]
    if num_clusters < 1 or num_clusters > n:
        raise CountTooLarge("sampling", f"num_clusters={num_clusters} must lie in [1, {n}]")

    rng = np.random.default_rng(seed)
    root = np.arange(n)
    tree = ClusterTree(nodes=[ClusterNode(0, root, X.mean(axis=0))], leaves=[0])

    while tree.num_leaves < num_clusters:
        target = max(tree.leaves, key=lambda leaf: (tree.nodes[leaf].members.size, -leaf))
        node = tree.nodes[target]
        points = X[node.members]

        labels = _two_means(points, rng)
        if labels is None:
            logger.warning(f"Cluster {target} ({node.members.size} samples) could not be bisected, splitting off a singleton")
            labels = np.zeros(node.members.size, dtype=np.int64)
            distances = ((points - node.centroid) ** 2).sum(axis=1)
            labels[int(np.argmax(distances))] = 1

        # l'enfant gauche contient le plus petit indice du parent
        left_mask = labels == labels[0]
        children = []
        for mask in (left_mask, ~left_mask):
            members = node.members[mask]
            child = ClusterNode(len(tree.nodes), members, X[members].mean(axis=0), parent=target)
            tree.nodes.append(child)
            children.append(child.node_id)
        tree.leaves.remove(target)
        tree.leaves.extend(children)
        tree.splits.append((target, children[0], children[1]))

    logger.debug(f"bisecting_kmeans n={n} leaves={tree.num_leaves} splits={len(tree.splits)}")
    return tree


def medoid(X: np.ndarray, members: np.ndarray) -> int:
    """Membre le plus proche du centroïde ; égalité -> plus petit indice."""
    points = X[members]
    distances = cdist(points, points.mean(axis=0)[None, :], metric="sqeuclidean")[:, 0]
    return int(members[int(np.argmin(distances))])


def select_unlabeled(X, count: int, seed: int = 0, method: str = "bisecting", exclude=None) -> np.ndarray:
    """
    Indices (triés, sans répétition) des échantillons non étiquetés retenus.

    Args:
        X: Échantillons du domaine
        count: Nombre d'échantillons voulus
        seed: Graine
        method: "bisecting" (médoïdes des feuilles) ou "random"
        exclude: Indices à écarter du réservoir (échantillons étiquetés)

    Returns:
        Tableau d'indices dans X
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    pool = np.arange(n)
    if exclude is not None and len(exclude):
        pool = np.setdiff1d(pool, np.asarray(exclude, dtype=np.int64))
    if count < 0 or count > pool.size:
        raise CountTooLarge("sampling", f"count={count} exceeds the {pool.size} available samples")
    if count == 0:
        return np.zeros(0, dtype=np.int64)

    if method == "random":
        rng = np.random.default_rng(seed)
        return np.sort(rng.choice(pool, size=count, replace=False))
    if method != "bisecting":
        raise ConfigError("sampling", f"unknown sampling method '{method}'")

    tree = bisecting_kmeans(X[pool], count, seed=seed)
    local = X[pool]
    chosen = [medoid(local, members) for members in tree.leaf_members()]
    return np.sort(pool[np.asarray(chosen, dtype=np.int64)])
