"""
Noyaux, choix de largeur de bande par domaine et matrice de noyau bloc-diagonale

Convention RBF : k(x, y) = exp(−‖x − y‖² / (2σ²)), σ étant la moitié de la
distance médiane entre échantillons du domaine quand bandwidth="half_median".
"""

from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
import scipy.linalg as la
from scipy.spatial.distance import cdist, pdist

from core.errors import ConfigError, DegenerateData, DimensionMismatch, OrderingMismatch
from models.dataset import MultiDomainCollection
from utils.logging_config import get_logger

logger = get_logger("manialign.kernels")

HALF_MEDIAN = "half_median"
MEDIAN_MAX_SAMPLES = 2000


@dataclass(frozen=True)
class KernelSpec:
    kind: Literal["linear", "rbf"] = "rbf"
    bandwidth: float | str = HALF_MEDIAN

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ConfigError("kernels", f"unknown kernel kind '{self.kind}'")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != HALF_MEDIAN:
                raise ConfigError("kernels", f"unknown bandwidth mode '{self.bandwidth}'")
        elif self.kind == "rbf" and not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ConfigError("kernels", f"rbf bandwidth must be > 0, got {self.bandwidth}")

    @property
    def resolved(self) -> bool:
        return self.kind == "linear" or not isinstance(self.bandwidth, str)

    @property
    def sigma(self) -> float | None:
        if self.kind == "linear" or isinstance(self.bandwidth, str):
            return None
        return float(self.bandwidth)

    def resolve(self, X, seed: int = 0, max_samples: int = MEDIAN_MAX_SAMPLES) -> "KernelSpec":
        if self.resolved:
            return self
        return replace(self, bandwidth=median_bandwidth(X, seed=seed, max_samples=max_samples))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "bandwidth": self.bandwidth if self.kind == "rbf" else None}

    @classmethod
    def from_dict(cls, payload: dict) -> "KernelSpec":
        bandwidth = payload.get("bandwidth")
        return cls(kind=payload["kind"], bandwidth=HALF_MEDIAN if bandwidth is None else bandwidth)


@dataclass(frozen=True)
class BlockKernel:
    per_domain: tuple[np.ndarray, ...]
    assembled: np.ndarray
    specs: tuple[KernelSpec, ...]

    @property
    def bandwidths(self) -> list[float | None]:
        return [spec.sigma for spec in self.specs]


def median_bandwidth(X, seed: int = 0, max_samples: int = MEDIAN_MAX_SAMPLES) -> float:
    """
    0.5 × médiane des distances euclidiennes par paires.

    Au-delà de max_samples lignes, la médiane est estimée sur un sous-échantillon tiré
    avec la graine donnée.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise DegenerateData("kernels", f"median bandwidth needs at least 2 samples, got {n}")
    if n > max_samples:
        rng = np.random.default_rng(seed)
        X = X[np.sort(rng.choice(n, size=max_samples, replace=False))]
    median = float(np.median(pdist(X, metric="euclidean")))
    if median <= 0.0:
        raise DegenerateData("kernels", "all samples are identical, median distance is 0")
    return 0.5 * median


def gram(Xa, Xb, spec: KernelSpec) -> np.ndarray:
    """Matrice de Gram na × nb entre deux ensembles d'échantillons."""
    Xa = np.atleast_2d(np.asarray(Xa, dtype=np.float64))
    Xb = np.atleast_2d(np.asarray(Xb, dtype=np.float64))
    if Xa.shape[1] != Xb.shape[1]:
        raise DimensionMismatch("kernels", f"feature dimensions differ: {Xa.shape[1]} vs {Xb.shape[1]}")
    if spec.kind == "linear":
        return Xa @ Xb.T
    if not spec.resolved:
        raise ConfigError("kernels", "rbf bandwidth must be resolved before computing a Gram matrix")
    sigma = float(spec.bandwidth)
    return np.exp(-cdist(Xa, Xb, metric="sqeuclidean") / (2.0 * sigma * sigma))


def resolve_specs(data: MultiDomainCollection, specs, seed: int = 0,
                  max_samples: int = MEDIAN_MAX_SAMPLES) -> tuple[KernelSpec, ...]:
    """Un KernelSpec par domaine, largeurs half_median calculées sur tout le domaine."""
    if isinstance(specs, KernelSpec):
        specs = [specs] * data.M
    specs = list(specs)
    if len(specs) != data.M:
        raise OrderingMismatch("kernels", f"{len(specs)} kernel specs for {data.M} domains")
    resolved = tuple(
        spec.resolve(dom.features, seed=seed, max_samples=max_samples)
        for spec, dom in zip(specs, data.domains)
    )
    for m, spec in enumerate(resolved):
        if spec.kind == "rbf":
            logger.info(f"Domain {m}: rbf bandwidth {spec.sigma:.6g}")
    return resolved


def assemble_block_kernel(data: MultiDomainCollection, specs, seed: int = 0,
                          max_samples: int = MEDIAN_MAX_SAMPLES) -> BlockKernel:
    """Matrice K bloc-diagonale, même ordre d'échantillons que les laplaciens."""
    resolved = resolve_specs(data, specs, seed=seed, max_samples=max_samples)
    blocks = tuple(gram(dom.features, dom.features, spec) for dom, spec in zip(data.domains, resolved))
    assembled = la.block_diag(*blocks)
    if assembled.shape[0] != data.n:
        raise OrderingMismatch("kernels", f"assembled kernel has order {assembled.shape[0]}, expected {data.n}")
    return BlockKernel(blocks, assembled, resolved)
