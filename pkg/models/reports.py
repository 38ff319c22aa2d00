"""
Classifieurs de l'espace latent et rapports d'évaluation
"""

import json
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from core.kernels import KernelSpec


@dataclass(frozen=True)
class ClassifierModel:
    """
    Classifieur un-contre-tous (svm) ou plus proche voisin (onenn).

    weights : une ligne par classe, de longueur p (linear_svm) ou égale au nombre
    de prototypes (kernel_svm). Les classes sont triées par identifiant croissant.
    """

    kind: Literal["linear_svm", "kernel_svm", "onenn"]
    classes: tuple[int, ...]
    weights: np.ndarray | None = None
    biases: np.ndarray | None = None
    prototypes: np.ndarray | None = None
    prototype_labels: np.ndarray | None = None
    kernel_spec: KernelSpec | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def input_dimension(self) -> int:
        if self.kind == "linear_svm":
            return int(self.weights.shape[1])
        return int(self.prototypes.shape[1])


@dataclass(frozen=True)
class DomainScore:
    n: int
    overall_accuracy: float
    kappa: float


@dataclass(frozen=True)
class EvalReport:
    overall_accuracy: float
    kappa: float
    confusion: np.ndarray
    classes: tuple[int, ...]
    per_domain: dict[int, DomainScore] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.confusion.sum())

    def to_dict(self) -> dict:
        return {
            "overall_accuracy": self.overall_accuracy,
            "kappa": self.kappa,
            "n": self.n,
            "classes": list(self.classes),
            "confusion": self.confusion.astype(int).tolist(),
            "per_domain": {
                str(domain): {"n": score.n, "overall_accuracy": score.overall_accuracy, "kappa": score.kappa}
                for domain, score in sorted(self.per_domain.items())
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"
