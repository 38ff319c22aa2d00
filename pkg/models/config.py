"""
Configuration d'exécution (validée avant tout calcul)

Les clés inconnues sont rejetées (extra="forbid"). Les valeurs par défaut reprennent
le protocole de référence : graphes k-NN avec k = 9, 500 échantillons non étiquetés
par domaine, 10 répétitions, poids 0.5 des dissimilarités entre objets liés.
"""

import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from core.errors import ConfigError
from core.kernels import HALF_MEDIAN, KernelSpec


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class KernelConfig(StrictModel):
    kind: Literal["linear", "rbf"] = "rbf"
    bandwidth: float | Literal["half_median"] = HALF_MEDIAN

    def to_spec(self) -> KernelSpec:
        return KernelSpec(kind=self.kind, bandwidth=self.bandwidth)


class AlignmentConfig(StrictModel):
    mode: Literal["ssma", "kema"] = "kema"
    mu: float = Field(default=1.0, gt=0)
    mu_on: Literal["geo", "sim"] = "geo"
    k: int = Field(default=9, ge=1)
    kernels: KernelConfig | list[KernelConfig] = Field(default_factory=KernelConfig)
    p: int | None = Field(default=None, ge=0)
    ridge: float | None = Field(default=None, ge=0)
    kernel_reg: float = Field(default=1e-3, ge=0)
    dis_weight_ties: float = Field(default=0.5, ge=0)
    include_within_domain: bool = True
    scale_by_sqrt_lambda: bool = True
    use_ties: bool | None = None
    bandwidth_max_samples: int = Field(default=2000, ge=2)
    seed: int = 0

    def kernel_specs(self, num_domains: int) -> list[KernelSpec]:
        if isinstance(self.kernels, KernelConfig):
            return [self.kernels.to_spec()] * num_domains
        return [kernel.to_spec() for kernel in self.kernels]


class CVGridConfig(StrictModel):
    p: list[int] | None = None
    C: list[float] = Field(default_factory=lambda: [1.0, 10.0, 100.0, 1000.0])
    sigma: list[float] = Field(default_factory=lambda: [0.01, 0.1])
    folds: int = Field(default=3, ge=2)

    @field_validator("C", "sigma")
    @classmethod
    def _positive(cls, values: list[float]) -> list[float]:
        if not values or any(value <= 0 for value in values):
            raise ValueError("grid values must be a non-empty list of positive numbers")
        return values


Method = Literal["kema", "ssma", "no_adaptation", "target_only", "histogram_matching", "kcca"]


class ProtocolConfig(StrictModel):
    leading_domain: int = Field(default=0, ge=0)
    labeled_per_class_leading: int = Field(default=100, ge=1)
    labeled_per_class_other: int = Field(default=10, ge=0)
    unlabeled_per_domain: int = Field(default=500, ge=0)
    sampling: Literal["bisecting", "random"] = "bisecting"
    test_fraction: float = Field(default=0.5, gt=0, lt=1)
    repetitions: int = Field(default=10, ge=1)
    vary_seed: bool = True
    methods: list[Method] = Field(default_factory=lambda: ["kema", "ssma", "no_adaptation"])
    classifier: Literal["linear_svm", "kernel_svm", "onenn"] = "linear_svm"
    C: float = Field(default=10.0, gt=0)
    classifier_sigma: float | Literal["half_median"] = HALF_MEDIAN
    cv: CVGridConfig | None = Field(default_factory=CVGridConfig)
    kcca_eps: float = Field(default=1e-3, gt=0)
    histogram_bins: int = Field(default=256, ge=2)


class SynthSpec(StrictModel):
    archetype: Literal["multiview_manifold", "shadow_attenuation", "colocated_ties"] = "multiview_manifold"
    classes: int = Field(default=3, ge=2)
    num_domains: int = Field(default=3, ge=2)
    samples_per_domain: int = Field(default=300, ge=2)
    class_priors: list[float] | None = None
    noise: float = Field(default=0.05, ge=0)
    seed: int = 0
    # multiview
    rotation_deg: float = 90.0
    scale: float = Field(default=1.5, gt=0)
    warp: float = Field(default=0.0, ge=0)
    # shadow
    bands: int = Field(default=8, ge=1)
    attenuation: float = Field(default=0.4, gt=0, le=1)
    attenuation_spread: float = Field(default=0.15, ge=0)
    gamma: float | None = None
    # ties
    num_objects: int = Field(default=40, ge=1)
    object_size: tuple[int, int] = (3, 8)

    @model_validator(mode="after")
    def _check(self) -> "SynthSpec":
        if self.class_priors is not None:
            if len(self.class_priors) != self.classes:
                raise ValueError("class_priors must have one entry per class")
            if any(prior < 0 for prior in self.class_priors) or abs(sum(self.class_priors) - 1.0) > 1e-9:
                raise ValueError("class_priors must be nonnegative and sum to 1")
        low, high = self.object_size
        if low < 1 or high < low:
            raise ValueError("object_size must be an increasing pair of positive integers")
        return self

    def priors(self) -> list[float]:
        return self.class_priors or [1.0 / self.classes] * self.classes


class RunConfig(StrictModel):
    alignment: AlignmentConfig = Field(default_factory=AlignmentConfig)
    protocol: ProtocolConfig = Field(default_factory=ProtocolConfig)
    synth: SynthSpec = Field(default_factory=SynthSpec)
    seed: int = 0

    @classmethod
    def load(cls, path: str | Path | None) -> "RunConfig":
        if path is None:
            return cls()
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError("cli", f"config file {path} is not valid JSON: {e}") from e
        return cls.model_validate(payload)
