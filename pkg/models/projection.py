"""
Modèle d'alignement et coordonnées latentes

Le modèle est immuable après l'ajustement ; il se sérialise en un document JSON
unique (version "kema-model/1") dont les flottants gardent leur précision complète.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from core.errors import DataError
from core.kernels import KernelSpec

MODEL_VERSION = "kema-model/1"

PRIMAL_SSMA = "primal_ssma"
DUAL_KEMA = "dual_kema"


@dataclass(frozen=True)
class AlignmentModel:
    mode: Literal["primal_ssma", "dual_kema"]
    projectors: tuple[np.ndarray, ...]
    eigenvalues: np.ndarray
    mu: float
    p: int
    scale_by_sqrt_lambda: bool = True
    mu_on: Literal["geo", "sim"] = "geo"
    kernel_specs: tuple[KernelSpec, ...] | None = None
    training_samples: tuple[np.ndarray, ...] | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in (PRIMAL_SSMA, DUAL_KEMA):
            raise DataError("alignment", f"unknown model mode '{self.mode}'")
        if (self.training_samples is not None) != (self.mode == DUAL_KEMA):
            raise DataError("alignment", "stored samples must be present iff the model is dual")
        for block in self.projectors:
            if block.shape[1] != self.p:
                raise DataError("alignment", f"projector block has {block.shape[1]} columns, p={self.p}")
        if self.mode == DUAL_KEMA:
            for block, samples in zip(self.projectors, self.training_samples):
                if block.shape[0] != samples.shape[0]:
                    raise DataError("alignment", "dual projector rows must match stored sample count")

    @property
    def is_dual(self) -> bool:
        return self.mode == DUAL_KEMA

    @property
    def num_domains(self) -> int:
        return len(self.projectors)

    def input_dimension(self, domain_id: int) -> int:
        if self.is_dual:
            return int(self.training_samples[domain_id].shape[1])
        return int(self.projectors[domain_id].shape[0])

    def to_dict(self) -> dict:
        payload = {
            "version": MODEL_VERSION,
            "mode": self.mode,
            "mu": self.mu,
            "mu_on": self.mu_on,
            "p": self.p,
            "scale_by_sqrt_lambda": self.scale_by_sqrt_lambda,
            "eigenvalues": self.eigenvalues.tolist(),
            "projectors": [
                {"rows": int(block.shape[0]), "cols": int(block.shape[1]), "data": block.ravel().tolist()}
                for block in self.projectors
            ],
            "kernel_specs": None if self.kernel_specs is None else [spec.to_dict() for spec in self.kernel_specs],
            "training_samples": None if self.training_samples is None else [
                {"rows": int(samples.shape[0]), "cols": int(samples.shape[1]), "data": samples.ravel().tolist()}
                for samples in self.training_samples
            ],
            "metadata": self.metadata,
        }
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "AlignmentModel":
        if payload.get("version") != MODEL_VERSION:
            raise DataError("alignment", f"unsupported model version {payload.get('version')!r}")

        def matrix(entry: dict) -> np.ndarray:
            return np.asarray(entry["data"], dtype=np.float64).reshape(entry["rows"], entry["cols"])

        specs = payload.get("kernel_specs")
        samples = payload.get("training_samples")
        return cls(
            mode=payload["mode"],
            projectors=tuple(matrix(entry) for entry in payload["projectors"]),
            eigenvalues=np.asarray(payload["eigenvalues"], dtype=np.float64),
            mu=float(payload["mu"]),
            p=int(payload["p"]),
            scale_by_sqrt_lambda=bool(payload["scale_by_sqrt_lambda"]),
            mu_on=payload.get("mu_on", "geo"),
            kernel_specs=None if specs is None else tuple(KernelSpec.from_dict(spec) for spec in specs),
            training_samples=None if samples is None else tuple(matrix(entry) for entry in samples),
            metadata=payload.get("metadata", {}),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.dumps(), encoding="utf-8", newline="\n")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "AlignmentModel":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise DataError("alignment", f"model file {path} is not valid JSON: {e}") from e
        return cls.from_dict(payload)


@dataclass(frozen=True)
class LatentData:
    coordinates: np.ndarray
    domain_of: np.ndarray

    @property
    def p(self) -> int:
        return int(self.coordinates.shape[1])

    def for_domain(self, domain_id: int) -> np.ndarray:
        return self.coordinates[self.domain_of == domain_id]

    @classmethod
    def concatenate(cls, parts: list["LatentData"]) -> "LatentData":
        return cls(
            np.vstack([part.coordinates for part in parts]),
            np.concatenate([part.domain_of for part in parts]),
        )
