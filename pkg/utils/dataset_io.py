"""
Lecture / écriture des fichiers de manialign

Jeu de données : un CSV par domaine (en-tête f1..fd,label,tie_object ; -1 = absent)
et un manifeste JSON listant les fichiers, d_m, les étiquettes de bandes et les
éventuels fichiers d'étiquettes cachées. UTF-8, fins de ligne LF, flottants en
précision complète.
"""

import json
from pathlib import Path

import numpy as np
import pandas as pd

from core.errors import DataError, DimensionMismatch
from core.synth import SyntheticDataset
from models.dataset import DomainDataset, MultiDomainCollection
from models.projection import LatentData
from utils.logging_config import get_logger

logger = get_logger("manialign.io")

DATASET_FORMAT = "manialign-dataset/1"
MANIFEST_NAME = "manifest.json"
FLOAT_FORMAT = "%.17g"


def write_json(payload: dict, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8", newline="\n")
    return path


def _write_csv(frame: pd.DataFrame, path: Path):
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")


def write_dataset(dataset: SyntheticDataset | MultiDomainCollection, directory: str | Path) -> Path:
    """
    Écrit les CSV par domaine et le manifeste.

    Returns:
        Chemin du manifeste
    """
    if isinstance(dataset, MultiDomainCollection):
        dataset = SyntheticDataset(dataset)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    entries = []
    for m, dom in enumerate(dataset.collection.domains):
        frame = pd.DataFrame(dom.features, columns=[f"f{j + 1}" for j in range(dom.d)])
        frame["label"] = dom.labels
        frame["tie_object"] = dom.tie_object
        file_name = f"domain{m + 1}.csv"
        _write_csv(frame, directory / file_name)

        hidden_name = None
        if m in dataset.hidden_labels:
            hidden_name = f"domain{m + 1}_labels.csv"
            _write_csv(pd.DataFrame({"label": dataset.hidden_labels[m]}), directory / hidden_name)

        entries.append({
            "file": file_name,
            "d": dom.d,
            "n": dom.n,
            "name": dom.name,
            "band_tags": list(dom.band_tags) if dom.band_tags is not None else None,
            "hidden_labels": hidden_name,
        })

    manifest = {
        "format": DATASET_FORMAT,
        "domains": entries,
        "class_dictionary": list(dataset.collection.class_dictionary),
        "metadata": dataset.metadata,
    }
    path = write_json(manifest, directory / MANIFEST_NAME)
    logger.info(f"Dataset written to {directory} ({dataset.collection.M} domains)")
    return path


def _manifest_path(path: str | Path) -> Path:
    path = Path(path)
    return path / MANIFEST_NAME if path.is_dir() else path


def _read_csv(path: Path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError("cli", f"cannot parse {path}: {e}") from e


def read_domain_csv(path: str | Path, d: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(features, labels, tie_object) d'un CSV de domaine."""
    path = Path(path)
    frame = _read_csv(path)
    feature_columns = [column for column in frame.columns if column.startswith("f") and column[1:].isdigit()]
    feature_columns.sort(key=lambda column: int(column[1:]))
    if d is not None and len(feature_columns) != d:
        raise DimensionMismatch("cli", f"{path.name} has {len(feature_columns)} feature columns, manifest says {d}")
    features = frame[feature_columns].to_numpy(dtype=np.float64)
    labels = frame["label"].to_numpy(dtype=np.int64) if "label" in frame else None
    ties = frame["tie_object"].to_numpy(dtype=np.int64) if "tie_object" in frame else None
    return features, labels, ties


def read_dataset(path: str | Path) -> SyntheticDataset:
    """Charge un jeu de données depuis son manifeste (ou le dossier qui le contient)."""
    manifest_path = _manifest_path(path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError("cli", f"manifest {manifest_path} is not valid JSON: {e}") from e
    if manifest.get("format") != DATASET_FORMAT:
        raise DataError("cli", f"unsupported dataset format {manifest.get('format')!r}")

    base = manifest_path.parent
    domains, hidden = [], {}
    for m, entry in enumerate(manifest["domains"]):
        features, labels, ties = read_domain_csv(base / entry["file"], entry.get("d"))
        tags = entry.get("band_tags")
        domains.append(DomainDataset(
            features, labels, ties, m, tuple(tags) if tags is not None else None, entry.get("name", "")
        ))
        if entry.get("hidden_labels"):
            hidden[m] = _read_csv(base / entry["hidden_labels"])["label"].to_numpy(dtype=np.int64)

    collection = MultiDomainCollection(tuple(domains), tuple(manifest.get("class_dictionary") or ()))
    logger.debug(f"Dataset {manifest_path} loaded: sizes {collection.sizes}, dims {collection.dims}")
    return SyntheticDataset(collection, hidden, manifest.get("metadata") or {})


def write_latent(latent: LatentData, dataset: DomainDataset, path: str | Path) -> Path:
    """Coordonnées latentes d'un domaine : z1..zp,label,tie_object."""
    path = Path(path)
    frame = pd.DataFrame(latent.coordinates, columns=[f"z{j + 1}" for j in range(latent.p)])
    frame["label"] = dataset.labels
    frame["tie_object"] = dataset.tie_object
    _write_csv(frame, path)
    return path


def read_latent(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    frame = _read_csv(Path(path))
    columns = sorted((c for c in frame.columns if c.startswith("z")), key=lambda c: int(c[1:]))
    return frame[columns].to_numpy(dtype=np.float64), frame["label"].to_numpy(dtype=np.int64)


def write_curve(rows: list[tuple[int, float, float]], path: str | Path) -> Path:
    """Courbe précision / dimension : dimension,mean_OA,std."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(pd.DataFrame(rows, columns=["dimension", "mean_OA", "std"]), path)
    return path
