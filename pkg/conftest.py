"""
Fixtures partagées par les tests de manialign
"""

import logging
from logging.handlers import RotatingFileHandler

import numpy as np
import pytest

from core.synth import generate
from models.config import SynthSpec
from models.dataset import DomainDataset, MultiDomainCollection

ROTATE_90 = np.array([[0.0, -1.0], [1.0, 0.0]])


@pytest.fixture(autouse=True)
def reset_app_loggers():
    """setup_logging coupe la propagation : on la rétablit après chaque test (caplog)."""
    yield
    for name in ("manialign", "manialign.experiment.summary"):
        logger = logging.getLogger(name)
        for handler in list(logger.handlers):
            logger.removeHandler(handler)
            handler.close()
        logger.propagate = True
        logger.setLevel(logging.NOTSET)
    root = logging.getLogger()
    for handler in list(root.handlers):
        if type(handler) in (logging.StreamHandler, RotatingFileHandler):
            root.removeHandler(handler)
            handler.close()


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def blob_domain(seed: int, per_class: int = 20, noise: float = 0.3, rotate: bool = False,
                centers=((4.0, 0.0), (0.0, 4.0), (4.0, 4.0))) -> DomainDataset:
    """Trois classes gaussiennes en 2-D, éventuellement tournées de 90°."""
    generator = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=np.float64)
    labels = np.repeat(np.arange(centers.shape[0]), per_class)
    features = centers[labels] + noise * generator.standard_normal((labels.size, 2))
    if rotate:
        features = features @ ROTATE_90.T
    return DomainDataset(features, labels)


@pytest.fixture
def blobs_pair() -> MultiDomainCollection:
    """Deux domaines : blobs et les mêmes blobs tournés de 90° (bruit indépendant)."""
    return MultiDomainCollection((blob_domain(1), blob_domain(2, rotate=True)))


@pytest.fixture
def multiview_small() -> MultiDomainCollection:
    return generate(SynthSpec(num_domains=2, samples_per_domain=60, seed=1)).collection


@pytest.fixture
def ties_small():
    return generate(SynthSpec(archetype="colocated_ties", samples_per_domain=150, num_objects=9,
                              object_size=(3, 5), seed=2))
