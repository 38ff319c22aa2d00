"""
Tests des méthodes de comparaison : appariement d'histogrammes, kCCA, bandes communes
"""

import logging

import numpy as np
import pytest
from scipy.stats import ks_2samp

from core.baselines import (
    common_band_subset,
    fit_kcca,
    histogram_match,
    tie_pairs,
    tie_representative,
)
from core.errors import DataError, DimensionMismatch, EmptyObject, NoCommonBands, TooFewPairs
from core.kernels import KernelSpec
from models.dataset import DomainDataset, MultiDomainCollection


class TestHistogramMatch:

    def test_identity(self, rng):
        X = rng.standard_normal((500, 2))
        mapping = histogram_match(X, X)
        np.testing.assert_allclose(mapping.apply(X), X, atol=1e-12)

    def test_constant_shift(self, rng):
        X = rng.standard_normal((400, 3))
        mapping = histogram_match(X, X + 10.0)
        np.testing.assert_allclose(mapping.apply(X), X + 10.0, atol=1e-9)

    def test_distribution_transfer(self):
        """Statistique KS entre sortie et référence bornée par 2/bins"""
        rng = np.random.default_rng(31)
        source = rng.standard_normal(2000)
        reference = rng.exponential(2.0, 3000)
        mapping = histogram_match(source, reference)
        assert ks_2samp(mapping.apply(source), reference).statistic <= 2.0 / 256

    def test_monotone(self, rng):
        source = rng.uniform(0.0, 1.0, (300, 1))
        reference = rng.gamma(2.0, 1.0, (300, 1))
        mapping = histogram_match(source, reference, bins=32)
        grid = np.linspace(-0.5, 1.5, 101)[:, None]
        assert np.all(np.diff(mapping.apply(grid)[:, 0]) >= 0)

    def test_constant_band_falls_back(self, caplog):
        source = np.full((20, 1), 3.0)
        reference = np.linspace(0.0, 4.0, 20)[:, None]
        with caplog.at_level(logging.WARNING, logger="manialign.baselines"):
            mapping = histogram_match(source, reference)
        assert "constant source values" in caplog.text
        np.testing.assert_allclose(mapping.apply(source), 2.0)

    def test_errors(self, rng):
        with pytest.raises(DimensionMismatch):
            histogram_match(rng.standard_normal((10, 2)), rng.standard_normal((10, 3)))
        with pytest.raises(DataError):
            histogram_match(rng.standard_normal(10), rng.standard_normal(10), bins=1)
        mapping = histogram_match(rng.standard_normal((10, 2)), rng.standard_normal((10, 2)))
        with pytest.raises(DimensionMismatch):
            mapping.apply(np.zeros((3, 1)))


class TestKCCA:

    def test_identical_views_are_fully_correlated(self, rng):
        A = rng.standard_normal((30, 3))
        projection = fit_kcca(A, A.copy(), p=2)
        np.testing.assert_allclose(projection.correlations, 1.0, atol=1e-6)

    def test_rotated_view(self, rng):
        A = rng.standard_normal((40, 3))
        Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        projection = fit_kcca(A, A @ Q, p=3)
        np.testing.assert_allclose(projection.correlations, 1.0, atol=1e-6)
        np.testing.assert_allclose(projection.transform(0, A), projection.transform(1, A @ Q), atol=1e-6)

    def test_independent_views(self):
        rng = np.random.default_rng(37)
        projection = fit_kcca(rng.standard_normal((40, 3)), rng.standard_normal((40, 3)), p=3)
        assert projection.correlations.mean() <= 0.5
        assert np.all(projection.correlations >= -1e-8)
        assert np.all(projection.correlations <= 1.0 + 1e-8)

    def test_correlations_are_sorted(self, rng):
        A = rng.standard_normal((50, 4))
        B = A[:, :2] @ rng.standard_normal((2, 3)) + 0.5 * rng.standard_normal((50, 3))
        projection = fit_kcca(A, B, p=3)
        assert np.all(np.diff(projection.eigenvalues) <= 1e-12)

    def test_transform_reproduces_training_scores(self, rng):
        A, B = rng.standard_normal((25, 2)), rng.standard_normal((25, 3))
        projection = fit_kcca(A, B, KernelSpec("rbf"), p=2)
        q = A.shape[0]
        H = np.eye(q) - np.full((q, q), 1.0 / q)
        K = np.exp(-((A[:, None, :] - A[None, :, :]) ** 2).sum(axis=2) / (2.0 * projection.specs[0].sigma ** 2))
        np.testing.assert_allclose(projection.transform(0, A), H @ K @ H @ projection.alphas[0], atol=1e-10)

    def test_errors(self, rng):
        with pytest.raises(TooFewPairs):
            fit_kcca(rng.standard_normal((5, 2)), rng.standard_normal((4, 2)))
        with pytest.raises(TooFewPairs):
            fit_kcca(rng.standard_normal((1, 2)), rng.standard_normal((1, 2)))
        with pytest.raises(DataError):
            fit_kcca(rng.standard_normal((5, 2)), rng.standard_normal((5, 2)), eps=0.0)
        projection = fit_kcca(rng.standard_normal((5, 2)), rng.standard_normal((5, 2)), p=1)
        with pytest.raises(DataError):
            projection.transform(2, np.zeros((1, 2)))


class TestTieRepresentative:

    def test_singleton(self):
        np.testing.assert_array_equal(tie_representative([[3.0, 1.0]]), [3.0, 1.0])

    def test_symmetric_pair_picks_first(self):
        np.testing.assert_array_equal(tie_representative([[0.0], [2.0]]), [0.0])

    def test_closest_to_mean(self):
        pixels = np.random.default_rng(41).standard_normal((10, 3))
        expected = int(np.argmin(np.linalg.norm(pixels - pixels.mean(axis=0), axis=1)))
        np.testing.assert_array_equal(tie_representative(pixels), pixels[expected])

    def test_empty_object(self):
        with pytest.raises(EmptyObject):
            tie_representative(np.zeros((0, 3)))

    def test_tie_pairs(self, ties_small):
        data = ties_small.collection
        paired_A, paired_B, objects = tie_pairs(data)
        np.testing.assert_array_equal(objects, np.arange(9))
        assert paired_A.shape == (9, 3) and paired_B.shape == (9, 3)
        source = data.domain(0)
        first = source.features[source.tie_object == 0]
        np.testing.assert_array_equal(paired_A[0], tie_representative(first))


def tagged(*tags, n=4):
    rng = np.random.default_rng(len(tags))
    return DomainDataset(rng.standard_normal((n, len(tags))), band_tags=tags)


class TestCommonBands:

    def test_identical_tags(self):
        data = MultiDomainCollection((tagged("R", "G", "B"), tagged("R", "G", "B")))
        reduced = common_band_subset(data)
        np.testing.assert_array_equal(reduced.domain(1).features, data.domain(1).features)

    def test_partial_overlap_keeps_first_domain_order(self):
        source, target = tagged("R", "G", "B"), tagged("NIR", "R", "G")
        reduced = common_band_subset(MultiDomainCollection((source, target)))
        assert reduced.domain(0).band_tags == ("R", "G")
        assert reduced.domain(1).band_tags == ("R", "G")
        np.testing.assert_array_equal(reduced.domain(1).features, target.features[:, [1, 2]])

    def test_disjoint_tags(self):
        with pytest.raises(NoCommonBands):
            common_band_subset(MultiDomainCollection((tagged("R", "G"), tagged("NIR", "SWIR"))))

    def test_missing_tags(self, rng):
        data = MultiDomainCollection((tagged("R"), DomainDataset(rng.standard_normal((4, 1)))))
        with pytest.raises(DataError):
            common_band_subset(data)
