"""
Tests des noyaux, de la largeur de bande médiane et de la matrice bloc-diagonale
"""

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from core.errors import ConfigError, DegenerateData, DimensionMismatch, OrderingMismatch
from core.kernels import KernelSpec, assemble_block_kernel, gram, median_bandwidth, resolve_specs
from models.dataset import DomainDataset, MultiDomainCollection


def collection(*feature_sets) -> MultiDomainCollection:
    return MultiDomainCollection(tuple(DomainDataset(np.asarray(X, dtype=float)) for X in feature_sets))


class TestMedianBandwidth:

    def test_two_points(self):
        assert median_bandwidth(np.array([[0.0, 0.0], [0.0, 4.0]])) == pytest.approx(2.0)

    def test_unit_square(self):
        corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        assert median_bandwidth(corners) == pytest.approx(0.5)

    def test_matches_exhaustive_pairs(self):
        X = np.random.default_rng(11).standard_normal((500, 3))
        distances = [np.linalg.norm(X[i] - X[j]) for i in range(500) for j in range(i + 1, 500)]
        assert median_bandwidth(X) == pytest.approx(0.5 * np.median(distances), rel=1e-12)

    def test_subsample_is_seeded(self):
        X = np.random.default_rng(4).standard_normal((300, 2))
        first = median_bandwidth(X, seed=5, max_samples=100)
        assert median_bandwidth(X, seed=5, max_samples=100) == first
        assert first != median_bandwidth(X, seed=5, max_samples=300)

    def test_scaling_a_domain_scales_its_bandwidth(self):
        X = np.random.default_rng(6).standard_normal((50, 4))
        assert median_bandwidth(3.0 * X) == pytest.approx(3.0 * median_bandwidth(X), rel=1e-12)

    def test_degenerate(self):
        with pytest.raises(DegenerateData):
            median_bandwidth(np.ones((5, 2)))
        with pytest.raises(DegenerateData):
            median_bandwidth(np.ones((1, 2)))


class TestGram:

    def test_rbf_diagonal_and_range(self, rng):
        X = rng.standard_normal((6, 3))
        K = gram(X, X, KernelSpec("rbf", 1.0))
        np.testing.assert_allclose(np.diag(K), 1.0)
        assert np.all(K > 0) and np.all(K <= 1.0)
        np.testing.assert_allclose(K, K.T)

    def test_rbf_convention(self):
        K = gram(np.array([[0.0]]), np.array([[2.0]]), KernelSpec("rbf", 1.0))
        assert K[0, 0] == pytest.approx(np.exp(-2.0))

    def test_linear_on_orthonormal_rows(self):
        K = gram(np.eye(3), np.eye(3), KernelSpec("linear"))
        np.testing.assert_array_equal(K, np.eye(3))

    def test_rbf_is_psd(self):
        X = np.random.default_rng(2).standard_normal((6, 2))
        K = gram(X, X, KernelSpec("rbf", 1.0))
        assert np.linalg.eigvalsh(K).min() >= -1e-10

    def test_rectangular(self, rng):
        K = gram(rng.standard_normal((4, 2)), rng.standard_normal((7, 2)), KernelSpec("rbf", 0.5))
        assert K.shape == (4, 7)

    def test_errors(self, rng):
        with pytest.raises(DimensionMismatch):
            gram(rng.standard_normal((3, 2)), rng.standard_normal((3, 3)), KernelSpec("linear"))
        with pytest.raises(ConfigError):
            gram(np.zeros((2, 2)), np.zeros((2, 2)), KernelSpec("rbf"))


class TestKernelSpec:

    def test_validation(self):
        with pytest.raises(ConfigError):
            KernelSpec("polynomial")
        with pytest.raises(ConfigError):
            KernelSpec("rbf", "quarter_median")
        with pytest.raises(ConfigError):
            KernelSpec("rbf", -1.0)

    def test_resolution(self):
        X = np.array([[0.0], [4.0]])
        spec = KernelSpec("rbf").resolve(X)
        assert spec.resolved and spec.sigma == pytest.approx(2.0)
        assert KernelSpec("linear").resolved
        assert KernelSpec("linear").sigma is None

    def test_dict_form(self):
        spec = KernelSpec("rbf", 0.25)
        assert spec.to_dict() == {"kind": "rbf", "bandwidth": 0.25}
        assert KernelSpec.from_dict(spec.to_dict()) == spec
        assert KernelSpec.from_dict(KernelSpec("linear").to_dict()).kind == "linear"


class TestBlockKernel:

    def test_single_sample_domains(self):
        block = assemble_block_kernel(collection([[1.0, 2.0]], [[3.0]]), KernelSpec("rbf", 1.0))
        np.testing.assert_array_equal(block.assembled, np.eye(2))

    def test_linear_blocks(self, rng):
        X1, X2 = rng.standard_normal((4, 3)), rng.standard_normal((3, 2))
        block = assemble_block_kernel(collection(X1, X2), KernelSpec("linear"))
        np.testing.assert_allclose(block.assembled[:4, :4], X1 @ X1.T)
        np.testing.assert_allclose(block.assembled[4:, 4:], X2 @ X2.T)
        assert block.bandwidths == [None, None]

    def test_off_blocks_are_zero(self):
        rng = np.random.default_rng(5)
        data = collection(rng.standard_normal((5, 2)), rng.standard_normal((4, 3)), rng.standard_normal((6, 2)))
        block = assemble_block_kernel(data, KernelSpec("rbf"))
        offsets = data.sample_offsets
        mask = np.ones_like(block.assembled, dtype=bool)
        for m in range(data.M):
            mask[offsets[m]:offsets[m + 1], offsets[m]:offsets[m + 1]] = False
        assert block.assembled[mask].sum() == 0.0
        assert np.linalg.eigvalsh(block.assembled).min() >= -1e-10

    def test_per_domain_bandwidths(self, rng):
        X = rng.standard_normal((30, 2))
        specs = resolve_specs(collection(X, 2.0 * X), KernelSpec("rbf"))
        assert specs[1].sigma == pytest.approx(2.0 * specs[0].sigma, rel=1e-12)
        assert specs[0].sigma == pytest.approx(0.5 * np.median(pdist(X)))

    def test_mixed_kernels(self, rng):
        data = collection(rng.standard_normal((5, 2)), rng.standard_normal((5, 2)))
        block = assemble_block_kernel(data, [KernelSpec("linear"), KernelSpec("rbf", 1.0)])
        assert block.bandwidths == [None, 1.0]

    def test_spec_count_must_match_domains(self, rng):
        data = collection(rng.standard_normal((5, 2)), rng.standard_normal((5, 2)))
        with pytest.raises(OrderingMismatch):
            assemble_block_kernel(data, [KernelSpec("linear")])
