"""
Tests des classifieurs latents, de l'évaluation (OA, kappa) et de la validation croisée
"""

import numpy as np
import pytest
from scipy.optimize import minimize

from core.classify import (
    accuracy_by_dimension,
    cross_validate,
    decision_scores,
    evaluate,
    predict,
    train,
    train_kernel_svm,
    train_linear_svm,
    train_onenn,
)
from core.errors import ConfigError, DimensionMismatch, LengthMismatch, SingleClass, TooFewPerClass
from core.kernels import gram


def separable(seed: int = 0, per_class: int = 15, dims: int = 3):
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], per_class)
    Z = 0.3 * rng.standard_normal((y.size, dims))
    Z[:, 0] += np.where(y == 0, -5.0, 5.0)
    return Z, y


def primal_objective(w, b, X, t, C):
    margins = t * (X @ w + b)
    return 0.5 * (w @ w + b * b) + C * np.maximum(0.0, 1.0 - margins).sum()


def dual_reference(X, t, C):
    """max Σα − ½αᵀQα sur la boîte [0, C], Q_ij = t_i t_j [x_i,1]ᵀ[x_j,1]"""
    augmented = np.column_stack([X, np.ones(X.shape[0])])
    Q = (t[:, None] * augmented) @ (t[:, None] * augmented).T
    result = minimize(
        lambda a: 0.5 * a @ Q @ a - a.sum(),
        np.zeros(X.shape[0]),
        jac=lambda a: Q @ a - 1.0,
        method="L-BFGS-B",
        bounds=[(0.0, C)] * X.shape[0],
        options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 10_000},
    )
    return -result.fun


class TestLinearSVM:

    def test_separable_training_accuracy(self):
        Z, y = separable()
        model = train_linear_svm(Z, y)
        np.testing.assert_array_equal(predict(model, Z), y)
        assert model.classes == (0, 1)
        assert model.weights.shape == (2, 3)

    def test_label_flip(self):
        Z, y = separable(1)
        model = train_linear_svm(Z, 1 - y)
        np.testing.assert_array_equal(predict(model, Z), 1 - y)

    def test_objective_matches_dual_reference(self):
        """Objectif primal du SVM = optimum dual calculé indépendamment"""
        rng = np.random.default_rng(3)
        y = np.repeat([0, 1], 20)
        Z = rng.standard_normal((40, 2)) + np.where(y == 0, -0.7, 0.7)[:, None]
        C = 1.0
        model = train_linear_svm(Z, y, C)
        t = np.where(y == 0, 1.0, -1.0)
        primal = primal_objective(model.weights[0], model.biases[0], Z, t, C)
        dual = dual_reference(Z, t, C)
        assert primal >= dual - 1e-6 * abs(dual)
        assert primal == pytest.approx(dual, rel=1e-4)

    def test_scores_argmax_is_prediction(self):
        rng = np.random.default_rng(4)
        y = np.repeat([0, 1, 2], 10)
        Z = rng.standard_normal((30, 2)) + 4.0 * np.eye(3)[y][:, :2]
        model = train_linear_svm(Z, y)
        scores = decision_scores(model, Z)
        assert scores.shape == (30, 3)
        np.testing.assert_array_equal(np.asarray(model.classes)[scores.argmax(axis=1)], predict(model, Z))

    def test_errors(self):
        Z, y = separable()
        with pytest.raises(ConfigError):
            train_linear_svm(Z, y, C=0.0)
        with pytest.raises(SingleClass):
            train_linear_svm(Z, np.zeros_like(y))
        with pytest.raises(LengthMismatch):
            train_linear_svm(Z, y[:-1])
        model = train_linear_svm(Z, y)
        with pytest.raises(DimensionMismatch):
            predict(model, np.zeros((2, 5)))


class TestOtherClassifiers:

    def test_kernel_svm_solves_xor(self):
        rng = np.random.default_rng(6)
        corners = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
        Z = np.repeat(corners, 10, axis=0) + 0.1 * rng.standard_normal((40, 2))
        y = np.repeat([0, 0, 1, 1], 10)
        model = train_kernel_svm(Z, y, C=10.0)
        np.testing.assert_array_equal(predict(model, Z), y)
        assert model.kernel_spec.sigma > 0
        assert model.metadata["sigma"] == model.kernel_spec.sigma

    def test_kernel_svm_label_flip(self):
        rng = np.random.default_rng(7)
        angles = rng.uniform(0.0, 2.0 * np.pi, 40)
        y = np.repeat([0, 1], 20)
        Z = np.column_stack([np.cos(angles), np.sin(angles)]) * np.where(y == 0, 1.0, 3.0)[:, None]
        model = train_kernel_svm(Z, y, C=10.0)
        flipped = train_kernel_svm(Z, 1 - y, C=10.0)
        np.testing.assert_array_equal(predict(flipped, Z), 1 - predict(model, Z))
        np.testing.assert_array_equal(predict(model, Z), y)

    def test_kernel_svm_objective_matches_dual_reference(self):
        """Le SVM à noyau est un SVM linéaire sur les colonnes de Gram : même optimum dual"""
        rng = np.random.default_rng(19)
        y = np.repeat([0, 1], 15)
        Z = rng.standard_normal((30, 2)) + np.where(y == 0, -0.5, 0.5)[:, None]
        C = 1.0
        model = train_kernel_svm(Z, y, C)
        G = gram(Z, Z, model.kernel_spec)
        t = np.where(y == 0, 1.0, -1.0)
        primal = primal_objective(model.weights[0], model.biases[0], G, t, C)
        dual = dual_reference(G, t, C)
        assert primal >= dual - 1e-6 * abs(dual)
        assert primal == pytest.approx(dual, rel=1e-4)

    def test_onenn_recovers_prototypes(self, rng):
        Z = rng.standard_normal((12, 3))
        y = np.arange(12) % 3
        model = train_onenn(Z, y)
        np.testing.assert_array_equal(predict(model, Z), y)

    def test_ties_go_to_smallest_class(self):
        model = train_onenn(np.array([[1.0], [-1.0]]), np.array([1, 0]))
        assert predict(model, np.array([[0.0]])).tolist() == [0]

    def test_empty_batch(self):
        Z, y = separable()
        model = train(Z, y, kind="onenn")
        assert predict(model, np.zeros((0, 3))).size == 0

    def test_unknown_kind(self):
        Z, y = separable()
        with pytest.raises(ConfigError):
            train(Z, y, kind="random_forest")


def labels_from_confusion(confusion):
    truth, pred = [], []
    for i, row in enumerate(confusion):
        for j, count in enumerate(row):
            truth += [i] * count
            pred += [j] * count
    return np.array(pred), np.array(truth)


class TestEvaluate:

    def test_perfect_prediction(self):
        y = np.array([0, 1, 2, 2, 1])
        report = evaluate(y, y)
        assert report.overall_accuracy == 1.0
        assert report.kappa == 1.0

    def test_reference_confusion(self):
        pred, truth = labels_from_confusion([[40, 10], [20, 30]])
        report = evaluate(pred, truth)
        assert report.overall_accuracy == pytest.approx(0.7)
        assert report.kappa == pytest.approx(0.4)
        np.testing.assert_array_equal(report.confusion, [[40, 10], [20, 30]])
        assert report.n == 100

    def test_chance_level_kappa_near_zero(self):
        rng = np.random.default_rng(29)
        truth = rng.integers(0, 3, 2000)
        pred = rng.integers(0, 3, 2000)
        report = evaluate(pred, truth)
        assert abs(report.kappa) <= 0.1
        assert report.kappa <= report.overall_accuracy

    def test_single_class_agreement(self):
        report = evaluate([2, 2, 2], [2, 2, 2])
        assert report.overall_accuracy == 1.0 and report.kappa == 1.0

    def test_per_domain(self):
        pred = np.array([0, 1, 0, 0, 1, 1])
        truth = np.array([0, 1, 1, 0, 1, 0])
        report = evaluate(pred, truth, domain_of=[0, 0, 0, 1, 1, 1])
        assert report.per_domain[0].n == 3
        assert report.per_domain[0].overall_accuracy == pytest.approx(2 / 3)
        assert report.per_domain[1].overall_accuracy == pytest.approx(2 / 3)
        assert report.to_dict()["per_domain"]["1"]["n"] == 3

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            evaluate([0, 1], [0, 1, 1])
        with pytest.raises(LengthMismatch):
            evaluate([0, 1], [0, 1], domain_of=[0])


class TestCrossValidate:

    def test_single_cell(self):
        Z, y = separable()
        result = cross_validate(Z, y, {"p": [2], "C": [1.0]})
        assert len(result.table) == 1
        assert result.best["p"] == 2 and result.best["mean_accuracy"] == 1.0

    def test_ties_prefer_smallest_p_then_c(self):
        Z, y = separable(2)
        result = cross_validate(Z, y, {"p": [3, 1, 2], "C": [10.0, 0.1, 1.0]})
        assert len(result.table) == 9
        assert all(row["mean_accuracy"] == 1.0 for row in result.table)
        assert (result.best["p"], result.best["C"]) == (1, 0.1)

    def test_duplicate_grid_entries(self):
        Z, y = separable()
        result = cross_validate(Z, y, {"p": [1, 1], "C": [1.0]})
        assert len(result.table) == 2
        assert result.table[0]["mean_accuracy"] == result.table[1]["mean_accuracy"]

    def test_out_of_range_dimensions_are_dropped(self):
        Z, y = separable()
        result = cross_validate(Z, y, {"p": [1, 7], "C": [1.0]})
        assert [row["p"] for row in result.table] == [1]
        with pytest.raises(ConfigError):
            cross_validate(Z, y, {"p": [9], "C": [1.0]})

    def test_kernel_svm_sigma_axis(self):
        Z, y = separable(3, per_class=9, dims=2)
        result = cross_validate(Z, y, {"p": [2], "C": [1.0], "sigma": [0.01, 0.1]}, kind="kernel_svm")
        assert sorted(row["sigma"] for row in result.table) == [0.01, 0.1]

    def test_too_few_per_class(self):
        Z = np.random.default_rng(0).standard_normal((7, 2))
        y = np.array([0, 0, 0, 0, 0, 1, 1])
        with pytest.raises(TooFewPerClass):
            cross_validate(Z, y, {"p": [1]}, folds=3)

    def test_deterministic(self):
        Z, y = separable(5)
        Z[:, 0] *= 0.05
        first = cross_validate(Z, y, {"p": [1, 2], "C": [0.1, 1.0]}, seed=4)
        assert cross_validate(Z, y, {"p": [1, 2], "C": [0.1, 1.0]}, seed=4).table == first.table


def test_accuracy_by_dimension():
    """Seule la deuxième dimension porte l'information de classe"""
    rng = np.random.default_rng(8)
    y = np.repeat([0, 1], 30)
    Z = rng.standard_normal((60, 3))
    Z[:, 1] += np.where(y == 0, -6.0, 6.0)
    curve = accuracy_by_dimension(Z[::2], y[::2], Z[1::2], y[1::2])
    assert [p for p, _ in curve] == [1, 2, 3]
    assert curve[1][1] == 1.0
    assert curve[2][1] == 1.0
    assert len(accuracy_by_dimension(Z, y, Z, y, p_max=2)) == 2
