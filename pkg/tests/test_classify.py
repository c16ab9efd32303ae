import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from logsieve import classify
from logsieve.errors import ValidationError


def label_vector(n_pos, n_neg, seed=0):
    rng = np.random.default_rng(seed)
    y = np.array([1] * n_pos + [0] * n_neg)
    rng.shuffle(y)
    return y


class TestStratifiedSplit:
    def test_balanced_hundred(self):
        y = label_vector(50, 50)
        train, test = classify.stratified_split(y, 0.2, seed=3)
        assert len(test) == 20
        assert y[test].sum() == 10
        assert len(train) == 80
        assert sorted(np.concatenate([train, test])) == list(range(100))

    def test_same_seed_same_partition(self):
        y = label_vector(37, 63)
        a = classify.stratified_split(y, 0.2, seed=11)
        b = classify.stratified_split(y, 0.2, seed=11)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_seven_positives(self):
        y = label_vector(7, 33)
        _, test = classify.stratified_split(y, 0.2, seed=5)
        assert y[test].sum() in (1, 2)

    def test_single_class_rejected(self):
        with pytest.raises(ValidationError, match="both classes"):
            classify.stratified_split([1, 1, 1], 0.2, seed=0)

    def test_bad_fraction(self):
        with pytest.raises(ValidationError):
            classify.stratified_split([0, 1], 1.0, seed=0)


class TestStratifiedKfold:
    def test_twenty_samples_ten_folds(self):
        y = label_vector(10, 10)
        folds = classify.stratified_kfold(y, 10, seed=0)
        assert len(folds) == 10
        for _, val in folds:
            assert len(val) == 2
            assert y[val].sum() == 1

    def test_folds_partition_indices(self):
        y = label_vector(13, 17)
        folds = classify.stratified_kfold(y, 5, seed=2)
        seen = np.sort(np.concatenate([val for _, val in folds]))
        assert np.array_equal(seen, np.arange(30))
        for train, val in folds:
            assert set(train) & set(val) == set()

    def test_imbalanced_fold_sizes(self):
        y = label_vector(13, 7)
        folds = classify.stratified_kfold(y, 5, seed=4)
        pos_sizes = sorted(int(y[val].sum()) for _, val in folds)
        neg_sizes = sorted(int((1 - y[val]).sum()) for _, val in folds)
        assert set(pos_sizes) <= {2, 3}
        assert set(neg_sizes) <= {1, 2}

    def test_class_smaller_than_k(self):
        y = label_vector(3, 20)
        with pytest.raises(ValidationError, match="fewer than k"):
            classify.stratified_kfold(y, 5, seed=0)

    @settings(max_examples=30)
    @given(st.integers(0, 2**32 - 1))
    def test_fold_class_ratio_within_one(self, seed):
        y = label_vector(23, 41, seed=seed)
        folds = classify.stratified_kfold(y, 4, seed=seed)
        for _, val in folds:
            pos = int(y[val].sum())
            assert abs(pos - 23 / 4) <= 1
            neg = len(val) - pos
            assert abs(neg - 41 / 4) <= 1


def separable_blobs(n=60, margin=2.0, seed=0):
    """Two 2-D blobs separated along x1 with a clear margin."""
    rng = np.random.default_rng(seed)
    pos = rng.normal(0, 0.5, size=(n // 2, 2)) + np.array([margin, 0.0])
    neg = rng.normal(0, 0.5, size=(n // 2, 2)) + np.array([-margin, 0.0])
    X = np.vstack([pos, neg])
    y = np.array([1] * (n // 2) + [0] * (n // 2))
    perm = rng.permutation(n)
    return X[perm], y[perm]


def brute_force_separator_exists(X, y, angles=720):
    """Exhaustive direction scan: is there a line classifying everything?"""
    for k in range(angles):
        theta = math.pi * k / angles
        w = np.array([math.cos(theta), math.sin(theta)])
        z = X @ w
        pos = z[y == 1]
        neg = z[y == 0]
        if pos.min() > neg.max() or neg.min() > pos.max():
            return True
    return False


class TestTrainLogreg:
    def test_separable_set_reaches_full_training_accuracy(self):
        X, y = separable_blobs(seed=1)
        assert brute_force_separator_exists(X, y)
        clf = classify.train("logreg_l2", X, y, seed=0)
        assert (classify.predict(clf, X) == y).mean() == 1.0

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n, d = rng.integers(3, 12), rng.integers(1, 6)
            X = rng.normal(size=(n, d))
            y = rng.integers(0, 2, size=n).astype(float)
            w = rng.normal(size=d)
            b = float(rng.normal())
            lam = float(rng.uniform(0.01, 2.0))
            _, grad_w, grad_b = classify.logreg_loss_and_grad(w, b, X, y, lam)
            numeric = np.zeros(d + 1)
            h = 1e-6
            for j in range(d):
                e = np.zeros(d)
                e[j] = h
                up, _, _ = classify.logreg_loss_and_grad(w + e, b, X, y, lam)
                down, _, _ = classify.logreg_loss_and_grad(w - e, b, X, y, lam)
                numeric[j] = (up - down) / (2 * h)
            up, _, _ = classify.logreg_loss_and_grad(w, b + h, X, y, lam)
            down, _, _ = classify.logreg_loss_and_grad(w, b - h, X, y, lam)
            numeric[d] = (up - down) / (2 * h)
            analytic = np.append(grad_w, grad_b)
            relative = np.linalg.norm(analytic - numeric) / max(
                1e-12, np.linalg.norm(numeric)
            )
            assert relative < 1e-5

    def test_probability_at_zero_margin(self):
        X, y = separable_blobs(seed=2)
        clf = classify.train("logreg_l2", X, y, seed=0)
        boundary = np.zeros((1, 2))
        clf.weights = np.array([1.0, 0.0])
        clf.bias = 0.0
        assert classify.predict_proba(clf, boundary)[0] == pytest.approx(0.5)

    def test_sparse_input_matches_dense(self):
        from scipy import sparse

        X, y = separable_blobs(seed=3)
        dense = classify.train("logreg_l2", X, y, seed=0)
        sparse_clf = classify.train("logreg_l2", sparse.csr_matrix(X), y, seed=0)
        assert np.allclose(dense.weights, sparse_clf.weights)
        assert dense.bias == pytest.approx(sparse_clf.bias)


class TestTrainSvmAndSgd:
    def test_hinge_objective_nonincreasing_on_separable_data(self):
        X, y = separable_blobs(seed=4)
        clf = classify.train("linear_svm", X, y, seed=0)
        lam = clf.hyper["lam"]
        initial = classify.hinge_objective(np.zeros(2), 0.0, X, y, lam)
        final = classify.hinge_objective(clf.weights, clf.bias, X, y, lam)
        assert final <= initial

    def test_svm_classifies_separable_data(self):
        X, y = separable_blobs(seed=5, margin=3.0)
        clf = classify.train("linear_svm", X, y, seed=0)
        assert (classify.predict(clf, X) == y).mean() >= 0.95

    def test_sgd_logistic_classifies_separable_data(self):
        X, y = separable_blobs(seed=6, margin=3.0)
        clf = classify.train("sgd_logistic", X, y, seed=0)
        assert (classify.predict(clf, X) == y).mean() >= 0.95

    def test_training_is_bitwise_deterministic(self):
        X, y = separable_blobs(seed=7)
        for kind in ("logreg_l2", "linear_svm", "sgd_logistic"):
            a = classify.train(kind, X, y, seed=9)
            b = classify.train(kind, X, y, seed=9)
            assert np.array_equal(a.weights, b.weights)
            assert a.bias == b.bias


class TestNearestCentroidAndDummy:
    def test_two_clusters_geometry(self):
        rng = np.random.default_rng(8)
        pos = rng.uniform(-1, 1, size=(30, 2)) + np.array([10.0, 0.0])
        neg = rng.uniform(-1, 1, size=(30, 2)) + np.array([-10.0, 0.0])
        X = np.vstack([pos, neg])
        y = np.array([1] * 30 + [0] * 30)
        clf = classify.train("nearest_centroid", X, y)
        predicted = classify.predict(clf, X)
        # geometric oracle: nearest cluster center
        centers = {0: np.array([-10.0, 0.0]), 1: np.array([10.0, 0.0])}
        for row, label in zip(X, predicted):
            nearer = min(centers, key=lambda c: np.linalg.norm(row - centers[c]))
            assert label == nearer

    def test_tie_goes_to_class_zero(self):
        X = np.array([[0.0, 1.0], [0.0, -1.0]])
        y = np.array([0, 1])
        clf = classify.train("nearest_centroid", X, y)
        midpoint = np.array([[0.0, 0.0]])
        assert classify.predict(clf, midpoint)[0] == 0

    def test_dummy_long_run_rate(self):
        y = label_vector(5000, 5000, seed=1)
        X = np.zeros((len(y), 1))
        clf = classify.train("dummy_stratified", y=y, X=X, seed=123)
        draws = classify.predict(clf, np.zeros((10000, 1)))
        assert abs(draws.mean() - 0.5) < 0.05

    def test_dummy_redraw_is_deterministic(self):
        y = label_vector(10, 10)
        X = np.zeros((20, 1))
        clf = classify.train("dummy_stratified", X, y, seed=7)
        assert np.array_equal(
            classify.predict(clf, np.zeros((50, 1))),
            classify.predict(clf, np.zeros((50, 1))),
        )


class TestPredictConventions:
    def test_zero_margin_is_class_one(self):
        clf = classify.TrainedClassifier(
            kind="logreg_l2", seed=0, hyper={}, weights=np.array([1.0]), bias=0.0
        )
        assert classify.predict(clf, np.array([[0.0]]))[0] == 1

    def test_positive_scaling_invariance(self):
        X, y = separable_blobs(seed=10)
        clf = classify.train("logreg_l2", X, y, seed=0)
        baseline = classify.predict(clf, X)
        for c in (0.001, 3.0, 1e6):
            scaled = classify.TrainedClassifier(
                kind="logreg_l2",
                seed=0,
                hyper={},
                weights=clf.weights * c,
                bias=clf.bias * c,
            )
            assert np.array_equal(classify.predict(scaled, X), baseline)

    def test_dimension_mismatch(self):
        clf = classify.TrainedClassifier(
            kind="logreg_l2", seed=0, hyper={}, weights=np.array([1.0, 2.0]), bias=0.0
        )
        with pytest.raises(ValidationError, match="dimension"):
            classify.predict(clf, np.zeros((3, 5)))

    def test_non_finite_features_rejected(self):
        y = np.array([0, 1])
        X = np.array([[np.nan], [1.0]])
        with pytest.raises(ValidationError, match="non-finite"):
            classify.train("logreg_l2", X, y)


class TestEvaluateClassifier:
    def test_perfect(self):
        metrics = classify.evaluate_classifier([1, 0, 1], [1, 0, 1])
        assert metrics.accuracy == 1.0
        assert metrics.weighted_f1 == 1.0
        assert metrics.weighted_precision == 1.0
        assert metrics.weighted_recall == 1.0

    def test_hand_worked_example(self):
        metrics = classify.evaluate_classifier(pred=[1, 0, 0, 0], truth=[1, 1, 0, 0])
        assert metrics.accuracy == pytest.approx(0.75)
        # class 1: P=1, R=0.5, F1=2/3; class 0: P=2/3, R=1, F1=0.8
        assert metrics.weighted_f1 == pytest.approx(0.5 * (2 / 3) + 0.5 * 0.8)
        assert metrics.weighted_f1 == pytest.approx(0.73333333333)
        assert metrics.weighted_precision == pytest.approx(0.5 * 1 + 0.5 * (2 / 3))
        assert metrics.weighted_recall == pytest.approx(0.75)

    def test_confusion_sums_to_total(self):
        metrics = classify.evaluate_classifier([1, 0, 1, 1], [0, 0, 1, 1])
        assert sum(sum(row) for row in metrics.confusion) == 4
        trace = metrics.confusion[0][0] + metrics.confusion[1][1]
        assert metrics.accuracy == trace / 4

    def test_zero_denominator_f1_is_zero(self):
        metrics = classify.evaluate_classifier(pred=[0, 0], truth=[1, 1])
        assert metrics.weighted_f1 == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            classify.evaluate_classifier([1], [1, 0])


class TestGridSearch:
    def test_single_point_grid_returns_that_point(self):
        X, y = separable_blobs(n=80, seed=11)
        configs = [classify.FeatureConfig(scale=True, pca_k=None)]
        result = classify.grid_search(["logreg_l2"], configs, X, y, k=4, seed=0)
        report = result["logreg_l2"]
        assert report.config["feature_config"] == {"scale": True, "pca_k": None}
        assert len(report.per_fold) == 4

    def test_dominant_dimension_wins(self):
        # First 8 dims: high-variance noise. Dims 8..16: class signal with
        # smaller variance, so PCA-8 sees only noise while PCA-16 keeps the
        # signal.
        rng = np.random.default_rng(12)
        n = 200
        y = label_vector(100, 100, seed=12)
        noise = rng.normal(0, 10.0, size=(n, 8))
        signal = rng.normal(0, 1.0, size=(n, 8)) + np.where(y[:, None] == 1, 3.0, -3.0)
        X = np.hstack([noise, signal])
        configs = [
            classify.FeatureConfig(scale=False, pca_k=8),
            classify.FeatureConfig(scale=False, pca_k=16),
        ]
        result = classify.grid_search(["logreg_l2"], configs, X, y, k=4, seed=1)
        assert result["logreg_l2"].config["feature_config"]["pca_k"] == 16
        assert result["logreg_l2"].test.accuracy > 0.9

    def test_tie_breaks_to_smaller_k(self):
        # Only 2 informative dims; anything beyond rank adds nothing, so
        # both grid points score identically and the smaller k must win.
        rng = np.random.default_rng(13)
        n = 120
        y = label_vector(60, 60, seed=13)
        base = np.where(y[:, None] == 1, 4.0, -4.0) + rng.normal(0, 0.5, size=(n, 1))
        X = np.hstack([base, rng.normal(0, 0.5, size=(n, 1)), np.zeros((n, 6))])
        configs = [
            classify.FeatureConfig(scale=False, pca_k=4),
            classify.FeatureConfig(scale=False, pca_k=2),
        ]
        result = classify.grid_search(["logreg_l2"], configs, X, y, k=4, seed=2)
        assert result["logreg_l2"].config["feature_config"]["pca_k"] == 2

    def test_deterministic_report(self):
        X, y = separable_blobs(n=60, seed=14)
        configs = [classify.FeatureConfig()]
        a = classify.grid_search(["linear_svm"], configs, X, y, k=3, seed=5)
        b = classify.grid_search(["linear_svm"], configs, X, y, k=3, seed=5)
        assert a["linear_svm"] == b["linear_svm"]

    def test_empty_grid_rejected(self):
        with pytest.raises(ValidationError, match="non-empty"):
            classify.grid_search(["logreg_l2"], [], np.zeros((4, 2)), [0, 1, 0, 1])


class TestBalance:
    def test_downsamples_majority(self):
        y = label_vector(30, 70, seed=3)
        idx = classify.balance_indices(y, seed=0)
        assert len(idx) == 60
        assert y[idx].sum() == 30


class TestPersistence:
    def test_round_trip_linear(self, tmp_path):
        X, y = separable_blobs(seed=15)
        clf = classify.train("logreg_l2", X, y, seed=4)
        path = tmp_path / "model.json"
        classify.save_classifier(clf, path)
        loaded = classify.load_classifier(path)
        assert loaded.kind == "logreg_l2"
        assert np.array_equal(loaded.weights, clf.weights)
        assert loaded.bias == clf.bias
        assert np.array_equal(classify.predict(loaded, X), classify.predict(clf, X))

    def test_round_trip_centroid_and_dummy(self, tmp_path):
        X, y = separable_blobs(seed=16)
        for kind in ("nearest_centroid", "dummy_stratified"):
            clf = classify.train(kind, X, y, seed=4)
            path = tmp_path / f"{kind}.json"
            classify.save_classifier(clf, path)
            loaded = classify.load_classifier(path)
            assert np.array_equal(
                classify.predict(loaded, X), classify.predict(clf, X)
            )

    def test_version_check(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text('{"format_version": 9, "kind": "logreg_l2", "seed": 0}')
        with pytest.raises(ValidationError, match="version"):
            classify.load_classifier(path)
