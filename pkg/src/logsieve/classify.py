"""Relevance classifiers and the split/cross-validation protocol.

Five classifier kinds: L2 logistic regression (full-batch gradient descent
with backtracking), linear SVM (Pegasos-style subgradient descent on the
hinge loss), single-sample SGD logistic regression, nearest centroid, and a
stratified dummy baseline. Training is deterministic in (data, config,
seed).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import ValidationError

MODEL_FORMAT_VERSION = 1

KINDS = (
    "logreg_l2",
    "linear_svm",
    "sgd_logistic",
    "nearest_centroid",
    "dummy_stratified",
)

_LINEAR_KINDS = ("logreg_l2", "linear_svm", "sgd_logistic")

# lam=None resolves to 1/n_samples at fit time: with the mean-loss
# objectives below that is the conventional C=1 regularization strength
# (a literal lam of 1 on mean loss is n times stronger and collapses
# unit-norm feature rows onto the majority class).
DEFAULT_HYPER = {
    "logreg_l2": {"lam": None, "max_epochs": 1000, "tol": 1e-6},
    "linear_svm": {"lam": None, "epochs": 50},
    "sgd_logistic": {"lam": 1e-4, "eta0": 0.1, "epochs": 50},
    "nearest_centroid": {},
    "dummy_stratified": {},
}


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class EvalMetrics:
    accuracy: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    confusion: tuple[tuple[int, int], tuple[int, int]]  # [truth][pred]


@dataclass
class TrainedClassifier:
    kind: str
    seed: int
    hyper: dict
    weights: np.ndarray | None = None
    bias: float = 0.0
    centroids: np.ndarray | None = None  # (2, d), row per class
    class_prior: float | None = None  # P(label == 1)
    feature_pipeline: object | None = None


@dataclass
class CvReport:
    per_fold: list[EvalMetrics]
    test: EvalMetrics
    config: dict

    @property
    def mean_fold_f1(self) -> float:
        return sum(m.weighted_f1 for m in self.per_fold) / len(self.per_fold)


def _as_label_array(labels) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim != 1 or y.size == 0:
        raise ValidationError("labels must be a non-empty 1-D sequence")
    if not np.isin(y, (0, 1)).all():
        raise ValidationError("labels must be binary 0/1")
    return y.astype(np.int64)


def stratified_split(labels, test_fraction: float, seed: int):
    """Deterministic class-preserving train/test partition.

    Per class, round(count * test_fraction) samples go to the test side
    (half-up rounding). Returns sorted index arrays.
    """
    y = _as_label_array(labels)
    if not 0.0 < test_fraction < 1.0:
        raise ValidationError("test_fraction must be strictly between 0 and 1")
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValidationError("stratified split needs both classes present")
    rng = np.random.default_rng(seed)
    test_parts = []
    for c in classes:
        idx = np.flatnonzero(y == c)
        perm = rng.permutation(idx)
        n_test = round_half_up(len(idx) * test_fraction)
        test_parts.append(perm[:n_test])
    test_idx = np.sort(np.concatenate(test_parts))
    mask = np.ones(len(y), dtype=bool)
    mask[test_idx] = False
    train_idx = np.flatnonzero(mask)
    return train_idx, test_idx


def stratified_kfold(labels, k: int, seed: int):
    """k folds whose validation sets partition the data, class-balanced.

    Per-class fold sizes differ by at most one. Every class must have at
    least k members.
    """
    y = _as_label_array(labels)
    if k < 2:
        raise ValidationError("k must be at least 2")
    rng = np.random.default_rng(seed)
    per_class_chunks = []
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        if len(idx) < k:
            raise ValidationError(
                f"class {c} has {len(idx)} members, fewer than k={k}"
            )
        perm = rng.permutation(idx)
        per_class_chunks.append(np.array_split(perm, k))
    folds = []
    for i in range(k):
        val = np.sort(np.concatenate([chunks[i] for chunks in per_class_chunks]))
        mask = np.ones(len(y), dtype=bool)
        mask[val] = False
        folds.append((np.flatnonzero(mask), val))
    return folds


def balance_indices(labels, seed: int) -> np.ndarray:
    """Indices of a class-balanced subsample (majority class downsampled)."""
    y = _as_label_array(labels)
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValidationError("balancing needs both classes present")
    rng = np.random.default_rng(seed)
    n_min = min(int((y == c).sum()) for c in classes)
    parts = []
    for c in classes:
        idx = np.flatnonzero(y == c)
        perm = rng.permutation(idx)
        parts.append(perm[:n_min])
    return np.sort(np.concatenate(parts))


def _check_features(X):
    if sparse.issparse(X):
        if not np.isfinite(X.data).all():
            raise ValidationError("features contain non-finite values")
        return X.tocsr()
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValidationError("feature matrix must be 2-D")
    if not np.isfinite(X).all():
        raise ValidationError("features contain non-finite values")
    return X


def _margins(weights, bias, X) -> np.ndarray:
    z = X @ weights
    if sparse.issparse(X):
        z = np.asarray(z).ravel()
    return z + bias


def logreg_loss_and_grad(weights, bias, X, y, lam):
    """Regularized mean log-loss and its analytic gradient.

    loss = mean(softplus(z) - y * z) + lam/2 * ||w||^2 with z = Xw + b.
    The bias is not penalized.
    """
    y = np.asarray(y, dtype=np.float64)
    z = _margins(weights, bias, X)
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    loss += 0.5 * lam * float(weights @ weights)
    p = _sigmoid(z)
    residual = (p - y) / len(y)
    grad_w = X.T @ residual
    if sparse.issparse(X):
        grad_w = np.asarray(grad_w).ravel()
    grad_w = grad_w + lam * weights
    grad_b = float(residual.sum())
    return loss, grad_w, grad_b


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _train_logreg(X, y, hyper, seed):
    n, d = X.shape
    lam = hyper["lam"]
    weights = np.zeros(d)
    bias = 0.0
    loss, grad_w, grad_b = logreg_loss_and_grad(weights, bias, X, y, lam)
    for _ in range(hyper["max_epochs"]):
        grad_inf = max(np.max(np.abs(grad_w)), abs(grad_b))
        if grad_inf < hyper["tol"]:
            break
        # Backtracking line search with the Armijo condition.
        step = 1.0
        sq = float(grad_w @ grad_w) + grad_b * grad_b
        for _ in range(60):
            w_new = weights - step * grad_w
            b_new = bias - step * grad_b
            loss_new, gw_new, gb_new = logreg_loss_and_grad(w_new, b_new, X, y, lam)
            if loss_new <= loss - 1e-4 * step * sq:
                break
            step *= 0.5
        weights, bias = w_new, b_new
        loss, grad_w, grad_b = loss_new, gw_new, gb_new
    return weights, bias


def hinge_objective(weights, bias, X, y, lam) -> float:
    """Regularized mean hinge loss (labels 0/1 mapped to -1/+1)."""
    signs = 2.0 * np.asarray(y, dtype=np.float64) - 1.0
    margins = signs * _margins(weights, bias, X)
    hinge = np.clip(1.0 - margins, 0.0, None)
    return float(np.mean(hinge)) + 0.5 * lam * float(weights @ weights)


def _iter_rows(X):
    """Row views as (indices, values) pairs, uniform for dense and sparse."""
    if sparse.issparse(X):
        X = X.tocsr()
        for i in range(X.shape[0]):
            start, stop = X.indptr[i], X.indptr[i + 1]
            yield X.indices[start:stop], X.data[start:stop]
    else:
        cols = np.arange(X.shape[1])
        for i in range(X.shape[0]):
            yield cols, X[i]


def _train_linear_svm(X, y, hyper, seed):
    n, d = X.shape
    lam = hyper["lam"]
    rng = np.random.default_rng(seed)
    signs = 2.0 * np.asarray(y, dtype=np.float64) - 1.0
    rows = list(_iter_rows(X))
    weights = np.zeros(d)
    bias = 0.0
    t = 0
    for _ in range(hyper["epochs"]):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            cols, vals = rows[i]
            margin = signs[i] * (float(weights[cols] @ vals) + bias)
            weights *= 1.0 - eta * lam
            if margin < 1.0:
                weights[cols] += eta * signs[i] * vals
                bias += eta * signs[i]
    return weights, bias


def _train_sgd_logistic(X, y, hyper, seed):
    n, d = X.shape
    lam = hyper["lam"]
    eta0 = hyper["eta0"]
    rng = np.random.default_rng(seed)
    rows = list(_iter_rows(X))
    y = np.asarray(y, dtype=np.float64)
    weights = np.zeros(d)
    bias = 0.0
    t = 0
    for _ in range(hyper["epochs"]):
        for i in rng.permutation(n):
            t += 1
            eta = eta0 / (1.0 + eta0 * lam * t)
            cols, vals = rows[i]
            z = float(weights[cols] @ vals) + bias
            p = 1.0 / (1.0 + math.exp(-z)) if z >= 0 else math.exp(z) / (1.0 + math.exp(z))
            g = p - y[i]
            weights *= 1.0 - eta * lam
            weights[cols] -= eta * g * vals
            bias -= eta * g
    return weights, bias


def train(kind: str, X, y, hyper: dict | None = None, seed: int = 0) -> TrainedClassifier:
    """Fit one classifier. Non-dummy kinds require both classes present."""
    if kind not in KINDS:
        raise ValidationError(f"unknown classifier kind {kind!r}")
    X = _check_features(X)
    y = _as_label_array(y)
    if X.shape[0] != len(y):
        raise ValidationError(
            f"X has {X.shape[0]} rows but y has {len(y)} labels"
        )
    merged = dict(DEFAULT_HYPER[kind])
    merged.update(hyper or {})
    if merged.get("lam", 0) is None:
        merged["lam"] = 1.0 / len(y)
    classes = np.unique(y)
    if kind != "dummy_stratified" and len(classes) < 2:
        raise ValidationError(f"{kind} requires both classes in the training data")
    clf = TrainedClassifier(kind=kind, seed=seed, hyper=merged)
    if kind == "logreg_l2":
        clf.weights, clf.bias = _train_logreg(X, y, merged, seed)
    elif kind == "linear_svm":
        clf.weights, clf.bias = _train_linear_svm(X, y, merged, seed)
    elif kind == "sgd_logistic":
        clf.weights, clf.bias = _train_sgd_logistic(X, y, merged, seed)
    elif kind == "nearest_centroid":
        dense = X.toarray() if sparse.issparse(X) else X
        clf.centroids = np.vstack(
            [dense[y == 0].mean(axis=0), dense[y == 1].mean(axis=0)]
        )
    elif kind == "dummy_stratified":
        clf.class_prior = float(y.mean())
    return clf


def decision_value(clf: TrainedClassifier, X) -> np.ndarray:
    """Margin-like score per row: label 1 territory is positive.

    Linear kinds return w.x + b. Nearest centroid returns
    dist(class 0) - dist(class 1), so ties land exactly at 0 and resolve to
    class 0. The dummy returns its class prior (no per-row signal).
    """
    X = _check_features(X)
    if clf.kind in _LINEAR_KINDS:
        if X.shape[1] != clf.weights.shape[0]:
            raise ValidationError(
                f"feature dimension {X.shape[1]} does not match "
                f"training dimension {clf.weights.shape[0]}"
            )
        return _margins(clf.weights, clf.bias, X)
    if clf.kind == "nearest_centroid":
        dense = X.toarray() if sparse.issparse(X) else X
        if dense.shape[1] != clf.centroids.shape[1]:
            raise ValidationError(
                f"feature dimension {dense.shape[1]} does not match "
                f"training dimension {clf.centroids.shape[1]}"
            )
        d0 = np.linalg.norm(dense - clf.centroids[0], axis=1)
        d1 = np.linalg.norm(dense - clf.centroids[1], axis=1)
        return d0 - d1
    return np.full(X.shape[0], clf.class_prior)


def predict(clf: TrainedClassifier, X) -> np.ndarray:
    """Predicted labels. Linear kinds: 1 iff margin >= 0. Nearest centroid
    breaks ties toward class 0. The dummy draws from its recorded prior,
    reseeded per call so predictions are reproducible."""
    X = _check_features(X)
    if clf.kind == "dummy_stratified":
        rng = np.random.default_rng(clf.seed)
        return (rng.random(X.shape[0]) < clf.class_prior).astype(np.int64)
    values = decision_value(clf, X)
    if clf.kind == "nearest_centroid":
        return (values > 0).astype(np.int64)
    return (values >= 0).astype(np.int64)


def predict_proba(clf: TrainedClassifier, X) -> np.ndarray:
    """P(label == 1) for the logistic kinds."""
    if clf.kind not in ("logreg_l2", "sgd_logistic"):
        raise ValidationError(f"{clf.kind} does not expose probabilities")
    return _sigmoid(decision_value(clf, X))


def evaluate_classifier(pred, truth) -> EvalMetrics:
    """Accuracy plus support-weighted precision/recall/F1.

    Per-class scores with a zero denominator are defined as 0.
    """
    pred = _as_label_array(pred)
    truth = _as_label_array(truth)
    if len(pred) != len(truth):
        raise ValidationError(
            f"prediction and truth lengths differ: {len(pred)} vs {len(truth)}"
        )
    confusion = [[0, 0], [0, 0]]
    for t, p in zip(truth, pred):
        confusion[t][p] += 1
    total = len(truth)
    accuracy = (confusion[0][0] + confusion[1][1]) / total
    weighted_p = weighted_r = weighted_f1 = 0.0
    for c in (0, 1):
        support = confusion[c][0] + confusion[c][1]
        predicted = confusion[0][c] + confusion[1][c]
        tp = confusion[c][c]
        precision = tp / predicted if predicted else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        weight = support / total
        weighted_p += weight * precision
        weighted_r += weight * recall
        weighted_f1 += weight * f1
    return EvalMetrics(
        accuracy=accuracy,
        weighted_precision=weighted_p,
        weighted_recall=weighted_r,
        weighted_f1=weighted_f1,
        confusion=(tuple(confusion[0]), tuple(confusion[1])),
    )


@dataclass(frozen=True)
class FeatureConfig:
    """One cell of the feature grid: optional standardization and PCA."""

    scale: bool = False
    pca_k: int | None = None

    def sort_key(self):
        # Tie-break: smaller PCA k first; no PCA counts as full dimension.
        return self.pca_k if self.pca_k is not None else math.inf


def _transform_cell(fc: FeatureConfig, X_train, X_eval):
    from .features import apply_scaler, fit_pca, fit_scaler, project

    if not fc.scale and fc.pca_k is None:
        return X_train, X_eval
    train = X_train.toarray() if sparse.issparse(X_train) else np.asarray(X_train, dtype=np.float64)
    ev = X_eval.toarray() if sparse.issparse(X_eval) else np.asarray(X_eval, dtype=np.float64)
    if fc.scale:
        scaler = fit_scaler(train)
        train = apply_scaler(scaler, train)
        ev = apply_scaler(scaler, ev)
    if fc.pca_k is not None:
        basis = fit_pca(train, fc.pca_k)
        train = project(basis, train)
        ev = project(basis, ev)
    return train, ev


def grid_search(
    kinds,
    feature_configs,
    X,
    y,
    *,
    k: int = 10,
    test_fraction: float = 0.2,
    seed: int = 0,
    hyper: dict | None = None,
) -> dict[str, CvReport]:
    """Select the best feature config per classifier kind by k-fold CV.

    Selection is by mean fold weighted F1; ties break toward the smaller
    PCA k, then grid order. The winner is refit on the full train split and
    scored once on the held-out test split. Scaler and PCA are refit inside
    each fold on the fold-train portion only.
    """
    feature_configs = list(feature_configs)
    if not feature_configs:
        raise ValidationError("feature grid must be non-empty")
    X = _check_features(X)
    y = _as_label_array(y)
    train_idx, test_idx = stratified_split(y, test_fraction, seed)
    y_train, y_test = y[train_idx], y[test_idx]
    X_train, X_test = X[train_idx], X[test_idx]
    folds = stratified_kfold(y_train, k, seed)
    results: dict[str, CvReport] = {}
    for kind in kinds:
        best = None
        for order, fc in enumerate(feature_configs):
            fold_metrics = []
            for fold_train, fold_val in folds:
                Xt, Xv = _transform_cell(fc, X_train[fold_train], X_train[fold_val])
                clf = train(kind, Xt, y_train[fold_train], hyper, seed)
                fold_metrics.append(
                    evaluate_classifier(predict(clf, Xv), y_train[fold_val])
                )
            mean_f1 = sum(m.weighted_f1 for m in fold_metrics) / len(fold_metrics)
            candidate = (-mean_f1, fc.sort_key(), order, fc, fold_metrics)
            if best is None or candidate[:3] < best[:3]:
                best = candidate
        _, _, _, fc, fold_metrics = best
        Xt, Xe = _transform_cell(fc, X_train, X_test)
        final = train(kind, Xt, y_train, hyper, seed)
        test_metrics = evaluate_classifier(predict(final, Xe), y_test)
        results[kind] = CvReport(
            per_fold=fold_metrics,
            test=test_metrics,
            config={
                "kind": kind,
                "hyper": dict(final.hyper),
                "feature_config": {"scale": fc.scale, "pca_k": fc.pca_k},
                "cv_folds": k,
                "test_fraction": test_fraction,
                "seed": seed,
            },
        )
    return results


def save_classifier(clf: TrainedClassifier, path) -> None:
    """Persist a trained classifier (and its feature pipeline) as JSON."""
    payload: dict = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": clf.kind,
        "seed": clf.seed,
        "hyper": clf.hyper,
        "bias": clf.bias,
    }
    if clf.weights is not None:
        payload["weights"] = clf.weights.tolist()
    if clf.centroids is not None:
        payload["centroids"] = clf.centroids.tolist()
    if clf.class_prior is not None:
        payload["class_prior"] = clf.class_prior
    if clf.feature_pipeline is not None:
        payload["pipeline"] = clf.feature_pipeline.to_dict()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True)


def load_classifier(path) -> TrainedClassifier:
    from .features import FeaturePipeline

    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValidationError(f"{path}: unsupported model format version {version!r}")
    if payload.get("kind") not in KINDS:
        raise ValidationError(f"{path}: unknown classifier kind {payload.get('kind')!r}")
    clf = TrainedClassifier(
        kind=payload["kind"],
        seed=int(payload["seed"]),
        hyper=dict(payload.get("hyper", {})),
        bias=float(payload.get("bias", 0.0)),
    )
    if "weights" in payload:
        clf.weights = np.array(payload["weights"], dtype=np.float64)
    if "centroids" in payload:
        clf.centroids = np.array(payload["centroids"], dtype=np.float64)
    if "class_prior" in payload:
        clf.class_prior = float(payload["class_prior"])
    if "pipeline" in payload:
        clf.feature_pipeline = FeaturePipeline.from_dict(payload["pipeline"])
    return clf
