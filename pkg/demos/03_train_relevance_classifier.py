"""Train the relevance classifiers under the split/CV protocol and compare
them side by side.

Run with: python demos/03_train_relevance_classifier.py
"""

import tempfile
from pathlib import Path

import numpy as np

from logsieve import classify, features, reports
from logsieve.synth import make_synthetic_corpus

doc, labels = make_synthetic_corpus(n_lines=2000, seed=9)
y = np.array([labels[key] for key in doc.line_keys()])
lines = [line.content for line in doc.lines]
print(f"corpus: {len(lines)} lines, {y.mean():.0%} relevant")

# Sparse lexical features; the protocol is a stratified 80/20 split with
# 10-fold CV inside the training side.
tfidf = features.fit_tfidf(lines, min_df=2)
X = features.transform_tfidf_many(tfidf, lines)
print(f"tf-idf vocabulary: {len(tfidf.vocabulary)} terms")

kinds = ["logreg_l2", "linear_svm", "sgd_logistic", "nearest_centroid", "dummy_stratified"]
results = classify.grid_search(kinds, [classify.FeatureConfig()], X, y, k=10, seed=7)

print(f"\n{'model':<18} {'mean fold F1':>12} {'test acc':>9} {'test F1':>8}")
for kind in kinds:
    report = results[kind]
    print(
        f"{kind:<18} {report.mean_fold_f1:>12.4f} "
        f"{report.test.accuracy:>9.4f} {report.test.weighted_f1:>8.4f}"
    )

# The comparison table export: one row per (embedding, model).
work = Path(tempfile.mkdtemp(prefix="logsieve-demo-"))
table = work / "model_comparison.csv"
reports.write_csv(
    table,
    reports.header_block({"seed": 7, "features": "tfidf"}),
    reports.COMPARISON_COLUMNS,
    reports.comparison_rows({("tfidf", kind): results[kind] for kind in kinds}),
)
print(f"\nwrote {table}")

# PCA grid search: dense embeddings usually want dimensionality reduction;
# grid candidates that score identically resolve to the smaller size.
dense = X.toarray()
grid = [classify.FeatureConfig(scale=True, pca_k=k) for k in (32, 64)]
tuned = classify.grid_search(["logreg_l2"], grid, dense, y, k=5, seed=7)
print("winning PCA size:", tuned["logreg_l2"].config["feature_config"]["pca_k"])
