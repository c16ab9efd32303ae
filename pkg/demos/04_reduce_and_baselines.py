"""Reduce a log three ways (relevance sieve, random control, template
clustering) and compare the reduction accounting.

Run with: python demos/04_reduce_and_baselines.py
"""

import numpy as np

from logsieve import classify, features, reduce
from logsieve.synth import make_synthetic_corpus
from logsieve.tokens import TokenizerConfig

doc, labels = make_synthetic_corpus(n_lines=1000, seed=21, relevant_fraction=0.45)
cfg = TokenizerConfig()  # heuristic mode: no external vocabulary needed

# Sieve with a trained classifier (fit on the same corpus here to keep the
# demo self-contained).
y = np.array([labels[key] for key in doc.line_keys()])
pipeline = features.fit_feature_pipeline([doc], min_df=2)
clf = classify.train("logreg_l2", pipeline.transform_document(doc), y, seed=0)

sieved = reduce.sieve(doc, clf, pipeline)
sieve_result = reduce.reduction_metrics(doc, sieved, cfg)

# Oracle sieve: ground-truth labels as a perfect classifier (upper bound).
oracle = reduce.oracle_sieve(doc, labels)
oracle_result = reduce.reduction_metrics(doc, oracle, cfg)

# Random control at the same average removal rate.
randomized = reduce.random_baseline(doc, target_ratio=0.42, seed=0)
random_result = reduce.reduction_metrics(doc, randomized, cfg)

# Structure-first control: one exemplar per template cluster.
templated, tree = reduce.template_baseline(doc, depth=4, threshold=0.4)
template_result = reduce.reduction_metrics(doc, templated, cfg)
print(f"template clusters found: {len(tree.templates)}")

print(f"\n{'strategy':<16} {'lines kept':>10} {'line red':>9} {'token red':>10}")
for name, result in [
    ("sieve", sieve_result),
    ("sieve (oracle)", oracle_result),
    ("random", random_result),
    ("template", template_result),
]:
    print(
        f"{name:<16} {result.lines_kept:>10} "
        f"{reduce.display_percent(result.line_red):>9} "
        f"{reduce.display_percent(result.token_red):>10}"
    )

# Reduction never reorders: the reduced text is a subsequence of the log.
text = reduce.reduced_text(doc, sieved)
print("\nfirst kept lines:")
for line in text.split("\n")[:3]:
    print("  ", line)

# Template reduction is idempotent: reducing its own output removes nothing.
from logsieve.corpus import LogDocument, LogLine

renumbered = LogDocument(
    repo=doc.repo,
    run_id=doc.run_id,
    conclusion=doc.conclusion,
    lines=tuple(
        LogLine(index=i, timestamp=line.timestamp, content=line.content, raw=line.raw)
        for i, line in enumerate(doc.lines[j] for j in templated.kept_indices)
    ),
)
again, _ = reduce.template_baseline(renumbered, depth=4, threshold=0.4)
print("\ntemplate idempotent:", len(again.kept_indices) == len(renumbered.lines))
