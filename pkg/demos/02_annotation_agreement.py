"""Label import, inter-rater agreement, and consensus ground truth.

Run with: python demos/02_annotation_agreement.py
"""

from logsieve import annotation
from logsieve.synth import make_synthetic_corpus

import numpy as np

doc, truth = make_synthetic_corpus(n_lines=200, seed=3)

# Simulate two annotators who mostly agree with the ground truth but each
# misread a few lines.
rng = np.random.default_rng(3)
entries = {}
for key, value in truth.items():
    a = value if rng.random() > 0.05 else 1 - value
    b = value if rng.random() > 0.05 else 1 - value
    entries[key] = {"ann1": a, "ann2": b}
corpus = annotation.AnnotatedCorpus(entries=entries, annotator_ids=("ann1", "ann2"))

ordered = sorted(entries)
labels_a = [entries[k]["ann1"] for k in ordered]
labels_b = [entries[k]["ann2"] for k in ordered]

kappa = annotation.cohen_kappa(labels_a, labels_b)
agreement = sum(1 for x, y in zip(labels_a, labels_b) if x == y) / len(ordered)
print(f"lines: {len(ordered)}")
print(f"observed agreement: {agreement:.3f}")
print(f"cohen kappa:        {kappa:.3f}")

disagreements = corpus.disagreements()
print(f"disagreed lines:    {len(disagreements)}")

# Consensus meetings resolve exactly the disagreement set; here the ground
# truth plays the role of the third reviewer.
resolutions = {key: truth[key] for key in disagreements}
merged = annotation.merge_consensus(corpus, resolutions)
print("consensus complete:", len(merged.consensus) == len(entries))

matches = sum(1 for k in ordered if merged.consensus[k] == truth[k])
print(f"consensus vs truth: {matches}/{len(ordered)} lines agree")
