"""Per-line relevance labels: import, consensus merge, inter-rater agreement.

Labels are binary: 1 = relevant to root-cause analysis, 0 = irrelevant.
The label CSV schema is ``repo,run_id,line_index,annotator,label`` with a
header row; consensus exports add a ``consensus`` column.
"""

from __future__ import annotations

import csv
import warnings
from collections import Counter
from dataclasses import dataclass, field

from .errors import ValidationError

RELEVANT = 1
IRRELEVANT = 0

_REQUIRED_COLUMNS = ("repo", "run_id", "line_index", "annotator", "label")

LineKey = tuple[str, str, int]


@dataclass(frozen=True)
class AnnotatedCorpus:
    """Per-annotator labels keyed by (repo, run_id, line_index).

    ``consensus`` is all-or-nothing: either every entry has a consensus
    label or none does.
    """

    entries: dict[LineKey, dict[str, int]]
    annotator_ids: tuple[str, ...]
    consensus: dict[LineKey, int] | None = field(default=None)

    def __post_init__(self):
        if self.consensus is not None and set(self.consensus) != set(self.entries):
            raise ValidationError(
                "consensus must cover all entries or be absent entirely"
            )

    def __len__(self) -> int:
        return len(self.entries)

    def labels_of(self, annotator: str) -> dict[LineKey, int]:
        if annotator not in self.annotator_ids:
            raise ValidationError(f"unknown annotator {annotator!r}")
        out = {}
        for key, labels in self.entries.items():
            if annotator in labels:
                out[key] = labels[annotator]
        return out

    def disagreements(self) -> list[LineKey]:
        """Keys where the annotators did not all give the same label."""
        out = []
        for key in sorted(self.entries):
            values = set(self.entries[key].values())
            if len(values) > 1:
                out.append(key)
        return out


def import_labels(path, corpus) -> AnnotatedCorpus:
    """Read a label CSV and join every row against the loaded corpus.

    Rows referencing lines that do not exist in the corpus are rejected
    with their CSV line numbers, as are duplicate (line, annotator) rows.
    A ``consensus`` column, when present, is read back as the ground truth
    (it must be consistent across the rows of each line).
    """
    known: set[LineKey] = set()
    for doc in corpus:
        known.update(doc.line_keys())

    entries: dict[LineKey, dict[str, int]] = {}
    consensus: dict[LineKey, int] = {}
    annotators: set[str] = set()
    dangling: list[int] = []
    duplicates: list[int] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in _REQUIRED_COLUMNS if c not in header]
        if missing:
            raise ValidationError(
                f"{path}: label CSV is missing columns {missing}; "
                f"expected {list(_REQUIRED_COLUMNS)}"
            )
        has_consensus = "consensus" in header
        for lineno, row in enumerate(reader, start=2):
            try:
                index = int(row["line_index"])
            except (TypeError, ValueError):
                raise ValidationError(
                    f"{path}:{lineno}: line_index must be an integer"
                ) from None
            if row["label"] not in ("0", "1"):
                raise ValidationError(
                    f"{path}:{lineno}: label must be 0 or 1, got {row['label']!r}"
                )
            key = (row["repo"], row["run_id"], index)
            if key not in known:
                dangling.append(lineno)
                continue
            annotator = row["annotator"]
            annotators.add(annotator)
            labels = entries.setdefault(key, {})
            if annotator in labels:
                duplicates.append(lineno)
                continue
            labels[annotator] = int(row["label"])
            if has_consensus:
                if row["consensus"] not in ("0", "1"):
                    raise ValidationError(
                        f"{path}:{lineno}: consensus must be 0 or 1"
                    )
                value = int(row["consensus"])
                if consensus.setdefault(key, value) != value:
                    raise ValidationError(
                        f"{path}:{lineno}: conflicting consensus labels for {key}"
                    )
    if dangling:
        shown = ", ".join(str(n) for n in dangling[:10])
        raise ValidationError(
            f"{path}: {len(dangling)} rows reference lines not present in the "
            f"corpus (CSV lines {shown}{'...' if len(dangling) > 10 else ''})"
        )
    if duplicates:
        shown = ", ".join(str(n) for n in duplicates[:10])
        raise ValidationError(
            f"{path}: duplicate (line, annotator) rows at CSV lines {shown}"
            f"{'...' if len(duplicates) > 10 else ''}"
        )
    return AnnotatedCorpus(
        entries=entries,
        annotator_ids=tuple(sorted(annotators)),
        consensus=consensus if consensus else None,
    )


def cohen_kappa(a, b) -> float:
    """Chance-corrected agreement between two label sequences.

    kappa = (p_o - p_e) / (1 - p_e) with p_e from the raters' marginal
    label distributions. When both raters are constant the chance term is
    ill-posed: equal constants return 1.0, unequal constants return the
    formula value 0.0; both cases emit a warning so callers can exclude
    them.
    """
    a = list(a)
    b = list(b)
    if len(a) != len(b):
        raise ValidationError(f"label sequences differ in length: {len(a)} vs {len(b)}")
    if not a:
        raise ValidationError("label sequences must be non-empty")
    n = len(a)
    observed = sum(1 for x, y in zip(a, b) if x == y) / n
    counts_a = Counter(a)
    counts_b = Counter(b)
    expected = sum(
        (counts_a[c] / n) * (counts_b[c] / n) for c in set(counts_a) | set(counts_b)
    )
    if len(counts_a) == 1 and len(counts_b) == 1:
        warnings.warn(
            "both annotators are constant; chance agreement is ill-posed",
            stacklevel=2,
        )
        if a[0] == b[0]:
            return 1.0
        return 0.0
    return (observed - expected) / (1.0 - expected)


def merge_consensus(corpus: AnnotatedCorpus, resolutions: dict[LineKey, int]) -> AnnotatedCorpus:
    """Produce the consensus ground truth from two annotators plus resolutions.

    ``resolutions`` must cover exactly the disagreement set: agreed lines
    take the agreed label, disagreed lines take the resolution label.
    """
    if len(corpus.annotator_ids) != 2:
        raise ValidationError(
            f"consensus merge needs exactly 2 annotators, got {len(corpus.annotator_ids)}"
        )
    first, second = corpus.annotator_ids
    incomplete = [
        key
        for key, labels in corpus.entries.items()
        if first not in labels or second not in labels
    ]
    if incomplete:
        raise ValidationError(
            f"{len(incomplete)} lines lack a label from one annotator; "
            f"consensus requires complete double annotation"
        )
    disagreement = set(corpus.disagreements())
    extra = sorted(set(resolutions) - disagreement)
    missing = sorted(disagreement - set(resolutions))
    if extra:
        raise ValidationError(
            f"resolutions supplied for {len(extra)} lines the annotators "
            f"already agree on, e.g. {extra[0]}"
        )
    if missing:
        raise ValidationError(
            f"resolutions missing for {len(missing)} disagreed lines, "
            f"e.g. {missing[0]}"
        )
    consensus = {}
    for key, labels in corpus.entries.items():
        if key in disagreement:
            value = resolutions[key]
            if value not in (0, 1):
                raise ValidationError(f"resolution for {key} must be 0 or 1")
            consensus[key] = value
        else:
            consensus[key] = labels[first]
    return AnnotatedCorpus(
        entries=corpus.entries,
        annotator_ids=corpus.annotator_ids,
        consensus=consensus,
    )


def consensus_vector(corpus: AnnotatedCorpus, documents) -> list[int]:
    """Consensus labels aligned with the concatenated document line order."""
    if corpus.consensus is None:
        raise ValidationError("corpus has no consensus labels; run merge_consensus")
    out = []
    for doc in documents:
        for key in doc.line_keys():
            if key not in corpus.consensus:
                raise ValidationError(f"no consensus label for line {key}")
            out.append(corpus.consensus[key])
    return out


def export_consensus_csv(corpus: AnnotatedCorpus, path) -> None:
    """Write the label CSV back out with a consensus column appended."""
    if corpus.consensus is None:
        raise ValidationError("corpus has no consensus labels to export")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(_REQUIRED_COLUMNS) + ["consensus"])
        for key in sorted(corpus.entries):
            repo, run_id, index = key
            for annotator in corpus.annotator_ids:
                if annotator in corpus.entries[key]:
                    writer.writerow(
                        [
                            repo,
                            run_id,
                            index,
                            annotator,
                            corpus.entries[key][annotator],
                            corpus.consensus[key],
                        ]
                    )
