"""Log reduction strategies and reduction accounting.

Three strategies produce a ``ReducedLog`` (a kept subset of line indices,
original order preserved):

* ``sieve``    -- keep lines a relevance classifier predicts as relevant;
* ``random``   -- remove a seeded uniform sample at a target ratio;
* ``template`` -- structure-first control: cluster lines into templates
  with a fixed-depth prefix tree and keep one exemplar per template.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classify import predict, round_half_up
from .errors import ValidationError
from .tokens import TokenizerConfig, count_document_tokens

STRATEGIES = ("sieve", "random", "template")

WILDCARD = "<*>"

# Substituted for the log body when a reduction keeps nothing, so prompt
# construction never sends empty input.
EMPTY_SENTINEL = "(no lines retained)"


@dataclass(frozen=True)
class ReducedLog:
    repo: str
    run_id: str
    kept_indices: tuple[int, ...]
    strategy: str
    strategy_config: dict

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValidationError(f"strategy must be one of {STRATEGIES}")
        if list(self.kept_indices) != sorted(set(self.kept_indices)):
            raise ValidationError("kept_indices must be sorted and unique")

    @property
    def is_empty(self) -> bool:
        return not self.kept_indices


@dataclass(frozen=True)
class ReductionResult:
    total_lines: int
    removed_lines: int
    lines_kept: int
    line_red: float  # percent of lines removed
    full_tokens: int
    tokens_kept: int
    token_red: float  # percent of tokens removed

    @property
    def removed_tokens(self) -> int:
        return self.full_tokens - self.tokens_kept

    @classmethod
    def from_totals(cls, total_lines, removed_lines, full_tokens, removed_tokens):
        """Build a result from raw counts; percentages are exact ratios."""
        if removed_lines > total_lines or removed_tokens > full_tokens:
            raise ValidationError("removed counts cannot exceed totals")
        line_red = removed_lines * 100.0 / total_lines if total_lines else 0.0
        token_red = removed_tokens * 100.0 / full_tokens if full_tokens else 0.0
        return cls(
            total_lines=total_lines,
            removed_lines=removed_lines,
            lines_kept=total_lines - removed_lines,
            line_red=line_red,
            full_tokens=full_tokens,
            tokens_kept=full_tokens - removed_tokens,
            token_red=token_red,
        )


def display_percent(value: float) -> str:
    """Integer-percent rendering used in reduction tables, e.g. '85%'."""
    return f"{round_half_up(value)}%"


def _check_derived(doc, reduced: ReducedLog):
    if (doc.repo, doc.run_id) != (reduced.repo, reduced.run_id):
        raise ValidationError(
            f"reduced log {reduced.repo}/{reduced.run_id} does not belong to "
            f"document {doc.repo}/{doc.run_id}"
        )
    n = len(doc.lines)
    if reduced.kept_indices and (
        reduced.kept_indices[0] < 0 or reduced.kept_indices[-1] >= n
    ):
        raise ValidationError("kept_indices fall outside the document")


def sieve(doc, clf, pipeline) -> ReducedLog:
    """Keep the lines the classifier predicts as relevant."""
    X = pipeline.transform_document(doc)
    labels = predict(clf, X)
    kept = tuple(int(i) for i in np.flatnonzero(labels == 1))
    if not kept:
        warnings.warn(
            f"sieve kept no lines of {doc.repo} run {doc.run_id}; downstream "
            f"prompts will use the sentinel body",
            stacklevel=2,
        )
    return ReducedLog(
        repo=doc.repo,
        run_id=doc.run_id,
        kept_indices=kept,
        strategy="sieve",
        strategy_config={"classifier": clf.kind, "seed": clf.seed},
    )


def oracle_sieve(doc, labels) -> ReducedLog:
    """Sieve using ground-truth labels as a perfect classifier.

    ``labels`` maps (repo, run_id, line_index) to 0/1 and must cover every
    line of the document.
    """
    kept = []
    for key in doc.line_keys():
        if key not in labels:
            raise ValidationError(f"no label for line {key}")
        if labels[key] == 1:
            kept.append(key[2])
    if not kept:
        warnings.warn(
            f"oracle sieve kept no lines of {doc.repo} run {doc.run_id}",
            stacklevel=2,
        )
    return ReducedLog(
        repo=doc.repo,
        run_id=doc.run_id,
        kept_indices=tuple(kept),
        strategy="sieve",
        strategy_config={"classifier": "oracle-labels"},
    )


def reduction_metrics(doc, reduced: ReducedLog, cfg: TokenizerConfig) -> ReductionResult:
    """Line and token reduction percentages for one reduced document."""
    _check_derived(doc, reduced)
    per_line, full_tokens = count_document_tokens(doc, cfg)
    kept_set = set(reduced.kept_indices)
    tokens_kept = sum(per_line[i] for i in reduced.kept_indices)
    removed_lines = len(doc.lines) - len(kept_set)
    return ReductionResult.from_totals(
        total_lines=len(doc.lines),
        removed_lines=removed_lines,
        full_tokens=full_tokens,
        removed_tokens=full_tokens - tokens_kept,
    )


def removal_count(total: int, target_ratio: float) -> int:
    """Lines to remove at a target ratio: round(total * ratio), half up."""
    if not 0.0 <= target_ratio <= 1.0:
        raise ValidationError("target_ratio must be within [0, 1]")
    return round_half_up(total * target_ratio)


def random_baseline(doc, target_ratio: float = 0.42, seed: int = 0, *, match_removed: int | None = None) -> ReducedLog:
    """Remove a seeded uniform sample of lines.

    By default removes round(total * target_ratio) lines. Passing
    ``match_removed`` instead removes exactly that many, for controlled
    comparisons that match another strategy's per-document removal count.
    """
    n = len(doc.lines)
    if match_removed is not None:
        if not 0 <= match_removed <= n:
            raise ValidationError(f"match_removed must be within [0, {n}]")
        n_remove = match_removed
        config = {"match_removed": match_removed, "seed": seed}
    else:
        n_remove = removal_count(n, target_ratio)
        config = {"target_ratio": target_ratio, "seed": seed}
    rng = np.random.default_rng(seed)
    removed = set(rng.choice(n, size=n_remove, replace=False).tolist())
    kept = tuple(i for i in range(n) if i not in removed)
    return ReducedLog(
        repo=doc.repo,
        run_id=doc.run_id,
        kept_indices=kept,
        strategy="random",
        strategy_config=config,
    )


@dataclass
class _Template:
    tokens: list[str]
    first_index: int
    size: int = 1


@dataclass
class TemplateTree:
    """Fixed-depth prefix tree for template clustering.

    Lines route by token count, then by up to (depth - 2) leading tokens
    with digit-bearing tokens wildcarded; inside a leaf a line joins the
    first template whose positional match ratio reaches the threshold
    (wildcard slots always match), otherwise it founds a new template.
    Mismatched slots generalize to wildcards on join.
    """

    depth: int
    similarity_threshold: float
    root: dict = field(default_factory=dict)
    templates: list[_Template] = field(default_factory=list)

    def __post_init__(self):
        if self.depth < 1:
            raise ValidationError("depth must be at least 1")
        if not 0.0 < self.similarity_threshold <= 1.0:
            raise ValidationError("similarity_threshold must be in (0, 1]")

    def _leaf_for(self, tokens: list[str]) -> list[_Template]:
        node = self.root.setdefault(len(tokens), {})
        levels = max(self.depth - 2, 0)
        for i in range(min(levels, len(tokens))):
            tok = tokens[i]
            key = WILDCARD if any(ch.isdigit() for ch in tok) else tok
            node = node.setdefault(key, {})
        return node.setdefault(None, [])

    @staticmethod
    def _match_ratio(template: list[str], tokens: list[str]) -> float:
        if not tokens:
            return 1.0
        matches = sum(
            1 for a, b in zip(template, tokens) if a == b or a == WILDCARD
        )
        return matches / len(tokens)

    def add(self, index: int, text: str) -> bool:
        """Route one line; returns True if it founded a new template."""
        tokens = text.split()
        leaf = self._leaf_for(tokens)
        for template in leaf:
            if self._match_ratio(template.tokens, tokens) >= self.similarity_threshold:
                template.tokens = [
                    a if a == b else WILDCARD
                    for a, b in zip(template.tokens, tokens)
                ]
                template.size += 1
                return False
        template = _Template(tokens=list(tokens), first_index=index)
        leaf.append(template)
        self.templates.append(template)
        return True


def template_baseline(doc, depth: int = 4, threshold: float = 0.4) -> tuple[ReducedLog, TemplateTree]:
    """Structure-first reduction: keep the first line of each template
    cluster. Greedy single-pass clustering; no cross-document state."""
    tree = TemplateTree(depth=depth, similarity_threshold=threshold)
    kept = []
    for line in doc.lines:
        if tree.add(line.index, line.content):
            kept.append(line.index)
    reduced = ReducedLog(
        repo=doc.repo,
        run_id=doc.run_id,
        kept_indices=tuple(kept),
        strategy="template",
        strategy_config={"depth": depth, "threshold": threshold},
    )
    return reduced, tree


def reduced_text(doc, reduced: ReducedLog) -> str:
    """The reduced log body: kept line contents in original order.

    Empty reductions yield the sentinel body instead of an empty string.
    """
    _check_derived(doc, reduced)
    if reduced.is_empty:
        return EMPTY_SENTINEL
    return "\n".join(doc.lines[i].content for i in reduced.kept_indices)


def document_stem(repo: str, run_id: str) -> str:
    return f"{repo.replace('/', '__')}__{run_id}"


def write_reduced(doc, reduced: ReducedLog, result: ReductionResult, out_dir) -> tuple[Path, Path]:
    """Export a reduced log as plain text plus a JSON sidecar manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{document_stem(doc.repo, doc.run_id)}.{reduced.strategy}"
    text_path = out_dir / f"{stem}.txt"
    manifest_path = out_dir / f"{stem}.json"
    text_path.write_text(reduced_text(doc, reduced) + "\n", encoding="utf-8")
    manifest = {
        "repo": doc.repo,
        "run_id": doc.run_id,
        "strategy": reduced.strategy,
        "config": reduced.strategy_config,
        "kept_indices": list(reduced.kept_indices),
        "empty": reduced.is_empty,
        "metrics": {
            "total_lines": result.total_lines,
            "removed_lines": result.removed_lines,
            "lines_kept": result.lines_kept,
            "line_red": result.line_red,
            "full_tokens": result.full_tokens,
            "tokens_kept": result.tokens_kept,
            "token_red": result.token_red,
        },
    }
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")
    return text_path, manifest_path


def read_manifest(path) -> ReducedLog:
    """Rebuild a ReducedLog from its sidecar manifest."""
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    return ReducedLog(
        repo=manifest["repo"],
        run_id=manifest["run_id"],
        kept_indices=tuple(manifest["kept_indices"]),
        strategy=manifest["strategy"],
        strategy_config=dict(manifest["config"]),
    )
