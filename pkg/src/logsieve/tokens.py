"""Deterministic token counting for reduction ratios and the cost model.

Two modes:

* ``heuristic`` needs no external assets: a token is a maximal run of
  letters/digits, and every non-whitespace punctuation character counts as
  one token.
* ``bpe`` loads a merges vocabulary (one merge pair per line, rank = line
  number) and counts subword symbols after applying the merges. Counting is
  a pure function of (config, text), so any figures meant to be compared
  against an externally tokenized baseline must use the matching vocabulary;
  reports record which mode produced their numbers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError

MODES = ("bpe", "heuristic")


@dataclass(frozen=True)
class TokenizerConfig:
    mode: str = "heuristic"
    vocab_path: str | None = None
    # Tokens charged per line for the line terminator. Whole-file token
    # counts depend on how a tokenizer treats newlines; the charge is
    # explicit so reports can record it.
    separator_tokens_per_line: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"tokenizer mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "bpe" and not self.vocab_path:
            raise ValidationError("bpe mode requires vocab_path")
        if self.separator_tokens_per_line < 0:
            raise ValidationError("separator_tokens_per_line must be >= 0")

    def describe(self) -> str:
        parts = [f"mode={self.mode}"]
        if self.vocab_path:
            parts.append(f"vocab={Path(self.vocab_path).name}")
        parts.append(f"separator_tokens_per_line={self.separator_tokens_per_line}")
        return " ".join(parts)


_MERGES_CACHE: dict[str, dict[tuple[str, str], int]] = {}


def load_merges(path) -> dict[tuple[str, str], int]:
    """Load a merges vocabulary into a pair -> rank map.

    Accepts the plain text format (one ``left right`` pair per line,
    ``#``-prefixed header lines skipped) or a JSON object with a ``merges``
    list of pairs.
    """
    text = Path(path).read_text(encoding="utf-8")
    ranks: dict[tuple[str, str], int] = {}
    stripped = text.lstrip()
    if stripped.startswith("{"):
        payload = json.loads(text)
        merges = payload.get("merges")
        if merges is None:
            raise ValidationError(f"{path}: JSON vocabulary missing 'merges' list")
        for rank, pair in enumerate(merges):
            if isinstance(pair, str):
                pair = pair.split()
            if len(pair) != 2:
                raise ValidationError(f"{path}: merge rule {rank} is not a pair")
            ranks.setdefault((pair[0], pair[1]), rank)
        return ranks
    rank = 0
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValidationError(f"{path}:{lineno}: merge rule must have two symbols")
        ranks.setdefault((parts[0], parts[1]), rank)
        rank += 1
    return ranks


def _ranks_for(cfg: TokenizerConfig) -> dict[tuple[str, str], int]:
    key = str(Path(cfg.vocab_path).resolve())
    if key not in _MERGES_CACHE:
        _MERGES_CACHE[key] = load_merges(cfg.vocab_path)
    return _MERGES_CACHE[key]


def _bpe_symbol_count(word: str, ranks: dict[tuple[str, str], int]) -> int:
    symbols = list(word)
    while len(symbols) >= 2:
        best_rank = None
        best_pair = None
        for a, b in zip(symbols, symbols[1:]):
            rank = ranks.get((a, b))
            if rank is not None and (best_rank is None or rank < best_rank):
                best_rank = rank
                best_pair = (a, b)
        if best_pair is None:
            break
        merged = []
        i = 0
        while i < len(symbols):
            if (
                i < len(symbols) - 1
                and symbols[i] == best_pair[0]
                and symbols[i + 1] == best_pair[1]
            ):
                merged.append(symbols[i] + symbols[i + 1])
                i += 2
            else:
                merged.append(symbols[i])
                i += 1
        symbols = merged
    return len(symbols)


def _heuristic_count(text: str) -> int:
    count = 0
    in_run = False
    for ch in text:
        if ch.isspace():
            in_run = False
        elif ch.isalnum():
            if not in_run:
                count += 1
                in_run = True
        else:
            count += 1
            in_run = False
    return count


def count_tokens(text: str, cfg: TokenizerConfig) -> int:
    """Count tokens in a piece of text under the given config."""
    if cfg.mode == "heuristic":
        return _heuristic_count(text)
    ranks = _ranks_for(cfg)
    return sum(_bpe_symbol_count(word, ranks) for word in text.split())


def count_document_tokens(doc, cfg: TokenizerConfig) -> tuple[list[int], int]:
    """Per-line and total token counts for a document.

    Each line is charged ``separator_tokens_per_line`` for its terminator on
    top of its content tokens, so the total is always the sum of the
    per-line counts.
    """
    per_line = [
        count_tokens(line.content, cfg) + cfg.separator_tokens_per_line
        for line in doc.lines
    ]
    return per_line, sum(per_line)
