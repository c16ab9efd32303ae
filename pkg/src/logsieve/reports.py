"""Report rendering: CSV tables (the machine contract) and markdown views.

Every report opens with a ``#``-prefixed header block naming the tool
version, config hash, tokenizer mode, and any baseline divergences, so a
report is traceable to the run that produced it. Reports never embed wall
clock time: rerunning a command on unchanged inputs yields identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json

from . import __version__
from .classify import CvReport, round_half_up
from .errors import ValidationError

TEMPLATE_BASELINE_NOTE = (
    "template baseline: greedy fixed-depth template clustering; a"
    " structure-first stand-in, not a reimplementation of any specific"
    " compression tool"
)


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, ensure_ascii=False, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def header_block(config: dict, *, tokenizer: str | None = None, notes=()) -> list[str]:
    lines = [
        f"# logsieve {__version__}",
        f"# config_hash={config_hash(config)}",
    ]
    if tokenizer:
        lines.append(f"# tokenizer: {tokenizer}")
    for note in notes:
        lines.append(f"# {note}")
    return lines


def _fmt(value) -> str:
    """Full-precision, round-trippable cell rendering."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header_lines, columns, rows) -> None:
    buffer = io.StringIO()
    for line in header_lines:
        buffer.write(line + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buffer.getvalue())


def read_csv(path):
    """Read back a report CSV, skipping the header block."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [
            line for line in fh.read().split("\n") if line and not line.startswith("#")
        ]
    reader = csv.reader(rows)
    columns = next(reader)
    return columns, [dict(zip(columns, row)) for row in reader]


REDUCTION_COLUMNS = (
    "repo",
    "run_id",
    "strategy",
    "total_lines",
    "removed_lines",
    "lines_kept",
    "line_red_pct",
    "line_red",
    "full_tokens",
    "tokens_kept",
    "token_red_pct",
    "token_red",
)


def reduction_rows(entries):
    """Rows for the per-run reduction table plus a macro-averaged Average row.

    ``entries`` is a list of (repo, run_id, strategy, ReductionResult).
    Percent columns appear twice: full precision and integer display.
    """
    from .reduce import display_percent

    rows = []
    for repo, run_id, strategy, result in entries:
        rows.append(
            (
                repo,
                run_id,
                strategy,
                result.total_lines,
                result.removed_lines,
                result.lines_kept,
                result.line_red,
                display_percent(result.line_red),
                result.full_tokens,
                result.tokens_kept,
                result.token_red,
                display_percent(result.token_red),
            )
        )
    if rows:
        n = len(rows)
        mean = lambda idx: sum(r[idx] for r in rows) / n
        rows.append(
            (
                "Average",
                "",
                "",
                round_half_up(mean(3)),
                round_half_up(mean(4)),
                round_half_up(mean(5)),
                mean(6),
                display_percent(mean(6)),
                round_half_up(mean(8)),
                round_half_up(mean(9)),
                mean(10),
                display_percent(mean(10)),
            )
        )
    return rows


SIMILARITY_COLUMNS = (
    "repo",
    "run_id",
    "strategy",
    "cosine",
    "bert_f1",
    "rouge1_f1",
    "rougel_f1",
    "bleu",
    "judge_score",
    "exact_match",
)


def similarity_rows(entries):
    """Rows for the response-fidelity table plus Min/Mean/Median/Max summary
    rows and the exact-match Total row.

    ``entries`` is a list of (repo, run_id, strategy, SimilarityReport).
    Summary cells for optional metrics are computed over present values
    only and left blank when no row carries the metric.
    """
    rows = []
    for repo, run_id, strategy, report in entries:
        rows.append(
            (
                repo,
                run_id,
                strategy,
                report.cosine,
                report.bert_judge_f1,
                report.rouge1_f1,
                report.rougel_f1,
                report.bleu,
                report.judge_score,
                report.exact_match,
            )
        )
    if not rows:
        return rows
    metric_cols = range(3, 10)

    def summarize(label, fn):
        out = [label, "", ""]
        for col in metric_cols:
            values = [r[col] for r in rows if r[col] is not None]
            out.append(fn(values) if values else None)
        return tuple(out)

    def median(values):
        ordered = sorted(values)
        mid = len(ordered) // 2
        if len(ordered) % 2:
            return ordered[mid]
        return (ordered[mid - 1] + ordered[mid]) / 2

    matches = sum(r[9] for r in rows)
    total = len(rows)
    summary = [
        summarize("Min", min),
        summarize("Mean", lambda v: sum(v) / len(v)),
        summarize("Median", median),
        summarize("Max", max),
    ]
    # The exact-match column summarizes as a single Total tally instead.
    summary = [row[:9] + (None,) for row in summary]
    pct = round_half_up(matches * 100.0 / total)
    total_row = ("Total", "", "", None, None, None, None, None, None, f"{matches} / {total} ({pct}%)")
    return rows + summary + [total_row]


CV_COLUMNS = ("row", "accuracy", "f1_weighted", "precision_weighted", "recall_weighted")


def cv_rows(report: CvReport):
    rows = []
    for i, metrics in enumerate(report.per_fold, start=1):
        rows.append(
            (
                f"fold_{i}",
                metrics.accuracy,
                metrics.weighted_f1,
                metrics.weighted_precision,
                metrics.weighted_recall,
            )
        )
    rows.append(
        (
            "test",
            report.test.accuracy,
            report.test.weighted_f1,
            report.test.weighted_precision,
            report.test.weighted_recall,
        )
    )
    return rows


COMPARISON_COLUMNS = (
    "embedding",
    "model",
    "accuracy",
    "f1_weighted",
    "precision_weighted",
    "recall_weighted",
)


def comparison_rows(results: dict):
    """One row per (embedding, model), scored on the held-out test split."""
    rows = []
    for (embedding, kind), report in sorted(results.items()):
        rows.append(
            (
                embedding,
                kind,
                report.test.accuracy,
                report.test.weighted_f1,
                report.test.weighted_precision,
                report.test.weighted_recall,
            )
        )
    return rows


def _with_thousands(value: int) -> str:
    return f"{value:,}"


def resource_summary(reduction_entries):
    """Aggregate a reduction table into the resource-summary rows.

    Absolute columns are means of per-run counts; the delta column is the
    macro-average of per-run percentage reductions (the two aggregations
    answer different questions, so both are reported).
    """
    entries = list(reduction_entries)
    if not entries:
        raise ValidationError("resource summary needs at least one reduction row")
    n = len(entries)
    mean_lines_full = sum(r.total_lines for _, _, _, r in entries) / n
    mean_lines_kept = sum(r.lines_kept for _, _, _, r in entries) / n
    mean_tokens_full = sum(r.full_tokens for _, _, _, r in entries) / n
    mean_tokens_kept = sum(r.tokens_kept for _, _, _, r in entries) / n
    macro_line_red = sum(r.line_red for _, _, _, r in entries) / n
    macro_token_red = sum(r.token_red for _, _, _, r in entries) / n
    return [
        {
            "metric": "Mean input tokens / run",
            "full": round_half_up(mean_tokens_full),
            "reduced": round_half_up(mean_tokens_kept),
            "delta_pct": -round_half_up(macro_token_red),
        },
        {
            "metric": "Mean lines / run",
            "full": round_half_up(mean_lines_full),
            "reduced": round_half_up(mean_lines_kept),
            "delta_pct": -round_half_up(macro_line_red),
        },
    ]


def render_resource_markdown(summary_rows, cost_rows=None) -> str:
    lines = [
        "| Metric | Full | LogSieve | Δ (%) |",
        "| --- | ---: | ---: | ---: |",
    ]
    for row in summary_rows:
        lines.append(
            f"| {row['metric']} | {_with_thousands(row['full'])} | "
            f"{_with_thousands(row['reduced'])} | {row['delta_pct']}% |"
        )
    text = "\n".join(lines) + "\n"
    if cost_rows:
        cost_lines = [
            "",
            "| Metric | Full | LogSieve | Δ |",
            "| --- | ---: | ---: | ---: |",
        ]
        for row in cost_rows:
            cost_lines.append(
                f"| {row['metric']} | {row['full']} | {row['reduced']} | {row['delta']} |"
            )
        text += "\n".join(cost_lines) + "\n"
    return text
