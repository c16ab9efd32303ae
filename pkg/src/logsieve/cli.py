"""Batch command surface: ingest, train, reduce, eval, report, kappa.

Exit codes: 0 success, 2 input/IO error, 3 validation error, 4 external
service error. Every command honors --seed for its stochastic steps and is
idempotent on unchanged inputs (reports carry no wall-clock time). Output
directories are guarded by a lockfile so one process owns them at a time.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, annotation, classify, corpus, costmodel, evaluate, features, reduce as reduce_mod, reports
from .errors import LogSieveError, TransportError, ValidationError
from .tokens import TokenizerConfig

LOCKFILE_NAME = ".logsieve.lock"


@contextlib.contextmanager
def _own_output_dir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    lock = out / LOCKFILE_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ValidationError(
            f"{out} is owned by another run (lockfile {lock} exists; remove it "
            f"if that run is dead)"
        ) from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield out
    finally:
        lock.unlink(missing_ok=True)


def _write_run_config(out_dir: Path, command: str, config: dict) -> None:
    payload = {
        "command": command,
        "config": config,
        "config_hash": reports.config_hash(config),
        "tool_version": __version__,
    }
    with open(out_dir / "run_config.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")


def _repo_run_from_stem(stem: str) -> tuple[str, str]:
    parts = stem.split("__")
    if len(parts) == 3:
        return f"{parts[0]}/{parts[1]}", parts[2]
    return stem, "local"


def _tokenizer_from_args(args) -> TokenizerConfig:
    return TokenizerConfig(
        mode=args.tokenizer,
        vocab_path=args.vocab,
        separator_tokens_per_line=args.separator_tokens,
    )


def cmd_ingest(args) -> int:
    documents = []
    if args.from_dir:
        root = Path(args.from_dir)
        if not root.is_dir():
            raise FileNotFoundError(f"log directory not found: {root}")
        paths = sorted(p for p in root.iterdir() if p.suffix in (".log", ".txt"))
        if not paths:
            raise ValidationError(f"no .log or .txt files under {root}")
        for path in paths:
            repo, run_id = _repo_run_from_stem(path.stem)
            documents.append(
                corpus.load_local(path, repo=repo, run_id=run_id, conclusion=args.conclusion)
            )
    else:
        repo, run_id = args.from_github
        documents.append(
            corpus.fetch_run_logs(repo, run_id, conclusion=args.conclusion)
        )
    corpus.write_jsonl(documents, args.out)
    print(f"wrote {len(documents)} documents to {args.out}")
    return 0


def _ground_truth(labeled: annotation.AnnotatedCorpus) -> dict:
    """One label per line: consensus column, single annotator, or a
    disagreement-free pair."""
    if labeled.consensus is not None:
        return dict(labeled.consensus)
    if len(labeled.annotator_ids) == 1:
        return labeled.labels_of(labeled.annotator_ids[0])
    if len(labeled.annotator_ids) == 2:
        merged = annotation.merge_consensus(labeled, {})
        return dict(merged.consensus)
    raise ValidationError(
        "cannot derive ground truth: provide a consensus column or a label "
        "file with one annotator (or two in full agreement)"
    )


def _line_labels(documents, truth: dict):
    y = []
    for doc in documents:
        for key in doc.line_keys():
            if key not in truth:
                raise ValidationError(f"no label for line {key}")
            y.append(truth[key])
    return y


def cmd_train(args) -> int:
    documents = corpus.read_jsonl(args.corpus)
    labeled = annotation.import_labels(args.labels, documents)
    truth = _ground_truth(labeled)
    y = _line_labels(documents, truth)

    if args.features == "tfidf":
        source = "tfidf"
        tfidf = features.fit_tfidf(
            [line.content for doc in documents for line in doc.lines],
            min_df=args.min_df,
        )
        X = features.transform_tfidf_many(
            tfidf, [line.content for doc in documents for line in doc.lines]
        )
        embedding_table = None
    else:
        source = "embedding"
        embedding_table = features.load_embeddings(args.features)
        missing = embedding_table.coverage(documents)
        if missing:
            raise ValidationError(
                f"{args.features}: {len(missing)} corpus lines lack vectors, "
                f"e.g. {missing[0]}"
            )
        keys = [key for doc in documents for key in doc.line_keys()]
        X = embedding_table.matrix(keys)

    y = np.asarray(y)
    if args.balance:
        selected = classify.balance_indices(y, args.seed)
        X = X[selected]
        y = y[selected]

    if args.grid_pca:
        grid = [int(v) for v in args.grid_pca.split(",") if v]
        max_k = min(X.shape[0] - 1, X.shape[1])
        usable = [k for k in grid if 1 <= k <= max_k]
        if not usable:
            raise ValidationError(
                f"no grid value fits the data (max usable k is {max_k})"
            )
        configs = [classify.FeatureConfig(scale=args.scale, pca_k=k) for k in usable]
    else:
        configs = [classify.FeatureConfig(scale=args.scale, pca_k=None)]

    results = classify.grid_search(
        [args.model], configs, X, y, k=args.folds, seed=args.seed
    )
    report = results[args.model]

    with _own_output_dir(args.out_dir) as out_dir:
        winner = report.config["feature_config"]
        pipeline = features.fit_feature_pipeline(
            documents,
            source=source,
            min_df=args.min_df,
            scale=winner["scale"],
            pca_k=winner["pca_k"],
            embedding_path=None if source == "tfidf" else args.features,
            embeddings=embedding_table,
        )
        X_full = (
            pipeline.transform_lines(
                [line.content for doc in documents for line in doc.lines]
            )
            if source == "tfidf"
            else pipeline.transform_keys(
                [key for doc in documents for key in doc.line_keys()]
            )
        )
        if args.balance:
            X_full = X_full[selected]
        final = classify.train(args.model, X_full, y, seed=args.seed)
        final.feature_pipeline = pipeline
        classify.save_classifier(final, out_dir / "model.json")

        config = {
            "corpus": str(args.corpus),
            "labels": str(args.labels),
            "features": args.features,
            "model": args.model,
            "balance": bool(args.balance),
            "seed": args.seed,
            "folds": args.folds,
            "grid_pca": args.grid_pca,
            "scale": args.scale,
            "min_df": args.min_df,
            "winning_config": winner,
            "hyper": report.config["hyper"],
        }
        header = reports.header_block(
            config,
            notes=[
                "fold rows score the winning config on the 80% train split; "
                "the test row scores the refit model on the held-out 20%"
            ],
        )
        reports.write_csv(
            out_dir / "cv_report.csv", header, reports.CV_COLUMNS, reports.cv_rows(report)
        )
        _write_run_config(out_dir, "train", config)
    fold_f1 = report.mean_fold_f1
    print(
        f"trained {args.model}: mean fold F1 {fold_f1:.4f}, "
        f"test accuracy {report.test.accuracy:.4f} -> {args.out_dir}"
    )
    return 0


def cmd_reduce(args) -> int:
    documents = corpus.read_jsonl(args.corpus)
    cfg = _tokenizer_from_args(args)
    notes = [f"strategy: {args.strategy}"]
    entries = []

    if args.strategy == "sieve":
        if args.oracle_labels:
            labeled = annotation.import_labels(args.oracle_labels, documents)
            truth = _ground_truth(labeled)
            make = lambda doc: reduce_mod.oracle_sieve(doc, truth)
            notes.append("sieve classifier: oracle labels")
        elif args.model:
            clf = classify.load_classifier(args.model)
            if clf.feature_pipeline is None:
                raise ValidationError(
                    f"{args.model} does not embed a feature pipeline"
                )
            make = lambda doc: reduce_mod.sieve(doc, clf, clf.feature_pipeline)
            notes.append(f"sieve classifier: {clf.kind} (seed {clf.seed})")
        else:
            raise ValidationError("sieve needs --model or --oracle-labels")
    elif args.strategy == "random":
        matched = {}
        if args.match_manifests:
            for path in sorted(Path(args.match_manifests).glob("*.json")):
                if path.name == "run_config.json":
                    continue
                other = reduce_mod.read_manifest(path)
                matched[(other.repo, other.run_id)] = other
            notes.append("random removal matched per document to manifest counts")
        else:
            notes.append(f"random removal at target ratio {args.ratio}")

        def make(doc):
            if matched:
                other = matched.get((doc.repo, doc.run_id))
                if other is None:
                    raise ValidationError(
                        f"no manifest to match for {doc.repo} run {doc.run_id}"
                    )
                removed = len(doc.lines) - len(other.kept_indices)
                return reduce_mod.random_baseline(
                    doc, seed=args.seed, match_removed=removed
                )
            return reduce_mod.random_baseline(doc, args.ratio, seed=args.seed)

    else:
        make = lambda doc: reduce_mod.template_baseline(
            doc, depth=args.depth, threshold=args.threshold
        )[0]
        notes.append(reports.TEMPLATE_BASELINE_NOTE)

    with _own_output_dir(args.out_dir) as out_dir:
        for doc in documents:
            reduced = make(doc)
            result = reduce_mod.reduction_metrics(doc, reduced, cfg)
            reduce_mod.write_reduced(doc, reduced, result, out_dir)
            entries.append((doc.repo, doc.run_id, reduced.strategy, result))
        config = {
            "corpus": str(args.corpus),
            "strategy": args.strategy,
            "seed": args.seed,
            "ratio": args.ratio,
            "depth": args.depth,
            "threshold": args.threshold,
            "model": args.model,
            "oracle_labels": args.oracle_labels,
            "tokenizer": cfg.describe(),
        }
        header = reports.header_block(config, tokenizer=cfg.describe(), notes=notes)
        reports.write_csv(
            out_dir / "reduction_table.csv",
            header,
            reports.REDUCTION_COLUMNS,
            reports.reduction_rows(entries),
        )
        _write_run_config(out_dir, "reduce", config)
    print(f"reduced {len(documents)} documents -> {args.out_dir}")
    return 0


def _read_pairs(path):
    import csv as _csv

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = _csv.DictReader(fh)
        header = set(reader.fieldnames or [])
        for required in ("repo", "run_id", "strategy"):
            if required not in header:
                raise ValidationError(f"{path}: pairs CSV needs a {required} column")
        inline = {"full_response", "reduced_response"} <= header
        hashed = {"full_hash", "reduced_hash"} <= header
        if not inline and not hashed:
            raise ValidationError(
                f"{path}: pairs CSV needs full_response/reduced_response or "
                f"full_hash/reduced_hash columns"
            )
        return list(reader), inline


def cmd_eval(args) -> int:
    rows, inline = _read_pairs(args.pairs)
    archive = evaluate.ResponseArchive(args.archive) if args.archive else None
    if not inline and archive is None:
        raise ValidationError("hash-keyed pairs need --archive")
    endpoint = None
    if args.judge_model:
        endpoint = evaluate.JudgeEndpoint(
            base_url=args.judge_url or "https://api.openai.com/v1",
            model=args.judge_model,
            api_key_env=args.judge_key_env,
        )
    bert_scores = evaluate.load_bert_scores(args.bert_scores) if args.bert_scores else {}

    entries = []
    for row in rows:
        if inline:
            full, reduced = row["full_response"], row["reduced_response"]
        else:
            full_rec = archive.get(row["full_hash"])
            reduced_rec = archive.get(row["reduced_hash"])
            if full_rec is None or reduced_rec is None:
                raise ValidationError(
                    f"archive {args.archive} lacks responses for "
                    f"{row['repo']} run {row['run_id']}"
                )
            full, reduced = full_rec["response"], reduced_rec["response"]
        key = (row["repo"], row["run_id"], row["strategy"])
        report = evaluate.compare_responses(
            full,
            reduced,
            judge_endpoint=endpoint,
            archive=archive,
            replay_only=args.replay,
            bert_judge_f1=bert_scores.get(key),
        )
        entries.append((row["repo"], row["run_id"], row["strategy"], report))

    with _own_output_dir(args.out_dir) as out_dir:
        config = {
            "pairs": str(args.pairs),
            "archive": str(args.archive) if args.archive else None,
            "judge_model": args.judge_model,
            "replay": bool(args.replay),
            "bert_scores": str(args.bert_scores) if args.bert_scores else None,
        }
        notes = ["cosine source: TF-IDF fitted on each response pair"]
        if args.replay:
            notes.append("judge responses replayed from archive")
        header = reports.header_block(config, notes=notes)
        reports.write_csv(
            out_dir / "similarity_table.csv",
            header,
            reports.SIMILARITY_COLUMNS,
            reports.similarity_rows(entries),
        )
        _write_run_config(out_dir, "eval", config)
    print(f"evaluated {len(entries)} response pairs -> {args.out_dir}")
    return 0


def _reduction_entries_from_csv(path):
    columns, rows = reports.read_csv(path)
    entries = []
    for row in rows:
        if row["repo"] == "Average":
            continue
        result = reduce_mod.ReductionResult.from_totals(
            total_lines=int(row["total_lines"]),
            removed_lines=int(row["removed_lines"]),
            full_tokens=int(row["full_tokens"]),
            removed_tokens=int(row["full_tokens"]) - int(row["tokens_kept"]),
        )
        entries.append((row["repo"], row["run_id"], row.get("strategy", ""), result))
    if not entries:
        raise ValidationError(f"{path}: no reduction rows found")
    return entries


def cmd_report(args) -> int:
    entries = _reduction_entries_from_csv(args.reduction_table)
    summary = reports.resource_summary(entries)
    cost_rows = None
    config = {
        "reduction_table": str(args.reduction_table),
        "cost_params": str(args.cost_params) if args.cost_params else None,
    }
    if args.cost_params:
        params = costmodel.load_params(args.cost_params)
        n = len(entries)
        mean_full = classify.round_half_up(
            sum(r.full_tokens for _, _, _, r in entries) / n
        )
        mean_kept = classify.round_half_up(
            sum(r.tokens_kept for _, _, _, r in entries) / n
        )
        ledger = costmodel.TokenLedger(t_in_full=mean_full, t_in_reduced=mean_kept)
        saved = costmodel.cost_delta(ledger, params.prices)
        carbon = costmodel.carbon_delta(ledger.t_removed, params.carbon)
        cost_rows = [
            {
                "metric": f"Mean input cost / run ({params.currency_label})",
                "full": repr(costmodel.inference_cost(mean_full, 0, params.prices)),
                "reduced": repr(costmodel.inference_cost(mean_kept, 0, params.prices)),
                "delta": f"-{saved!r}",
            },
            {
                "metric": f"Mean avoided emissions / run (mass CO2, grid in {params.energy_label})",
                "full": "",
                "reduced": "",
                "delta": f"-{carbon!r}",
            },
        ]
    with _own_output_dir(args.out_dir) as out_dir:
        header = reports.header_block(
            config,
            notes=[
                "delta column is the macro-average of per-run reduction "
                "percentages; Full/LogSieve columns are means of counts"
            ],
        )
        reports.write_csv(
            out_dir / "resource_summary.csv",
            header,
            ("metric", "full", "logsieve", "delta_pct"),
            [(r["metric"], r["full"], r["reduced"], r["delta_pct"]) for r in summary],
        )
        markdown = "\n".join(header) + "\n\n"
        markdown += reports.render_resource_markdown(summary, cost_rows)
        (out_dir / "report.md").write_text(markdown, encoding="utf-8")
        _write_run_config(out_dir, "report", config)
    for row in summary:
        print(
            f"{row['metric']}: {row['full']} -> {row['reduced']} ({row['delta_pct']}%)"
        )
    return 0


def cmd_kappa(args) -> int:
    if args.corpus:
        documents = corpus.read_jsonl(args.corpus)
        labeled = annotation.import_labels(args.labels, documents)
        per_annotator = {
            a: labeled.labels_of(a) for a in labeled.annotator_ids
        }
    else:
        import csv as _csv

        per_annotator = {}
        with open(args.labels, "r", encoding="utf-8", newline="") as fh:
            reader = _csv.DictReader(fh)
            for required in ("repo", "run_id", "line_index", "annotator", "label"):
                if required not in (reader.fieldnames or []):
                    raise ValidationError(f"{args.labels}: missing column {required}")
            for row in reader:
                key = (row["repo"], row["run_id"], int(row["line_index"]))
                per_annotator.setdefault(row["annotator"], {})[key] = int(row["label"])
    if args.annotators:
        names = args.annotators.split(",")
    else:
        names = sorted(per_annotator)
    if len(names) != 2:
        raise ValidationError(
            f"kappa needs exactly two annotators, have {sorted(per_annotator)}; "
            f"pick two with --annotators"
        )
    a, b = names
    for name in names:
        if name not in per_annotator:
            raise ValidationError(f"annotator {name!r} not present in {args.labels}")
    keys_a, keys_b = set(per_annotator[a]), set(per_annotator[b])
    if keys_a != keys_b:
        raise ValidationError(
            f"annotators {a} and {b} cover different lines "
            f"({len(keys_a ^ keys_b)} lines not in common)"
        )
    ordered = sorted(keys_a)
    kappa = annotation.cohen_kappa(
        [per_annotator[a][k] for k in ordered], [per_annotator[b][k] for k in ordered]
    )
    agreement = sum(
        1 for k in ordered if per_annotator[a][k] == per_annotator[b][k]
    ) / len(ordered)
    print(f"annotators: {a} vs {b}")
    print(f"lines: {len(ordered)}")
    print(f"observed agreement: {agreement:.4f}")
    print(f"cohen_kappa: {kappa:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logsieve",
        description="Relevance-aware CI log reduction toolkit",
    )
    parser.add_argument("--version", action="version", version=f"logsieve {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a corpus from local files or the runs API")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--from-dir", help="directory of .log/.txt files")
    group.add_argument(
        "--from-github",
        nargs=2,
        metavar=("OWNER/REPO", "RUN_ID"),
        help="download one workflow run's logs",
    )
    p.add_argument("--conclusion", default="failure", choices=corpus.CONCLUSIONS)
    p.add_argument("--out", required=True, help="corpus JSONL path")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train a relevance classifier under the CV protocol")
    p.add_argument("--corpus", required=True)
    p.add_argument("--labels", required=True, help="label CSV")
    p.add_argument(
        "--features",
        default="tfidf",
        help="'tfidf' or a path to an embedding JSONL file",
    )
    p.add_argument("--model", default="logreg_l2", choices=classify.KINDS)
    p.add_argument("--min-df", type=int, default=2)
    p.add_argument("--scale", action="store_true", help="standardize features")
    p.add_argument("--grid-pca", help="comma-separated PCA sizes, e.g. 32,64,128,256")
    p.add_argument("--balance", action="store_true", help="downsample to class balance before splitting")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reduce", help="produce reduced logs and the reduction table")
    p.add_argument("--corpus", required=True)
    p.add_argument("--strategy", required=True, choices=reduce_mod.STRATEGIES)
    p.add_argument("--model", help="trained model JSON (sieve)")
    p.add_argument("--oracle-labels", help="label CSV used as a perfect classifier (sieve)")
    p.add_argument("--ratio", type=float, default=0.42, help="random removal ratio")
    p.add_argument(
        "--match-manifests",
        help="directory of reduction manifests whose per-document removal "
        "counts the random baseline should match",
    )
    p.add_argument("--depth", type=int, default=4, help="template tree depth")
    p.add_argument("--threshold", type=float, default=0.4, help="template match ratio")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tokenizer", default="heuristic", choices=("heuristic", "bpe"))
    p.add_argument("--vocab", help="merges vocabulary for bpe mode")
    p.add_argument("--separator-tokens", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("eval", help="score reduced-log responses against full-log responses")
    p.add_argument("--pairs", required=True, help="CSV of response pairs")
    p.add_argument("--archive", help="response archive JSONL (replay source)")
    p.add_argument("--replay", action="store_true", help="forbid network; archive only")
    p.add_argument("--judge-model", help="judge model identifier")
    p.add_argument("--judge-url", help="judge endpoint base URL")
    p.add_argument("--judge-key-env", default="LOGSIEVE_JUDGE_KEY")
    p.add_argument("--bert-scores", help="external contextual-scorer CSV")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="combined resource/cost report from a reduction table")
    p.add_argument("--reduction-table", required=True)
    p.add_argument("--cost-params", help="price/carbon parameter file")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("kappa", help="inter-annotator agreement report")
    p.add_argument("--labels", required=True)
    p.add_argument("--corpus", help="corpus JSONL to validate label joins against")
    p.add_argument("--annotators", help="comma-separated pair, e.g. alice,bob")
    p.set_defaults(func=cmd_kappa)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TransportError as err:
        print(f"error: {err}", file=sys.stderr)
        return 4
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except LogSieveError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
