"""Numeric features for log lines.

Native TF-IDF over line text, precomputed embedding tables loaded from
JSON Lines, standardization, and PCA. Fitted state is immutable; transforms
are pure functions of (model, input).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import ValidationError

TFIDF_FORMAT_VERSION = 1

# Lowercased alphanumeric runs; underscores split terms. Pure-digit terms
# longer than 8 characters are dropped (timestamps, hashes, raw addresses).
_TERM_RE = re.compile(r"[^\W_]+", re.UNICODE)
_MAX_DIGIT_RUN = 8


def term_tokens(text: str) -> list[str]:
    """Tokenize a line for TF-IDF."""
    out = []
    for term in _TERM_RE.findall(text.lower()):
        if term.isdigit() and len(term) > _MAX_DIGIT_RUN:
            continue
        out.append(term)
    return out


@dataclass(frozen=True)
class TfIdfModel:
    vocabulary: dict[str, int]
    idf: np.ndarray
    doc_count: int
    min_df: int

    def __post_init__(self):
        if len(self.idf) != len(self.vocabulary):
            raise ValidationError("idf length must equal vocabulary size")


def fit_tfidf(lines, min_df: int = 2) -> TfIdfModel:
    """Fit a TF-IDF vocabulary over a corpus of lines.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1 (smoothed), where N counts all
    lines. Terms must appear in at least ``min_df`` lines. Single-occurrence
    terms in CI logs are overwhelmingly hashes and paths, hence the default
    of 2.
    """
    lines = list(lines)
    if not lines:
        raise ValidationError("cannot fit TF-IDF on an empty corpus")
    df: dict[str, int] = {}
    any_tokens = False
    for line in lines:
        terms = set(term_tokens(line))
        if terms:
            any_tokens = True
        for term in terms:
            df[term] = df.get(term, 0) + 1
    if not any_tokens:
        raise ValidationError("cannot fit TF-IDF: every line is empty of terms")
    kept = sorted(t for t, n in df.items() if n >= min_df)
    if not kept:
        raise ValidationError(
            f"no term reaches min_df={min_df}; lower min_df or enlarge the corpus"
        )
    vocabulary = {term: i for i, term in enumerate(kept)}
    n = len(lines)
    idf = np.array(
        [np.log((1.0 + n) / (1.0 + df[t])) + 1.0 for t in kept], dtype=np.float64
    )
    return TfIdfModel(vocabulary=vocabulary, idf=idf, doc_count=n, min_df=min_df)


def transform_tfidf(model: TfIdfModel, line: str):
    """Transform one line to an L2-normalized sparse row vector (1 x |V|)."""
    return transform_tfidf_many(model, [line])


def transform_tfidf_many(model: TfIdfModel, lines):
    """Transform lines to an L2-row-normalized CSR matrix (n x |V|).

    Lines with no in-vocabulary terms come out as zero rows (the norm guard
    leaves them untouched).
    """
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for line in lines:
        counts: dict[int, int] = {}
        for term in term_tokens(line):
            col = model.vocabulary.get(term)
            if col is not None:
                counts[col] = counts.get(col, 0) + 1
        row_cols = sorted(counts)
        row_vals = [counts[c] * model.idf[c] for c in row_cols]
        norm = np.sqrt(sum(v * v for v in row_vals))
        if norm > 0:
            row_vals = [v / norm for v in row_vals]
        indices.extend(row_cols)
        data.extend(row_vals)
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(indptr) - 1, len(model.vocabulary)),
    )


def save_tfidf(model: TfIdfModel, path) -> None:
    payload = {
        "format_version": TFIDF_FORMAT_VERSION,
        "kind": "tfidf",
        "doc_count": model.doc_count,
        "min_df": model.min_df,
        "vocabulary": model.vocabulary,
        "idf": model.idf.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True)


def load_tfidf(path) -> TfIdfModel:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != TFIDF_FORMAT_VERSION:
        raise ValidationError(
            f"{path}: unsupported TF-IDF format version {version!r}"
        )
    return TfIdfModel(
        vocabulary={str(k): int(v) for k, v in payload["vocabulary"].items()},
        idf=np.array(payload["idf"], dtype=np.float64),
        doc_count=int(payload["doc_count"]),
        min_df=int(payload["min_df"]),
    )


@dataclass(frozen=True)
class EmbeddingTable:
    """Precomputed line vectors keyed by (repo, run_id, line_index)."""

    dimension: int | None
    vectors: dict[tuple[str, str, int], np.ndarray]
    provenance: str = ""

    def require_dimension(self) -> int:
        if self.dimension is None:
            raise ValidationError(
                "embedding table is empty; dimension is undefined"
            )
        return self.dimension

    def coverage(self, documents) -> list[tuple[str, str, int]]:
        """Corpus lines that have no vector."""
        missing = []
        for doc in documents:
            for key in doc.line_keys():
                if key not in self.vectors:
                    missing.append(key)
        return missing

    def matrix(self, keys) -> np.ndarray:
        self.require_dimension()
        rows = []
        missing = 0
        for key in keys:
            vec = self.vectors.get(key)
            if vec is None:
                missing += 1
                continue
            rows.append(vec)
        if missing:
            raise ValidationError(
                f"{missing} of {len(list(keys)) if not rows else missing + len(rows)} "
                f"requested lines lack embedding vectors"
            )
        return np.vstack(rows)


def load_embeddings(path, provenance: str | None = None) -> EmbeddingTable:
    """Load an embedding table from JSON Lines.

    Each row is {repo, run_id, line_index, vector}; all vectors must share
    one dimension.
    """
    vectors: dict[tuple[str, str, int], np.ndarray] = {}
    dimension: int | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            text = text.strip()
            if not text:
                continue
            try:
                record = json.loads(text)
                key = (record["repo"], record["run_id"], int(record["line_index"]))
                vec = np.asarray(record["vector"], dtype=np.float64)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
                raise ValidationError(f"{path}:{lineno}: malformed row: {err}") from err
            if vec.ndim != 1:
                raise ValidationError(f"{path}:{lineno}: vector must be a flat list")
            if dimension is None:
                dimension = int(vec.shape[0])
            elif vec.shape[0] != dimension:
                raise ValidationError(
                    f"{path}:{lineno}: ragged dimensions ({vec.shape[0]} vs {dimension})"
                )
            vectors[key] = vec
    return EmbeddingTable(
        dimension=dimension,
        vectors=vectors,
        provenance=provenance or str(path),
    )


@dataclass(frozen=True)
class ScalerParams:
    mean: np.ndarray
    scale: np.ndarray


def fit_scaler(X) -> ScalerParams:
    """Column standardization parameters (population std; zero-variance
    columns get scale 1 so they center to zero without blowing up)."""
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        raise ValidationError("cannot fit scaler on empty matrix")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scale = np.where(std > 1e-12, std, 1.0)
    return ScalerParams(mean=mean, scale=scale)


def apply_scaler(params: ScalerParams, X) -> np.ndarray:
    return (np.asarray(X, dtype=np.float64) - params.mean) / params.scale


def invert_scaler(params: ScalerParams, X) -> np.ndarray:
    return np.asarray(X, dtype=np.float64) * params.scale + params.mean


@dataclass(frozen=True)
class PcaBasis:
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance: np.ndarray  # (k,), non-increasing
    center: np.ndarray  # (d,)


def fit_pca(X, k: int) -> PcaBasis:
    """Top-k eigenvectors of the covariance of centered X.

    Covariance uses the population normalization (divide by n), matching
    the scaler. Component signs are fixed by making each component's
    largest-magnitude coordinate positive so fits are reproducible.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if not 1 <= k <= min(n - 1, d):
        raise ValidationError(
            f"k must be in [1, min(rows-1, cols)] = [1, {min(n - 1, d)}], got {k}"
        )
    center = X.mean(axis=0)
    centered = X - center
    cov = centered.T @ centered / n
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1][:k]
    components = eigenvectors[:, order].T.copy()
    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    explained = np.clip(eigenvalues[order], 0.0, None)
    return PcaBasis(components=components, explained_variance=explained, center=center)


def project(basis: PcaBasis, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return (X - basis.center) @ basis.components.T


@dataclass
class FeaturePipeline:
    """Fitted featurization state: how log lines become classifier input.

    ``source`` is "tfidf" or "embedding". Scaler and PCA are optional and
    applied in that order; applying either densifies TF-IDF output.
    """

    source: str
    tfidf: TfIdfModel | None = None
    embeddings: EmbeddingTable | None = None
    embedding_path: str | None = None
    scaler: ScalerParams | None = None
    pca: PcaBasis | None = None
    config: dict = field(default_factory=dict)

    def transform_lines(self, lines):
        if self.source != "tfidf":
            raise ValidationError("only tfidf pipelines can transform bare lines")
        X = transform_tfidf_many(self.tfidf, lines)
        return self._postprocess(X)

    def transform_document(self, doc):
        if self.source == "tfidf":
            return self.transform_lines([line.content for line in doc.lines])
        return self.transform_keys(doc.line_keys())

    def transform_keys(self, keys):
        if self.source != "embedding":
            raise ValidationError("only embedding pipelines can transform line keys")
        return self._postprocess(self.embeddings.matrix(keys))

    def _postprocess(self, X):
        if self.scaler is None and self.pca is None:
            return X
        if sparse.issparse(X):
            X = X.toarray()
        if self.scaler is not None:
            X = apply_scaler(self.scaler, X)
        if self.pca is not None:
            X = project(self.pca, X)
        return X

    def to_dict(self) -> dict:
        out: dict = {"source": self.source, "config": dict(self.config)}
        if self.tfidf is not None:
            out["tfidf"] = {
                "format_version": TFIDF_FORMAT_VERSION,
                "doc_count": self.tfidf.doc_count,
                "min_df": self.tfidf.min_df,
                "vocabulary": self.tfidf.vocabulary,
                "idf": self.tfidf.idf.tolist(),
            }
        if self.embedding_path is not None:
            out["embedding_path"] = self.embedding_path
            if self.embeddings is not None:
                out["embedding_provenance"] = self.embeddings.provenance
        if self.scaler is not None:
            out["scaler"] = {
                "mean": self.scaler.mean.tolist(),
                "scale": self.scaler.scale.tolist(),
            }
        if self.pca is not None:
            out["pca"] = {
                "components": self.pca.components.tolist(),
                "explained_variance": self.pca.explained_variance.tolist(),
                "center": self.pca.center.tolist(),
            }
        return out

    @classmethod
    def from_dict(cls, payload: dict, *, embeddings: EmbeddingTable | None = None):
        tfidf = None
        if "tfidf" in payload:
            raw = payload["tfidf"]
            tfidf = TfIdfModel(
                vocabulary={str(k): int(v) for k, v in raw["vocabulary"].items()},
                idf=np.array(raw["idf"], dtype=np.float64),
                doc_count=int(raw["doc_count"]),
                min_df=int(raw["min_df"]),
            )
        embedding_path = payload.get("embedding_path")
        if payload["source"] == "embedding" and embeddings is None and embedding_path:
            embeddings = load_embeddings(embedding_path)
        scaler = None
        if "scaler" in payload:
            scaler = ScalerParams(
                mean=np.array(payload["scaler"]["mean"], dtype=np.float64),
                scale=np.array(payload["scaler"]["scale"], dtype=np.float64),
            )
        pca = None
        if "pca" in payload:
            pca = PcaBasis(
                components=np.array(payload["pca"]["components"], dtype=np.float64),
                explained_variance=np.array(
                    payload["pca"]["explained_variance"], dtype=np.float64
                ),
                center=np.array(payload["pca"]["center"], dtype=np.float64),
            )
        return cls(
            source=payload["source"],
            tfidf=tfidf,
            embeddings=embeddings,
            embedding_path=embedding_path,
            scaler=scaler,
            pca=pca,
            config=dict(payload.get("config", {})),
        )


def fit_feature_pipeline(
    documents,
    *,
    source: str = "tfidf",
    min_df: int = 2,
    scale: bool | None = None,
    pca_k: int | None = None,
    embedding_path=None,
    embeddings: EmbeddingTable | None = None,
) -> FeaturePipeline:
    """Fit a full featurization pipeline over a corpus of documents.

    Scaling defaults off for TF-IDF (keeps the matrix sparse) and on for
    embeddings. PCA requires materializing the matrix once at fit time.
    """
    documents = list(documents)
    if source == "tfidf":
        lines = [line.content for doc in documents for line in doc.lines]
        tfidf = fit_tfidf(lines, min_df=min_df)
        pipeline = FeaturePipeline(
            source="tfidf",
            tfidf=tfidf,
            config={"min_df": min_df, "scale": bool(scale), "pca_k": pca_k},
        )
        if scale or pca_k is not None:
            X = transform_tfidf_many(tfidf, lines).toarray()
            if scale:
                pipeline.scaler = fit_scaler(X)
                X = apply_scaler(pipeline.scaler, X)
            if pca_k is not None:
                pipeline.pca = fit_pca(X, pca_k)
        return pipeline
    if source == "embedding":
        if embeddings is None:
            if embedding_path is None:
                raise ValidationError("embedding pipelines need a vector file")
            embeddings = load_embeddings(embedding_path)
        scale = True if scale is None else scale
        keys = [key for doc in documents for key in doc.line_keys()]
        X = embeddings.matrix(keys)
        pipeline = FeaturePipeline(
            source="embedding",
            embeddings=embeddings,
            embedding_path=str(embedding_path) if embedding_path else None,
            config={"scale": bool(scale), "pca_k": pca_k},
        )
        if scale:
            pipeline.scaler = fit_scaler(X)
            X = apply_scaler(pipeline.scaler, X)
        if pca_k is not None:
            pipeline.pca = fit_pca(X, pca_k)
        return pipeline
    raise ValidationError(f"unknown feature source {source!r}")
