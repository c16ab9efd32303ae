"""logsieve: relevance-aware CI log reduction.

Classify log lines by diagnostic relevance, filter the noise before
expensive downstream analysis, and quantify reduction, semantic fidelity,
and cost/energy savings against structural and random baselines.
"""

__version__ = "0.1.0"

from .annotation import (
    IRRELEVANT,
    RELEVANT,
    AnnotatedCorpus,
    cohen_kappa,
    import_labels,
    merge_consensus,
)
from .classify import (
    CvReport,
    EvalMetrics,
    FeatureConfig,
    TrainedClassifier,
    evaluate_classifier,
    grid_search,
    predict,
    stratified_kfold,
    stratified_split,
    train,
)
from .corpus import (
    LogDocument,
    LogLine,
    fetch_run_logs,
    load_local,
    normalize_line,
    read_jsonl,
    write_jsonl,
)
from .costmodel import (
    CarbonParams,
    PriceSheet,
    TokenLedger,
    carbon_delta,
    cost_delta,
    inference_cost,
)
from .errors import LogSieveError, TransportError, ValidationError
from .evaluate import (
    JudgeEndpoint,
    ResponseArchive,
    SimilarityReport,
    bleu,
    build_prompt,
    compare_responses,
    cosine_similarity,
    exact_match,
    generate_response,
    judge_score,
    rouge1_f1,
    rougel_f1,
)
from .features import (
    EmbeddingTable,
    FeaturePipeline,
    PcaBasis,
    ScalerParams,
    TfIdfModel,
    apply_scaler,
    fit_feature_pipeline,
    fit_pca,
    fit_scaler,
    fit_tfidf,
    load_embeddings,
    project,
    transform_tfidf,
)
from .reduce import (
    ReducedLog,
    ReductionResult,
    TemplateTree,
    oracle_sieve,
    random_baseline,
    reduced_text,
    reduction_metrics,
    sieve,
    template_baseline,
)
from .synth import make_synthetic_corpus
from .tokens import TokenizerConfig, count_document_tokens, count_tokens
