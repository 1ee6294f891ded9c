"""Batch entity resolution in two stages.

Gather: serialize each record into a fixed sentence, embed it, and pull the
nearest references from an index (exact or approximate). Reconsider: re-score
those few candidates with weighted per-field edit-distance similarity and
accept the best one only if it clears a threshold. The package also ships the
machinery to judge itself: synthetic corpora with controllable noise,
embedding-space ground truth, and an evaluation harness with cost counters.
"""

__version__ = "0.1.0"

from .config import PipelineConfig, load_config
from .counters import OpCounter
from .embedding import (
    EmbeddingBatch,
    HashNgramProvider,
    RemoteProvider,
    TfidfProvider,
    embed_records,
    hash_ngram_embed,
    load_cache,
    mnr_loss,
    save_cache,
)
from .errors import (
    ConfigError,
    CorruptCache,
    DimensionMismatch,
    DuplicateId,
    DuplicateQuery,
    EmptyBatch,
    InvalidSpec,
    InvalidWeights,
    MalformedInput,
    MissingColumn,
    MissingQuery,
    ProtocolError,
    ProviderUnavailable,
    ResolutionError,
    StageError,
    UnknownRefId,
    VersionMismatch,
)
from .evaluation import (
    DecisionMetrics,
    ReportRow,
    benchmark,
    brute_force_gather,
    decision_metrics,
    emit_report,
    recall_at_k,
)
from .index import (
    CandidateSet,
    FlatIndex,
    RPForestIndex,
    batch_gather,
    build_flat,
    build_rpforest,
    load_index,
    query_rpforest,
    query_topk,
    save_index,
)
from .pipeline import ResolveResult, run_bench, run_eval_retrieval, run_ground_truth, run_resolve
from .records import (
    CANONICAL_FIELDS,
    Record,
    Source,
    normalize,
    parse_csv,
    parse_jsonl,
    serialize,
    write_csv,
    write_jsonl,
)
from .truth import (
    GroundTruthPair,
    NoiseSpec,
    apply_noise,
    brute_force_pairs,
    generate_corpus,
    read_truth,
    write_truth,
)
from .verify import (
    FieldWeights,
    MatchDecision,
    composite_score,
    decide_all_pairs,
    field_similarities,
    levenshtein,
    read_decisions,
    reconsider,
    refs_by_id,
    similarity,
    write_decisions,
)
