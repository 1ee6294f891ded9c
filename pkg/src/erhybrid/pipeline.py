"""End-to-end orchestration: ingest, embed, gather, reconsider, report.

Every public entry point here takes a PipelineConfig and an optional stage
logger (a callable receiving one dict per completed stage). Wall-clock times
go only to the logger; files written under out_dir contain no timings, so
reruns over the same inputs produce byte-identical artifacts.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .config import PipelineConfig
from .counters import OpCounter
from .embedding import (
    EmbeddingBatch,
    HashNgramProvider,
    RemoteProvider,
    TfidfProvider,
    embed_records,
    load_cache,
    save_cache,
)
from .errors import (
    ConfigError,
    CorruptCache,
    MalformedInput,
    ResolutionError,
    StageError,
    VersionMismatch,
)
from .evaluation import (
    DecisionMetrics,
    ReportRow,
    benchmark,
    brute_force_gather,
    decision_metrics,
    recall_at_k,
)
from .index import CandidateSet, batch_gather, build_flat, build_rpforest
from .records import Record, Source, normalize, parse_csv, parse_jsonl, serialize
from .truth import GroundTruthPair, brute_force_pairs, read_truth, write_truth
from .verify import (
    MatchDecision,
    decide_all_pairs,
    reconsider,
    refs_by_id,
    write_decisions,
)

StageLogger = Callable[[dict], None]


def _null_logger(_event: dict) -> None:
    pass


@contextmanager
def _stage(name: str, log: StageLogger, **extra):
    """Time a stage, log one event on success, wrap failures with the stage name."""
    start = time.perf_counter()
    payload: dict = {}
    try:
        yield payload
    except (ResolutionError, OSError) as exc:
        raise StageError(name, exc) from exc
    wall_ms = (time.perf_counter() - start) * 1000.0
    log({"stage": name, "wall_ms": round(wall_ms, 3), **extra, **payload})


def load_records(path: str, source: Source) -> list[Record]:
    """Parse a record file by extension (.csv or .jsonl) and normalize."""
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        raw = parse_csv(path, source)
    elif suffix == ".jsonl":
        raw = parse_jsonl(path, source)
    else:
        raise MalformedInput(f"{path}: unsupported input format {suffix!r}")
    return [normalize(record) for record in raw]


def make_provider(cfg: PipelineConfig, ref_sentences: Sequence[str] | None = None):
    if cfg.embedder == "hash":
        return HashNgramProvider(dim=cfg.dim, n=cfg.ngram_n, seed=cfg.seed)
    if cfg.embedder == "tfidf":
        if not ref_sentences:
            raise ConfigError("tfidf embedder needs a reference corpus to fit on")
        return TfidfProvider(dim=cfg.dim, seed=cfg.seed).fit(ref_sentences)
    return RemoteProvider(cfg.remote_endpoint, timeout=cfg.remote_timeout)


def _cache_key(cfg: PipelineConfig, provider) -> str:
    if cfg.embedder == "remote":
        key = f"remote(endpoint={cfg.remote_endpoint})"
    else:
        key = provider.tag
    return hashlib.sha1(key.encode("utf-8")).hexdigest()[:16]


def embed_with_cache(
    cfg: PipelineConfig,
    records: Sequence[Record],
    provider,
    role: str,
    log: StageLogger = _null_logger,
) -> EmbeddingBatch:
    """Embed records, reusing an on-disk cache when ids and provider agree.

    A stale, corrupt, or incompatible cache file is recomputed and
    overwritten, never trusted.
    """
    cache_path = None
    if cfg.cache_dir:
        os.makedirs(cfg.cache_dir, exist_ok=True)
        cache_path = Path(cfg.cache_dir) / f"{role}-{_cache_key(cfg, provider)}.erhv"
        if cache_path.exists():
            try:
                batch = load_cache(cache_path)
            except (CorruptCache, VersionMismatch) as exc:
                log({"stage": "embed-cache", "event": "discard", "reason": str(exc)})
            else:
                ids_match = batch.record_ids == [r.record_id for r in records]
                tag_ok = cfg.embedder == "remote" or batch.provider_tag == provider.tag
                if ids_match and tag_ok:
                    log({"stage": "embed-cache", "event": "hit", "path": str(cache_path)})
                    return batch
                log({"stage": "embed-cache", "event": "stale", "path": str(cache_path)})
    batch = embed_records(records, provider)
    if cache_path is not None:
        save_cache(batch, cache_path)
        log({"stage": "embed-cache", "event": "write", "path": str(cache_path)})
    return batch


def build_index(cfg: PipelineConfig, batch: EmbeddingBatch):
    if cfg.index == "flat":
        return build_flat(batch)
    return build_rpforest(
        batch, n_trees=cfg.n_trees, leaf_size=cfg.leaf_size, seed=cfg.seed
    )


@dataclass
class ResolveResult:
    decisions: list[MatchDecision]
    metrics: DecisionMetrics | None
    comparisons: int
    verifications: int
    accepted: int


def run_resolve(cfg: PipelineConfig, log: StageLogger = _null_logger) -> ResolveResult:
    """Full pipeline over cfg.refs and cfg.queries; writes out_dir artifacts."""
    if not cfg.refs or not cfg.queries:
        raise StageError("ingest", ConfigError("refs and queries paths are required"))
    threads = cfg.effective_threads()

    with _stage("ingest", log) as info:
        refs = load_records(cfg.refs, Source.REFERENCE)
        queries = load_records(cfg.queries, Source.QUERY)
        truth = read_truth(cfg.truth) if cfg.truth else None
        info.update(refs=len(refs), queries=len(queries))

    verifications = OpCounter()
    comparisons_total = 0

    if cfg.mode == "allpairs":
        with _stage("verify", log) as info:
            decisions = decide_all_pairs(
                queries, refs, cfg.weights, cfg.accept_threshold, verifications
            )
            info.update(verifications=verifications.total)
    else:
        with _stage("embed", log) as info:
            provider = make_provider(cfg, [serialize(r) for r in refs])
            ref_batch = embed_with_cache(cfg, refs, provider, "refs", log)
            query_batch = embed_with_cache(cfg, queries, provider, "queries", log)
            info.update(provider=provider.tag, dim=ref_batch.dim)

        with _stage("index", log) as info:
            index = build_index(cfg, ref_batch)
            info.update(kind=cfg.index, size=len(index))

        with _stage("gather", log) as info:
            candidates = batch_gather(
                index, query_batch, cfg.k, threads=threads, budget=cfg.search_budget
            )
            comparisons_total = index.comparisons.total
            info.update(k=cfg.k, comparisons=comparisons_total)

        with _stage("verify", log) as info:
            ref_table = refs_by_id(refs)
            queries_by_id = {q.record_id: q for q in queries}
            decisions = []
            for cs in candidates:
                query = queries_by_id[cs.query_id]
                if cfg.mode == "embedding_only":
                    cs = CandidateSet(cs.query_id, cs.neighbors[:1])
                    decision = reconsider(
                        query, cs, ref_table, cfg.weights, 0.0, verifications
                    )
                else:
                    decision = reconsider(
                        query, cs, ref_table, cfg.weights, cfg.accept_threshold,
                        verifications,
                    )
                decisions.append(decision)
            info.update(verifications=verifications.total)

    metrics = None
    with _stage("report", log) as info:
        os.makedirs(cfg.out_dir, exist_ok=True)
        decisions_path = Path(cfg.out_dir) / "decisions.jsonl"
        write_decisions(decisions, decisions_path)
        accepted = sum(1 for d in decisions if d.accepted)
        info.update(decisions=str(decisions_path), accepted=accepted)
        if truth is not None:
            metrics = decision_metrics(decisions, truth)
            metrics_path = Path(cfg.out_dir) / "metrics.json"
            with open(metrics_path, "w", encoding="utf-8") as fh:
                json.dump(metrics.to_json_obj(), fh, indent=2)
                fh.write("\n")
            info.update(
                metrics=str(metrics_path),
                f1=round(metrics.f1, 6),
                comparisons=comparisons_total,
                verifications=verifications.total,
            )

    return ResolveResult(
        decisions=decisions,
        metrics=metrics,
        comparisons=comparisons_total,
        verifications=verifications.total,
        accepted=accepted,
    )


def run_ground_truth(
    cfg: PipelineConfig, out_path: str | None = None, log: StageLogger = _null_logger
) -> list[GroundTruthPair]:
    """Embed both sides and pair queries to refs by exact cosine argmax."""
    if not cfg.refs or not cfg.queries:
        raise StageError("ingest", ConfigError("refs and queries paths are required"))
    with _stage("ingest", log) as info:
        refs = load_records(cfg.refs, Source.REFERENCE)
        queries = load_records(cfg.queries, Source.QUERY)
        info.update(refs=len(refs), queries=len(queries))
    with _stage("embed", log) as info:
        provider = make_provider(cfg, [serialize(r) for r in refs])
        ref_batch = embed_with_cache(cfg, refs, provider, "refs", log)
        query_batch = embed_with_cache(cfg, queries, provider, "queries", log)
        info.update(provider=provider.tag)
    counter = OpCounter()
    with _stage("pair", log) as info:
        pairs = brute_force_pairs(
            query_batch, ref_batch, cfg.ground_truth_threshold, counter
        )
        info.update(pairs=len(pairs), comparisons=counter.total)
    with _stage("report", log) as info:
        if out_path is None:
            os.makedirs(cfg.out_dir, exist_ok=True)
            out_path = str(Path(cfg.out_dir) / "truth.csv")
        write_truth(pairs, out_path)
        info.update(truth=out_path)
    return pairs


def _retrieval_setups(
    cfg: PipelineConfig,
    methods: Sequence[str],
    refs: Sequence[Record],
    queries: Sequence[Record],
    log: StageLogger,
):
    """Build (name, index, query_batch) triples for each retrieval method.

    'flat', 'rpforest', and 'bruteforce' share the configured embedder;
    'lexical' always uses TF-IDF vectors, whatever the config says, because
    it exists to show what plain token overlap retrieval achieves.
    """
    known = ("flat", "rpforest", "lexical", "bruteforce")
    for name in methods:
        if name not in known:
            raise ConfigError(f"unknown retrieval method {name!r}")
    setups = []
    main_provider = None
    main_batches = None
    lexical_batches = None
    for name in methods:
        if name == "lexical":
            if lexical_batches is None:
                provider = TfidfProvider(dim=cfg.dim, seed=cfg.seed).fit(
                    [serialize(r) for r in refs]
                )
                lexical_batches = (
                    embed_records(refs, provider),
                    embed_records(queries, provider),
                )
            ref_batch, query_batch = lexical_batches
            setups.append((name, build_flat(ref_batch), query_batch))
            continue
        if main_batches is None:
            main_provider = make_provider(cfg, [serialize(r) for r in refs])
            main_batches = (
                embed_with_cache(cfg, refs, main_provider, "refs", log),
                embed_with_cache(cfg, queries, main_provider, "queries", log),
            )
        ref_batch, query_batch = main_batches
        if name == "rpforest":
            index = build_rpforest(
                ref_batch, n_trees=cfg.n_trees, leaf_size=cfg.leaf_size, seed=cfg.seed
            )
        else:  # flat and bruteforce share the flat structure
            index = build_flat(ref_batch)
        setups.append((name, index, query_batch))
    return setups


def run_eval_retrieval(
    cfg: PipelineConfig,
    methods: Sequence[str],
    k_values: Sequence[int],
    log: StageLogger = _null_logger,
) -> list[ReportRow]:
    """Recall@K table: one gather at max(K) per method, scored at each K."""
    if not k_values or any(k < 1 for k in k_values):
        raise ConfigError(f"k values must all be >= 1 (got {list(k_values)})")
    if not cfg.refs or not cfg.queries or not cfg.truth:
        raise ConfigError("eval-retrieval needs refs, queries, and truth files")
    with _stage("ingest", log) as info:
        refs = load_records(cfg.refs, Source.REFERENCE)
        queries = load_records(cfg.queries, Source.QUERY)
        truth = read_truth(cfg.truth)
        info.update(refs=len(refs), queries=len(queries), truth=len(truth))
    k_max = max(k_values)
    threads = cfg.effective_threads()
    rows: list[ReportRow] = []
    for name, index, query_batch in _retrieval_setups(cfg, methods, refs, queries, log):
        with _stage(f"gather[{name}]", log) as info:
            index.comparisons.reset()
            start = time.perf_counter()
            if name == "bruteforce":
                candidates = brute_force_gather(index, query_batch, k_max)
            else:
                candidates = batch_gather(
                    index, query_batch, k_max, threads=threads, budget=cfg.search_budget
                )
            wall_ms = (time.perf_counter() - start) * 1000.0
            comparisons = index.comparisons.total
            info.update(comparisons=comparisons)
        for k in k_values:
            rows.append(
                ReportRow(
                    method=name,
                    k=k,
                    recall=recall_at_k(candidates, truth, k),
                    comparisons=comparisons,
                    wall_ms=wall_ms,
                    time_ratio=1.0,
                )
            )
    return rows


def run_bench(
    cfg: PipelineConfig,
    methods: Sequence[str],
    repetitions: int = 5,
    log: StageLogger = _null_logger,
) -> list[ReportRow]:
    """Wall-time benchmark at cfg.k with a brute-force 1.0x baseline."""
    if not cfg.refs or not cfg.queries or not cfg.truth:
        raise ConfigError("bench needs refs, queries, and truth files")
    with _stage("ingest", log) as info:
        refs = load_records(cfg.refs, Source.REFERENCE)
        queries = load_records(cfg.queries, Source.QUERY)
        truth = read_truth(cfg.truth)
        info.update(refs=len(refs), queries=len(queries))
    if "bruteforce" not in methods:
        methods = ["bruteforce"] + list(methods)
    threads = cfg.effective_threads()
    gather_fns = {}
    for name, index, query_batch in _retrieval_setups(cfg, methods, refs, queries, log):
        def fn(index=index, query_batch=query_batch, name=name):
            index.comparisons.reset()
            if name == "bruteforce":
                candidates = brute_force_gather(index, query_batch, cfg.k)
            else:
                candidates = batch_gather(
                    index, query_batch, cfg.k, threads=threads, budget=cfg.search_budget
                )
            return candidates, index.comparisons.total

        gather_fns[name] = fn
    with _stage("bench", log) as info:
        rows = benchmark(gather_fns, truth, cfg.k, repetitions=repetitions)
        info.update(methods=list(gather_fns))
    return rows
