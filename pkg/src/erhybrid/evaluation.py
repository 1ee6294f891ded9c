"""Evaluation: retrieval recall, decision quality, and cost accounting.

Retrieval is scored as recall@K against known pairs. Decisions are scored as
a confusion matrix where a false positive is an accepted wrong (or unlinked)
query and a false negative is a linked query that was not correctly matched.
Benchmarks report wall time relative to a brute-force full-sort scan and the
exact number of similarity comparisons each method performed.
"""

from __future__ import annotations

import csv
import json
import os
import statistics
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DuplicateQuery, MissingQuery
from .index import CandidateSet, FlatIndex, _top_rows
from .truth import GroundTruthPair
from .verify import MatchDecision


def _truth_by_query(truth: Iterable[GroundTruthPair]) -> dict[str, set[str]]:
    table: dict[str, set[str]] = {}
    for pair in truth:
        table.setdefault(pair.query_id, set()).add(pair.ref_id)
    return table


def recall_at_k(
    candidates: Sequence[CandidateSet], truth: Sequence[GroundTruthPair], k: int
) -> float:
    """Fraction of truth pairs whose ref appears in the query's first k candidates.

    Empty truth is vacuously perfect. A truth query with no candidate set is
    an error, not a miss: it means the caller evaluated the wrong corpus.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1 (got {k})")
    by_query: dict[str, CandidateSet] = {}
    for cs in candidates:
        if cs.query_id in by_query:
            raise DuplicateQuery(f"two candidate sets for query {cs.query_id!r}")
        by_query[cs.query_id] = cs
    if not truth:
        return 1.0
    hits = 0
    for pair in truth:
        cs = by_query.get(pair.query_id)
        if cs is None:
            raise MissingQuery(f"no candidates for truth query {pair.query_id!r}")
        if pair.ref_id in cs.ids()[:k]:
            hits += 1
    return hits / len(truth)


@dataclass(frozen=True)
class DecisionMetrics:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float
    accuracy: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, tn: int) -> "DecisionMetrics":
        def ratio(num: float, den: float) -> float:
            return num / den if den > 0 else 0.0

        precision = ratio(tp, tp + fp)
        recall = ratio(tp, tp + fn)
        return cls(
            tp=tp,
            fp=fp,
            fn=fn,
            tn=tn,
            precision=precision,
            recall=recall,
            f1=ratio(2 * precision * recall, precision + recall),
            accuracy=ratio(tp + tn, tp + fp + fn + tn),
        )

    def to_json_obj(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
        }


def decision_metrics(
    decisions: Sequence[MatchDecision], truth: Sequence[GroundTruthPair]
) -> DecisionMetrics:
    """Confusion counts over decisions given known pairs.

    A linked query whose accepted ref is wrong counts as both a false
    positive (the acceptance) and a false negative (the missed link). Linked
    queries with no decision at all count as false negatives. Ratios with a
    zero denominator are defined as 0.
    """
    links = _truth_by_query(truth)
    seen: set[str] = set()
    tp = fp = fn = tn = 0
    for decision in decisions:
        if decision.query_id in seen:
            raise DuplicateQuery(f"two decisions for query {decision.query_id!r}")
        seen.add(decision.query_id)
        expected = links.get(decision.query_id)
        if decision.accepted:
            if expected is not None and decision.best_ref_id in expected:
                tp += 1
            else:
                fp += 1
                if expected is not None:
                    fn += 1
        else:
            if expected is None:
                tn += 1
            else:
                fn += 1
    fn += sum(1 for query_id in links if query_id not in seen)
    return DecisionMetrics.from_counts(tp, fp, fn, tn)


@dataclass(frozen=True)
class ReportRow:
    """One line of an evaluation or benchmark report."""

    method: str
    k: int
    recall: float
    comparisons: int
    wall_ms: float
    time_ratio: float


def emit_report(rows: Sequence[ReportRow], path: str | os.PathLike[str], fmt: str = "csv") -> None:
    """Write report rows as CSV (floats at six significant digits) or JSONL."""
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"unknown report format {fmt!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if fmt == "csv":
            writer = csv.writer(fh)
            writer.writerow(["method", "k", "recall", "comparisons", "wall_ms", "time_ratio"])
            for row in rows:
                writer.writerow(
                    [
                        row.method,
                        row.k,
                        f"{row.recall:.6g}",
                        row.comparisons,
                        f"{row.wall_ms:.6g}",
                        f"{row.time_ratio:.6g}",
                    ]
                )
        else:
            for row in rows:
                fh.write(
                    json.dumps(
                        {
                            "method": row.method,
                            "k": row.k,
                            "recall": row.recall,
                            "comparisons": row.comparisons,
                            "wall_ms": row.wall_ms,
                            "time_ratio": row.time_ratio,
                        }
                    )
                    + "\n"
                )


def brute_force_gather(
    index: FlatIndex, queries, k: int
) -> list[CandidateSet]:
    """Naive retrieval baseline: score everything, fully sort, take k.

    Same answers as the flat index (both are exact); this exists so the
    benchmark has an honest 1.0x reference cost.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1 (got {k})")
    qmatrix = queries.vectors.astype(np.float64)
    out = []
    for i in range(len(queries)):
        sims = index._matrix @ qmatrix[i]
        index.comparisons.add(len(index))
        order = np.lexsort((index._id_keys, -sims))[: min(k, len(index))]
        out.append(
            CandidateSet(
                query_id=queries.record_ids[i],
                neighbors=[(index.ids[r], float(sims[r])) for r in order],
            )
        )
    return out


GatherFn = Callable[[], tuple[list[CandidateSet], int]]


def benchmark(
    gather_fns: dict[str, GatherFn],
    truth: Sequence[GroundTruthPair],
    k: int,
    repetitions: int = 5,
    baseline: str = "bruteforce",
) -> list[ReportRow]:
    """Time each gather callable and report recall, comparisons, and ratios.

    Each callable returns (candidates, comparisons for that run). One unmeasured
    warm-up run precedes `repetitions` timed runs; the wall time is the median.
    time_ratio is baseline_wall / method_wall, so the baseline row is 1.0 and
    bigger is faster.
    """
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1 (got {repetitions})")
    if baseline not in gather_fns:
        raise ValueError(f"baseline {baseline!r} missing from methods")
    walls: dict[str, float] = {}
    results: dict[str, tuple[list[CandidateSet], int]] = {}
    for name, fn in gather_fns.items():
        fn()  # warm-up: caches, lazy allocations
        samples = []
        last: tuple[list[CandidateSet], int] | None = None
        for _ in range(repetitions):
            start = time.perf_counter()
            last = fn()
            samples.append(time.perf_counter() - start)
        walls[name] = statistics.median(samples)
        results[name] = last
    rows = []
    for name in gather_fns:
        candidates, comparisons = results[name]
        rows.append(
            ReportRow(
                method=name,
                k=k,
                recall=recall_at_k(candidates, truth, k),
                comparisons=comparisons,
                wall_ms=walls[name] * 1000.0,
                time_ratio=walls[baseline] / walls[name] if walls[name] > 0 else 0.0,
            )
        )
    return rows
