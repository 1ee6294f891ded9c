"""Fuzzy verification: re-score retrieved candidates field by field.

Retrieval finds plausible references; this stage decides. Each candidate is
scored as a weighted sum of per-field normalized Levenshtein similarities and
the best one is accepted iff its score clears the threshold. Everything here
is exact string math, no embeddings.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

from .counters import OpCounter
from .errors import DuplicateId, InvalidWeights, MalformedInput, UnknownRefId
from .index import CandidateSet
from .records import CANONICAL_FIELDS, Record


def levenshtein(a: str, b: str) -> int:
    """Edit distance over Unicode code points, two-row dynamic program."""
    if a == b:
        return 0
    # Common prefix and suffix contribute nothing; strip them first.
    start = 0
    while start < len(a) and start < len(b) and a[start] == b[start]:
        start += 1
    end_a, end_b = len(a), len(b)
    while end_a > start and end_b > start and a[end_a - 1] == b[end_b - 1]:
        end_a -= 1
        end_b -= 1
    a, b = a[start:end_a], b[start:end_b]
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(b) > len(a):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, char_a in enumerate(a, start=1):
        current = [i] + [0] * len(b)
        for j, char_b in enumerate(b, start=1):
            cost = 0 if char_a == char_b else 1
            current[j] = min(
                previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost
            )
        previous = current
    return previous[-1]


@lru_cache(maxsize=1 << 16)
def _similarity_lowered(a: str, b: str) -> float:
    if not a and not b:
        return 1.0
    return 1.0 - levenshtein(a, b) / max(len(a), len(b))


def similarity(a: str, b: str) -> float:
    """Case-insensitive normalized similarity: 1 - dist/max(len); 1.0 if both empty.

    Memoized on the lowercased ordered pair; the cache is invisible to
    callers and to the verification counter.
    """
    a, b = a.lower(), b.lower()
    if b < a:
        a, b = b, a
    return _similarity_lowered(a, b)


@dataclass(frozen=True)
class FieldWeights:
    """Relative importance of each field in the composite score.

    Defaults weight email highest because it is the strongest identifier,
    and status lowest because it only takes a handful of values.
    """

    username: float = 0.3
    email: float = 0.4
    domain: float = 0.15
    servername: float = 0.1
    status: float = 0.05

    def __post_init__(self) -> None:
        total = 0.0
        for name, value in self.items():
            if not 0.0 <= value <= 1.0:
                raise InvalidWeights(f"weight {name} out of [0, 1]: {value}")
            total += value
        if abs(total - 1.0) > 1e-9:
            raise InvalidWeights(f"weights sum to {total!r}, expected 1.0")

    def items(self) -> Iterator[tuple[str, float]]:
        for name in CANONICAL_FIELDS:
            yield name, getattr(self, name)

    @classmethod
    def from_mapping(cls, raw: Mapping[str, float]) -> "FieldWeights":
        extra = set(raw) - set(CANONICAL_FIELDS)
        if extra:
            raise InvalidWeights(f"unknown weight fields: {sorted(extra)}")
        missing = set(CANONICAL_FIELDS) - set(raw)
        if missing:
            raise InvalidWeights(f"missing weight fields: {sorted(missing)}")
        return cls(**{name: float(raw[name]) for name in CANONICAL_FIELDS})

    @classmethod
    def normalized(cls, raw: Mapping[str, float]) -> "FieldWeights":
        """Build weights from any positive mapping by dividing by its sum."""
        total = sum(raw.get(name, 0.0) for name in CANONICAL_FIELDS)
        if total <= 0.0:
            raise InvalidWeights("weights must have a positive sum")
        return cls.from_mapping(
            {name: raw.get(name, 0.0) / total for name in CANONICAL_FIELDS}
        )


def field_similarities(a: Record, b: Record) -> dict[str, float]:
    return {
        name: similarity(a.field_value(name), b.field_value(name))
        for name in CANONICAL_FIELDS
    }


def composite_score(
    a: Record,
    b: Record,
    weights: FieldWeights | None = None,
    counter: OpCounter | None = None,
) -> float:
    """Weighted sum of per-field similarities; one counted verification."""
    score, _ = _scored(a, b, weights or FieldWeights(), counter)
    return score


def _scored(
    a: Record, b: Record, weights: FieldWeights, counter: OpCounter | None
) -> tuple[float, dict[str, float]]:
    sims = field_similarities(a, b)
    if counter is not None:
        counter.add(1)
    return sum(weight * sims[name] for name, weight in weights.items()), sims


# Decision JSON lists per-field scores heaviest weight first.
_WIRE_FIELD_ORDER = ("email", "username", "domain", "servername", "status")


@dataclass
class MatchDecision:
    """Verification outcome for one query."""

    query_id: str
    best_ref_id: str | None
    score: float
    per_field: dict[str, float]
    accepted: bool

    def to_json_obj(self) -> dict:
        return {
            "query_id": self.query_id,
            "best_ref_id": self.best_ref_id,
            "score": self.score,
            "accepted": self.accepted,
            "per_field": {
                name: self.per_field.get(name, 0.0) for name in _WIRE_FIELD_ORDER
            },
        }


def _check_threshold(threshold: float) -> None:
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1] (got {threshold})")


def refs_by_id(refs: Iterable[Record]) -> dict[str, Record]:
    table: dict[str, Record] = {}
    for record in refs:
        if record.record_id in table:
            raise DuplicateId(f"duplicate reference id {record.record_id!r}")
        table[record.record_id] = record
    return table


def reconsider(
    query: Record,
    candidates: CandidateSet,
    refs: Mapping[str, Record],
    weights: FieldWeights | None = None,
    threshold: float = 0.75,
    counter: OpCounter | None = None,
) -> MatchDecision:
    """Score every candidate and decide.

    Candidates arrive ordered (retrieval similarity desc, ref id asc) and only
    a strictly better composite displaces the current best, so composite ties
    resolve by retrieval similarity, then ref id, without extra bookkeeping.
    An empty candidate set yields a rejection with score 0.
    """
    _check_threshold(threshold)
    weights = weights or FieldWeights()
    best_id: str | None = None
    best_score = 0.0
    best_fields = {name: 0.0 for name in CANONICAL_FIELDS}
    for ref_id, _retrieval_sim in candidates.neighbors:
        ref = refs.get(ref_id)
        if ref is None:
            raise UnknownRefId(f"candidate ref {ref_id!r} not in reference set")
        score, sims = _scored(query, ref, weights, counter)
        if best_id is None or score > best_score:
            best_id, best_score, best_fields = ref_id, score, sims
    return MatchDecision(
        query_id=candidates.query_id or query.record_id,
        best_ref_id=best_id,
        score=best_score if best_id is not None else 0.0,
        per_field=best_fields,
        accepted=best_id is not None and best_score >= threshold,
    )


def decide_all_pairs(
    queries: Sequence[Record],
    refs: Sequence[Record],
    weights: FieldWeights | None = None,
    threshold: float = 0.75,
    counter: OpCounter | None = None,
) -> list[MatchDecision]:
    """Verification-only baseline: score every query against every reference.

    No retrieval stage, so ties break by ref id alone. Costs exactly
    len(queries) * len(refs) counted verifications.
    """
    _check_threshold(threshold)
    weights = weights or FieldWeights()
    table = refs_by_id(refs)
    ordered_refs = sorted(table.items())
    decisions = []
    for query in queries:
        best_id: str | None = None
        best_score = 0.0
        best_fields = {name: 0.0 for name in CANONICAL_FIELDS}
        for ref_id, ref in ordered_refs:
            score, sims = _scored(query, ref, weights, counter)
            if best_id is None or score > best_score:
                best_id, best_score, best_fields = ref_id, score, sims
        decisions.append(
            MatchDecision(
                query_id=query.record_id,
                best_ref_id=best_id,
                score=best_score if best_id is not None else 0.0,
                per_field=best_fields,
                accepted=best_id is not None and best_score >= threshold,
            )
        )
    return decisions


def write_decisions(decisions: Sequence[MatchDecision], path: str | os.PathLike[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for decision in decisions:
            fh.write(json.dumps(decision.to_json_obj(), ensure_ascii=False) + "\n")


def read_decisions(path: str | os.PathLike[str]) -> list[MatchDecision]:
    decisions: list[MatchDecision] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_num, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{line_num}"
            try:
                obj = json.loads(line)
                decisions.append(
                    MatchDecision(
                        query_id=obj["query_id"],
                        best_ref_id=obj["best_ref_id"],
                        score=float(obj["score"]),
                        per_field={k: float(v) for k, v in obj["per_field"].items()},
                        accepted=bool(obj["accepted"]),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise MalformedInput(f"{where}: bad decision line ({exc})") from exc
    return decisions
