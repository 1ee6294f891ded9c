"""Synthetic corpora and ground truth.

The generator builds a reference set of distinct account identities, then
derives queries by corrupting sampled references with controllable noise.
Optional distractor queries get fresh identities and no truth link, so
decision metrics can observe true negatives. Ground truth can also be
computed from embeddings alone by exhaustive cosine comparison, which is the
oracle the retrieval indexes are judged against.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .counters import OpCounter
from .embedding import EmbeddingBatch
from .errors import DimensionMismatch, InvalidSpec, MalformedInput, MissingColumn
from .index import _top_rows
from .records import CANONICAL_FIELDS, Record, Source

_NAMES = [
    "maresha", "tariq", "yusuf", "amira", "bashir", "carmen", "dmitri",
    "elena", "farid", "gitta", "hamid", "ingrid", "jamal", "katya",
    "leila", "marwan", "nadia", "omar", "priya", "qasim", "ravi",
    "sharifi", "tanvir", "ursula", "viktor", "wasim", "xenia", "yasmin",
    "zubair", "anton", "bridget", "cyrus", "delia", "emeka", "fatima",
    "gustav", "halima", "igor", "jolanta", "kwame", "lucia", "mansoor",
    "nikolai", "oksana", "pavel", "quinn", "rosalind", "sergei", "tamar",
    "ulrich", "vanessa", "walid", "xiomara", "yevgeni", "zahra",
]

_MAIL_DOMAINS = [
    "email.com", "mailbox.org", "postfach.net", "courier.io", "letterbox.co",
    "inbox.example", "mailhub.net", "relay.org", "pigeon.post", "dispatch.io",
]

_WEB_DOMAINS = [
    "example.com", "acmewidgets.com", "northwind.net", "contoso.org",
    "fabrikam.io", "initech.biz", "globex.example", "umbrella.net",
    "wayne.enterprises", "stark.industries", "tyrell.corp", "cyberdyne.systems",
    "aperture.science", "hooli.xyz", "piedpiper.example", "vandelay.industries",
]

_STATUSES = ["active", "inactive", "suspended", "pending"]

# Distractor identities draw from vocabularies disjoint from the lists above,
# so a distractor can never resemble a reference no matter the noise level.
_DISTRACTOR_NAMES = [
    "aproximado", "brumoso", "cenizas", "destello", "espejismo", "fulgor",
    "granizo", "hondonada", "islote", "jilguero", "kiosko", "lumbre",
    "mirlo", "nacar", "ocaso", "penumbra", "quejido", "relampago",
    "susurro", "tromba", "umbral", "vendaval", "zarzamora", "alborada",
    "borrasca", "celaje", "deriva", "escarcha", "fronda", "galerna",
]

_DISTRACTOR_MAIL_DOMAINS = [
    "nullroute.example", "blackhole.invalid", "discard.test", "voidmail.example",
    "nowhere.invalid", "sinkhole.test",
]

_DISTRACTOR_WEB_DOMAINS = [
    "unmatched.example", "orphan.invalid", "stray.test", "lonely.example",
    "unpaired.invalid", "solo.test", "isolated.example", "detached.invalid",
]

_TYPO_ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789"


@dataclass(frozen=True)
class GroundTruthPair:
    """One known (query, reference) match."""

    query_id: str
    ref_id: str


@dataclass(frozen=True)
class NoiseSpec:
    """How hard queries are corrupted relative to their source reference.

    typo_rate is the Poisson mean of character edits per field; the other
    rates are per-field Bernoulli probabilities. Noise applies to field
    values only, never to record ids.
    """

    typo_rate: float = 0.0
    field_drop_rate: float = 0.0
    case_flip_rate: float = 0.0
    swap_adjacent_rate: float = 0.0
    seed: int = 42

    def __post_init__(self) -> None:
        if not 0.0 <= self.typo_rate <= 2.0:
            raise InvalidSpec(f"typo_rate out of [0, 2]: {self.typo_rate}")
        for name in ("field_drop_rate", "case_flip_rate", "swap_adjacent_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidSpec(f"{name} out of [0, 1]: {value}")
        if self.seed < 0:
            raise InvalidSpec(f"seed must be non-negative (got {self.seed})")


def apply_noise(record: Record, spec: NoiseSpec, rng: np.random.Generator) -> Record:
    """Corrupt one record's fields; the id and source pass through.

    Per field, in canonical order: maybe drop the whole value (which consumes
    the only draw for that field), else apply Poisson-many character edits,
    maybe swap one adjacent pair, maybe flip the case of one character. The
    draw order is fixed so a given rng state always yields the same corruption.
    """
    noisy: dict[str, str] = {}
    for name in CANONICAL_FIELDS:
        value = record.field_value(name)
        if rng.random() < spec.field_drop_rate:
            noisy[name] = ""
            continue
        for _ in range(int(rng.poisson(spec.typo_rate))):
            value = _random_edit(value, rng)
        if rng.random() < spec.swap_adjacent_rate and len(value) >= 2:
            pos = int(rng.integers(0, len(value) - 1))
            value = value[:pos] + value[pos + 1] + value[pos] + value[pos + 2 :]
        if rng.random() < spec.case_flip_rate and value:
            pos = int(rng.integers(0, len(value)))
            value = value[:pos] + value[pos].swapcase() + value[pos + 1 :]
        noisy[name] = value
    return Record(record_id=record.record_id, source=record.source, fields=noisy)


def _random_edit(value: str, rng: np.random.Generator) -> str:
    op = int(rng.integers(0, 3))
    if not value:
        op = 0  # only insertion makes sense on an empty string
    if op == 0:  # insert
        pos = int(rng.integers(0, len(value) + 1))
        char = _TYPO_ALPHABET[int(rng.integers(0, len(_TYPO_ALPHABET)))]
        return value[:pos] + char + value[pos:]
    pos = int(rng.integers(0, len(value)))
    if op == 1:  # substitute
        char = _TYPO_ALPHABET[int(rng.integers(0, len(_TYPO_ALPHABET)))]
        return value[:pos] + char + value[pos + 1 :]
    return value[:pos] + value[pos + 1 :]  # delete


def _identity(
    rng: np.random.Generator, idx: int, distractor: bool = False
) -> dict[str, str]:
    names = _DISTRACTOR_NAMES if distractor else _NAMES
    mail_domains = _DISTRACTOR_MAIL_DOMAINS if distractor else _MAIL_DOMAINS
    web_domains = _DISTRACTOR_WEB_DOMAINS if distractor else _WEB_DOMAINS
    server_lo, server_hi = (500, 1000) if distractor else (1, 500)
    name = names[int(rng.integers(0, len(names)))]
    if rng.random() < 0.5:
        name = f"{name}{int(rng.integers(0, 1000))}"
    mail_domain = mail_domains[int(rng.integers(0, len(mail_domains)))]
    return {
        "username": name,
        # The idx suffix keeps every identity's email globally unique.
        "email": f"{name}.{idx}@{mail_domain}",
        "domain": web_domains[int(rng.integers(0, len(web_domains)))],
        "servername": f"server{int(rng.integers(server_lo, server_hi))}",
        "status": _STATUSES[int(rng.integers(0, len(_STATUSES)))],
    }


def generate_corpus(
    m: int,
    n: int,
    noise: NoiseSpec,
    distractor_rate: float = 0.0,
) -> tuple[list[Record], list[Record], list[GroundTruthPair]]:
    """Build m references, n queries, and the truth linking them.

    Each non-distractor query is a noised copy of a distinct reference.
    Distractors (round(n * distractor_rate) of the queries, at random
    positions) are fresh identities from reserved vocabularies, so they get
    no truth row and never resemble any reference. Everything is driven by
    noise.seed, so equal arguments give byte-identical corpora.
    """
    if m < 1:
        raise InvalidSpec(f"m must be >= 1 (got {m})")
    if n < 0:
        raise InvalidSpec(f"n must be >= 0 (got {n})")
    if n > m:
        raise InvalidSpec(f"need n <= m, got n={n} m={m}")
    if not 0.0 <= distractor_rate <= 1.0:
        raise InvalidSpec(f"distractor_rate out of [0, 1]: {distractor_rate}")

    rng = np.random.default_rng(noise.seed)
    n_distractors = int(round(n * distractor_rate))

    identities = [
        _identity(rng, i, distractor=i >= m) for i in range(m + n_distractors)
    ]
    refs = [
        Record(record_id=f"ref-{i:05d}", source=Source.REFERENCE, fields=identities[i])
        for i in range(m)
    ]

    linked_targets = rng.choice(m, size=n - n_distractors, replace=False)
    distractor_slots = set(
        int(s) for s in rng.choice(n, size=n_distractors, replace=False)
    ) if n_distractors else set()

    queries: list[Record] = []
    truth: list[GroundTruthPair] = []
    next_linked = 0
    next_distractor = m
    for slot in range(n):
        query_id = f"qry-{slot:05d}"
        if slot in distractor_slots:
            base = Record(query_id, Source.QUERY, identities[next_distractor])
            next_distractor += 1
        else:
            target = int(linked_targets[next_linked])
            next_linked += 1
            base = Record(query_id, Source.QUERY, dict(refs[target].fields))
            truth.append(GroundTruthPair(query_id=query_id, ref_id=refs[target].record_id))
        queries.append(apply_noise(base, noise, rng))
    return refs, queries, truth


def brute_force_pairs(
    queries: EmbeddingBatch,
    refs: EmbeddingBatch,
    threshold: float = 0.8,
    counter: OpCounter | None = None,
) -> list[GroundTruthPair]:
    """Pair each query with its exact cosine argmax, kept only above threshold.

    Compares every query against every reference (the counter, when given,
    grows by exactly n * m). Argmax ties break by ascending ref id, the same
    rule retrieval uses. The threshold comparison is strict.
    """
    if not -1.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (-1, 1] (got {threshold})")
    if queries.dim != refs.dim:
        raise DimensionMismatch(
            f"query dim {queries.dim} does not match ref dim {refs.dim}"
        )
    ref_matrix = refs.vectors.astype(np.float64)
    id_keys = np.asarray(refs.record_ids)
    pairs: list[GroundTruthPair] = []
    chunk = 256
    for start in range(0, len(queries), chunk):
        block = queries.vectors[start : start + chunk].astype(np.float64)
        sims_block = block @ ref_matrix.T
        if counter is not None:
            counter.add(block.shape[0] * len(refs))
        for i in range(block.shape[0]):
            sims = sims_block[i]
            best = _top_rows(sims, id_keys, 1)[0]
            if sims[best] > threshold:
                pairs.append(
                    GroundTruthPair(
                        query_id=queries.record_ids[start + i],
                        ref_id=refs.record_ids[int(best)],
                    )
                )
    return pairs


def write_truth(pairs: list[GroundTruthPair], path: str | os.PathLike[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query_id", "ref_id"])
        for pair in pairs:
            writer.writerow([pair.query_id, pair.ref_id])


def read_truth(path: str | os.PathLike[str]) -> list[GroundTruthPair]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise MalformedInput(f"{path}: no header row")
        for column in ("query_id", "ref_id"):
            if column not in header:
                raise MissingColumn(f"{path}: missing column {column!r}")
        qi, ri = header.index("query_id"), header.index("ref_id")
        pairs = []
        for row_num, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise MalformedInput(f"{path}:{row_num}: wrong number of fields")
            pairs.append(GroundTruthPair(query_id=row[qi], ref_id=row[ri]))
    return pairs
