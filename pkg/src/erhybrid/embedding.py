"""Embedding providers, a training-loss diagnostic, and a binary vector cache.

Three providers share one contract (embed serialized sentences into
unit-norm float32 vectors): a seeded character n-gram hasher that needs no
training data, a TF-IDF hasher fit on the reference corpus, and a client for
a remote embedding service. Degenerate inputs (empty text, zero vectors) map
to the first standard basis vector so every text embeds to something of unit
norm.
"""

from __future__ import annotations

import hashlib
import math
import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np
import requests

from . import _binio
from .errors import (
    DimensionMismatch,
    DuplicateId,
    EmptyBatch,
    ProtocolError,
    ProviderUnavailable,
)
from .records import Record, serialize

CACHE_MAGIC = b"ERHV1"

REMOTE_CHUNK = 256


def _basis_vector(dim: int) -> np.ndarray:
    vec = np.zeros(dim, dtype=np.float32)
    vec[0] = 1.0
    return vec


def _unit_or_basis(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return _basis_vector(vec.shape[0])
    return (vec / norm).astype(np.float32)


class EmbeddingProvider(Protocol):
    @property
    def tag(self) -> str: ...

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray: ...


@dataclass
class EmbeddingBatch:
    """Vectors for a list of records, in record order.

    `vectors` is an (n, dim) float32 array; `provider_tag` identifies the
    provider and parameters that produced it, so caches are never silently
    reused across providers.
    """

    record_ids: list[str]
    vectors: np.ndarray
    provider_tag: str

    def __post_init__(self) -> None:
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2:
            raise DimensionMismatch(
                f"expected a 2-d vector array, got shape {self.vectors.shape}"
            )
        if len(self.record_ids) != self.vectors.shape[0]:
            raise DimensionMismatch(
                f"{len(self.record_ids)} ids for {self.vectors.shape[0]} vectors"
            )
        if len(set(self.record_ids)) != len(self.record_ids):
            raise DuplicateId("batch contains duplicate record ids")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.record_ids)


class _SignedHasher:
    """Seeded token -> (bucket, sign) map, stable across processes.

    Uses keyed blake2b rather than hash(): the builtin is salted per process
    and would break cache reuse and every determinism guarantee.
    """

    def __init__(self, dim: int, seed: int):
        self._dim = dim
        self._key = seed.to_bytes(8, "little")
        self._slots: dict[str, tuple[int, float]] = {}

    def slot(self, token: str) -> tuple[int, float]:
        hit = self._slots.get(token)
        if hit is not None:
            return hit
        digest = hashlib.blake2b(
            token.encode("utf-8"), digest_size=8, key=self._key
        ).digest()
        value = int.from_bytes(digest, "little")
        sign = 1.0 if value & (1 << 63) == 0 else -1.0
        bucket = (value & ((1 << 63) - 1)) % self._dim
        self._slots[token] = (bucket, sign)
        return bucket, sign


def _check_hash_params(dim: int, n: int, seed: int) -> None:
    if dim < 2:
        raise ValueError(f"dim must be >= 2 (got {dim})")
    if not 2 <= n <= 5:
        raise ValueError(f"n-gram length must be in [2, 5] (got {n})")
    if seed < 0:
        raise ValueError(f"seed must be non-negative (got {seed})")


def hash_ngram_embed(text: str, dim: int = 768, n: int = 3, seed: int = 42) -> np.ndarray:
    """Embed one text as signed character n-gram counts hashed into dim buckets.

    The text is lowercased, every length-n window contributes +-1 to one
    bucket, and the result is L2-normalized. Text with no n-grams (including
    empty text) maps to the first basis vector.
    """
    _check_hash_params(dim, n, seed)
    return _hash_embed_one(text, dim, n, _SignedHasher(dim, seed))


def _hash_embed_one(text: str, dim: int, n: int, hasher: _SignedHasher) -> np.ndarray:
    lowered = text.lower()
    if len(lowered) < n:
        return _basis_vector(dim)
    vec = np.zeros(dim, dtype=np.float64)
    for i in range(len(lowered) - n + 1):
        bucket, sign = hasher.slot(lowered[i : i + n])
        vec[bucket] += sign
    return _unit_or_basis(vec)


class HashNgramProvider:
    """Stateless n-gram hashing provider; the cache of seen n-grams is only a
    speedup and never changes output."""

    def __init__(self, dim: int = 768, n: int = 3, seed: int = 42):
        _check_hash_params(dim, n, seed)
        self.dim = dim
        self.n = n
        self.seed = seed
        self._hasher = _SignedHasher(dim, seed)

    @property
    def tag(self) -> str:
        return f"hash_ngram(dim={self.dim},n={self.n},seed={self.seed})"

    def embed_text(self, text: str) -> np.ndarray:
        return _hash_embed_one(text, self.dim, self.n, self._hasher)

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            out[i] = self.embed_text(text)
        return out


class TfidfProvider:
    """Hashed TF-IDF over whitespace tokens, fit on a reference corpus.

    IDF uses the smoothed form ln((1 + N) / (1 + df)) + 1, so a token present
    in every document keeps weight 1 and an unseen query token gets the
    maximum ln(1 + N) + 1.
    """

    def __init__(self, dim: int = 768, seed: int = 42):
        if dim < 2:
            raise ValueError(f"dim must be >= 2 (got {dim})")
        if seed < 0:
            raise ValueError(f"seed must be non-negative (got {seed})")
        self.dim = dim
        self.seed = seed
        self.n_docs = 0
        self.idf: dict[str, float] = {}
        self._hasher = _SignedHasher(dim, seed)

    @staticmethod
    def _tokenize(text: str) -> list[str]:
        return text.lower().split()

    def fit(self, texts: Sequence[str]) -> "TfidfProvider":
        if not texts:
            raise EmptyBatch("cannot fit TF-IDF on an empty corpus")
        df: Counter[str] = Counter()
        for text in texts:
            df.update(set(self._tokenize(text)))
        self.n_docs = len(texts)
        self.idf = {
            token: math.log((1 + self.n_docs) / (1 + count)) + 1.0
            for token, count in df.items()
        }
        return self

    def idf_value(self, token: str) -> float:
        if self.n_docs == 0:
            raise ValueError("fit() must run before idf lookups")
        default = math.log(1 + self.n_docs) + 1.0
        return self.idf.get(token.lower(), default)

    @property
    def tag(self) -> str:
        return f"tfidf(dim={self.dim},seed={self.seed},docs={self.n_docs})"

    def embed_text(self, text: str) -> np.ndarray:
        if self.n_docs == 0:
            raise ValueError("fit() must run before embedding")
        tokens = self._tokenize(text)
        if not tokens:
            return _basis_vector(self.dim)
        vec = np.zeros(self.dim, dtype=np.float64)
        for token, count in Counter(tokens).items():
            bucket, sign = self._hasher.slot(token)
            vec[bucket] += sign * count * self.idf_value(token)
        return _unit_or_basis(vec)

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            out[i] = self.embed_text(text)
        return out


class RemoteProvider:
    """Client for an embedding service speaking the /embed wire protocol.

    Texts go out in chunks of at most REMOTE_CHUNK; vectors come back row per
    text and are re-normalized locally, so downstream code never depends on
    the server honoring the normalize flag.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.model = "?"
        self.dim: int | None = None

    @property
    def tag(self) -> str:
        return f"remote(model={self.model},dim={self.dim})"

    def _post_chunk(self, texts: Sequence[str]) -> np.ndarray:
        try:
            resp = requests.post(
                self.endpoint + "/embed",
                json={"texts": list(texts), "normalize": True},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise ProviderUnavailable(f"embedding service unreachable: {exc}") from exc
        if resp.status_code == 503:
            raise ProviderUnavailable("embedding service not ready (503)")
        if resp.status_code != 200:
            raise ProtocolError(f"embedding service returned HTTP {resp.status_code}")
        try:
            body = resp.json()
        except ValueError as exc:
            raise ProtocolError("embedding service returned non-JSON body") from exc
        try:
            rows = body["embeddings"]
            dim = int(body["dim"])
            model = str(body["model"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed embed response: {exc}") from exc
        if len(rows) != len(texts):
            raise ProtocolError(
                f"asked for {len(texts)} embeddings, got {len(rows)}"
            )
        matrix = np.asarray(rows, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] != dim:
            raise ProtocolError("embedding rows disagree with declared dim")
        if self.dim is not None and dim != self.dim:
            raise DimensionMismatch(
                f"service dim changed from {self.dim} to {dim} mid-run"
            )
        self.dim = dim
        self.model = model
        out = np.zeros((len(texts), dim), dtype=np.float32)
        for i in range(len(texts)):
            out[i] = _unit_or_basis(matrix[i])
        return out

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            if self.dim is None:
                self.healthcheck()
            return np.zeros((0, self.dim or 0), dtype=np.float32)
        chunks = [
            self._post_chunk(texts[i : i + REMOTE_CHUNK])
            for i in range(0, len(texts), REMOTE_CHUNK)
        ]
        return np.vstack(chunks)

    def healthcheck(self) -> dict:
        try:
            resp = requests.get(self.endpoint + "/healthz", timeout=self.timeout)
        except requests.RequestException as exc:
            raise ProviderUnavailable(f"embedding service unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderUnavailable(f"healthz returned HTTP {resp.status_code}")
        body = resp.json()
        if "dim" in body:
            self.dim = int(body["dim"])
        return body


def embed_records(records: Sequence[Record], provider: EmbeddingProvider) -> EmbeddingBatch:
    """Serialize records and embed the sentences, keeping record order."""
    texts = [serialize(record) for record in records]
    vectors = provider.embed_texts(texts)
    return EmbeddingBatch(
        record_ids=[record.record_id for record in records],
        vectors=vectors,
        provider_tag=provider.tag,
    )


def mnr_loss(anchors: np.ndarray, positives: np.ndarray) -> float:
    """Multiple-negatives ranking loss over aligned (anchor, positive) rows.

    Every other positive in the batch acts as an in-batch negative:
    mean over i of -log softmax_j(cos(a_i, p_j)) at j = i. Similarity scale
    is fixed at 1.0. A single pair always scores 0 by construction.
    """
    a = np.asarray(anchors, dtype=np.float64)
    p = np.asarray(positives, dtype=np.float64)
    if a.ndim != 2 or p.ndim != 2:
        raise DimensionMismatch("anchors and positives must be 2-d arrays")
    if a.shape != p.shape:
        raise DimensionMismatch(f"shape mismatch: {a.shape} vs {p.shape}")
    if a.shape[0] == 0:
        raise EmptyBatch("mnr_loss needs at least one pair")

    def _rows_unit(matrix: np.ndarray) -> np.ndarray:
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise ValueError("zero vector has no cosine similarity")
        return matrix / norms

    sims = _rows_unit(a) @ _rows_unit(p).T
    row_max = sims.max(axis=1, keepdims=True)
    log_denom = row_max[:, 0] + np.log(np.exp(sims - row_max).sum(axis=1))
    losses = log_denom - np.diag(sims)
    return float(losses.mean())


def save_cache(batch: EmbeddingBatch, path) -> None:
    """Write the batch to a checksummed binary file."""
    parts = [
        struct.pack("<I", batch.dim),
        struct.pack("<Q", len(batch)),
        _binio.pack_u16_str(batch.provider_tag),
    ]
    vectors = np.ascontiguousarray(batch.vectors, dtype="<f4")
    for i, record_id in enumerate(batch.record_ids):
        parts.append(_binio.pack_u16_str(record_id))
        parts.append(vectors[i].tobytes())
    with open(path, "wb") as fh:
        fh.write(_binio.seal_frame(CACHE_MAGIC, b"".join(parts)))


def load_cache(path) -> EmbeddingBatch:
    """Read a batch written by save_cache; vectors round-trip bit-exact."""
    with open(path, "rb") as fh:
        data = fh.read()
    payload = _binio.open_frame(data, CACHE_MAGIC, str(path))
    reader = _binio.PayloadReader(payload, str(path))
    dim = reader.u32()
    count = reader.u64()
    tag = reader.string()
    ids: list[str] = []
    vectors = np.zeros((count, dim), dtype=np.float32)
    for i in range(count):
        ids.append(reader.string())
        vectors[i] = reader.f32_array(dim)
    reader.expect_end()
    return EmbeddingBatch(record_ids=ids, vectors=vectors, provider_tag=tag)
