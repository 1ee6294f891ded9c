"""Sentence encoders behind the /embed endpoint.

Encoders return raw (unnormalized) float32 rows; the service layer applies
L2 normalization when the request asks for it, so the ``normalize`` flag is
observable in responses. Every encoder is deterministic for a fixed model
id: the same text always produces the same vector.
"""

from __future__ import annotations

import hashlib

import numpy as np

_HASH_PREFIX = "hash:"
_NGRAM = 3
_HASH_KEY = b"embed-service"


class HashEncoder:
    """Signed character n-gram hashing; a download-free stand-in encoder.

    Each lowercased 3-gram hashes to a bucket and a sign; the vector is the
    signed bucket count. Texts too short to yield any n-gram map to the
    first basis vector so no text embeds to zero.
    """

    def __init__(self, dim: int) -> None:
        if dim < 2:
            raise ValueError(f"encoder dim must be >= 2 (got {dim})")
        self.dim = dim
        self.model_id = f"{_HASH_PREFIX}{dim}"
        self._slots: dict[str, tuple[int, float]] = {}

    def _slot(self, gram: str) -> tuple[int, float]:
        cached = self._slots.get(gram)
        if cached is None:
            digest = hashlib.blake2b(
                gram.encode("utf-8"), digest_size=8, key=_HASH_KEY
            ).digest()
            value = int.from_bytes(digest, "big")
            cached = (value % self.dim, -1.0 if value >> 63 else 1.0)
            self._slots[gram] = cached
        return cached

    def encode(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float32)
        for row, text in enumerate(texts):
            lowered = text.lower()
            if len(lowered) < _NGRAM:
                out[row, 0] = 1.0
                continue
            for start in range(len(lowered) - _NGRAM + 1):
                bucket, sign = self._slot(lowered[start : start + _NGRAM])
                out[row, bucket] += sign
            if not out[row].any():
                out[row, 0] = 1.0
        return out


class SentenceTransformerEncoder:
    """Thin wrapper over sentence-transformers with mean pooling.

    Import and model download happen here, at load time, not at service
    start, so environments without the hub can still run hash models.
    SentenceTransformer applies the model's pooling itself; mean pooling is
    the library default when the checkpoint ships none.
    """

    def __init__(self, model_id: str) -> None:
        from sentence_transformers import SentenceTransformer

        self.model_id = model_id
        self._model = SentenceTransformer(model_id)
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode(self, texts: list[str]) -> np.ndarray:
        vectors = self._model.encode(
            texts, convert_to_numpy=True, normalize_embeddings=False
        )
        return np.asarray(vectors, dtype=np.float32).reshape(len(texts), self.dim)


def make_encoder(model_id: str):
    """Build the encoder a model id names; `hash:<dim>` is built in."""
    if model_id.startswith(_HASH_PREFIX):
        suffix = model_id[len(_HASH_PREFIX) :]
        try:
            dim = int(suffix)
        except ValueError:
            raise ValueError(f"bad hash model id {model_id!r}: dim must be an integer")
        return HashEncoder(dim)
    return SentenceTransformerEncoder(model_id)


def normalize_rows(vectors: np.ndarray) -> np.ndarray:
    """L2-normalize each row; rows that are already zero stay zero."""
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return (vectors / norms).astype(np.float32)
