"""Embedding providers, the MNR diagnostic, and the binary vector cache."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from erhybrid.embedding import (
    CACHE_MAGIC,
    REMOTE_CHUNK,
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
from erhybrid.errors import (
    CorruptCache,
    DimensionMismatch,
    DuplicateId,
    EmptyBatch,
    ProtocolError,
    ProviderUnavailable,
    VersionMismatch,
)
from erhybrid.records import serialize


def _basis(dim):
    vec = np.zeros(dim, dtype=np.float32)
    vec[0] = 1.0
    return vec


# ---------------------------------------------------------------- hash n-gram


def test_hash_embed_unit_norm():
    vec = hash_ngram_embed("the quick brown fox", dim=64)
    assert vec.dtype == np.float32
    assert math.isclose(float(np.linalg.norm(vec)), 1.0, abs_tol=1e-6)


def test_hash_embed_short_text_is_first_basis_vector():
    assert np.array_equal(hash_ngram_embed("", dim=16), _basis(16))
    assert np.array_equal(hash_ngram_embed("ab", dim=16, n=3), _basis(16))


def test_hash_embed_case_insensitive():
    a = hash_ngram_embed("Maresha", dim=64)
    b = hash_ngram_embed("maresha", dim=64)
    assert np.array_equal(a, b)


def test_hash_embed_deterministic_across_instances():
    one = HashNgramProvider(dim=64, n=3, seed=9)
    two = HashNgramProvider(dim=64, n=3, seed=9)
    texts = ["alpha beta", "gamma delta"]
    assert np.array_equal(one.embed_texts(texts), two.embed_texts(texts))


def test_hash_embed_seed_changes_vectors():
    text = "the quick brown fox"
    a = hash_ngram_embed(text, dim=64, seed=1)
    b = hash_ngram_embed(text, dim=64, seed=2)
    assert not np.array_equal(a, b)


def test_hash_embed_near_duplicates_score_higher(make_record):
    base = serialize(make_record())
    near = serialize(make_record(username="Mareshaa"))
    far = serialize(
        make_record(
            username="zubair",
            email="zubair.9@mailhub.net",
            domain="initech.biz",
            servername="server431",
            status="pending",
        )
    )
    provider = HashNgramProvider(dim=256)
    a, b, c = provider.embed_texts([base, near, far]).astype(np.float64)
    assert a @ b > a @ c


def test_hash_params_validated():
    with pytest.raises(ValueError, match="dim"):
        hash_ngram_embed("x", dim=1)
    with pytest.raises(ValueError, match="n-gram"):
        hash_ngram_embed("x", n=1)
    with pytest.raises(ValueError, match="n-gram"):
        hash_ngram_embed("x", n=6)
    with pytest.raises(ValueError, match="seed"):
        hash_ngram_embed("x", seed=-1)


def test_hash_provider_tag_names_parameters():
    assert HashNgramProvider(dim=32, n=4, seed=7).tag == "hash_ngram(dim=32,n=4,seed=7)"


@settings(max_examples=50)
@given(st.text(max_size=40))
def test_hash_embed_always_unit_norm(text):
    vec = hash_ngram_embed(text, dim=32)
    assert math.isclose(float(np.linalg.norm(vec)), 1.0, abs_tol=1e-6)


# ------------------------------------------------------------------- tf-idf


def test_tfidf_token_in_every_doc_keeps_weight_one():
    provider = TfidfProvider(dim=64).fit(["the cat", "the dog", "the fish"])
    assert math.isclose(provider.idf_value("the"), 1.0, abs_tol=1e-12)


def test_tfidf_unseen_token_gets_max_idf():
    provider = TfidfProvider(dim=64).fit(["a b", "a c", "a d"])
    assert math.isclose(provider.idf_value("zzz"), math.log(4) + 1.0, abs_tol=1e-12)


def test_tfidf_rare_token_weighs_more_than_common():
    provider = TfidfProvider(dim=64).fit(["common rare", "common", "common"])
    assert provider.idf_value("rare") > provider.idf_value("common")


def test_tfidf_expected_vector_from_counts():
    provider = TfidfProvider(dim=64, seed=3).fit(["aa bb", "aa cc"])
    expected = np.zeros(64)
    for token, tf in (("aa", 2.0), ("bb", 1.0)):
        bucket, sign = provider._hasher.slot(token)
        expected[bucket] += sign * tf * provider.idf_value(token)
    expected /= np.linalg.norm(expected)
    got = provider.embed_text("aa bb aa")
    assert np.allclose(got, expected, atol=1e-6)


def test_tfidf_disjoint_tokens_are_orthogonal():
    provider = TfidfProvider(dim=64, seed=0).fit(["red green", "blue violet"])
    buckets = {token: provider._hasher.slot(token)[0] for token in
               ("red", "green", "blue", "violet")}
    # The check is only meaningful when the hashed buckets do not collide.
    assert len(set(buckets.values())) == 4
    a = provider.embed_text("red green").astype(np.float64)
    b = provider.embed_text("blue violet").astype(np.float64)
    assert math.isclose(a @ b, 0.0, abs_tol=1e-9)


def test_tfidf_empty_text_is_first_basis_vector():
    provider = TfidfProvider(dim=16).fit(["something"])
    assert np.array_equal(provider.embed_text("   "), _basis(16))


def test_tfidf_fit_empty_corpus_rejected():
    with pytest.raises(EmptyBatch):
        TfidfProvider(dim=16).fit([])


def test_tfidf_embed_before_fit_rejected():
    with pytest.raises(ValueError, match="fit"):
        TfidfProvider(dim=16).embed_text("x")


def test_tfidf_tag_includes_corpus_size():
    provider = TfidfProvider(dim=32, seed=1).fit(["a", "b"])
    assert provider.tag == "tfidf(dim=32,seed=1,docs=2)"


# ----------------------------------------------------------- embedding batch


def test_batch_coerces_to_float32():
    batch = EmbeddingBatch(["a"], np.ones((1, 4), dtype=np.float64), "t")
    assert batch.vectors.dtype == np.float32
    assert batch.dim == 4 and len(batch) == 1


def test_batch_rejects_duplicate_ids():
    with pytest.raises(DuplicateId):
        EmbeddingBatch(["a", "a"], np.ones((2, 4)), "t")


def test_batch_rejects_count_mismatch():
    with pytest.raises(DimensionMismatch):
        EmbeddingBatch(["a", "b"], np.ones((3, 4)), "t")


def test_batch_rejects_non_2d():
    with pytest.raises(DimensionMismatch):
        EmbeddingBatch(["a"], np.ones(4), "t")


def test_embed_records_keeps_order(make_record):
    records = [make_record(record_id=f"r{i}", username=f"user{i}") for i in range(4)]
    batch = embed_records(records, HashNgramProvider(dim=32))
    assert batch.record_ids == ["r0", "r1", "r2", "r3"]
    solo = hash_ngram_embed(serialize(records[2]), dim=32)
    assert np.array_equal(batch.vectors[2], solo)


# ---------------------------------------------------------------------- mnr


def test_mnr_single_pair_is_zero():
    anchors = np.array([[0.6, 0.8]])
    assert mnr_loss(anchors, anchors) == pytest.approx(0.0, abs=1e-12)


def test_mnr_identical_batch_is_log_n():
    rows = np.tile([1.0, 0.0, 0.0], (4, 1))
    assert mnr_loss(rows, rows) == pytest.approx(math.log(4), abs=1e-9)


def test_mnr_orthogonal_pairs():
    rows = np.eye(2)
    expected = -math.log(math.e / (math.e + 1.0))
    assert mnr_loss(rows, rows) == pytest.approx(expected, abs=1e-6)


def test_mnr_scale_invariant_in_row_norms():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(5, 8))
    p = rng.normal(size=(5, 8))
    assert mnr_loss(a, p) == pytest.approx(mnr_loss(3.0 * a, 0.5 * p), abs=1e-12)


def test_mnr_shape_errors():
    with pytest.raises(DimensionMismatch):
        mnr_loss(np.ones((2, 3)), np.ones((3, 3)))
    with pytest.raises(DimensionMismatch):
        mnr_loss(np.ones(3), np.ones(3))
    with pytest.raises(EmptyBatch):
        mnr_loss(np.ones((0, 3)), np.ones((0, 3)))
    with pytest.raises(ValueError, match="zero vector"):
        mnr_loss(np.zeros((2, 3)), np.ones((2, 3)))


@settings(max_examples=50)
@given(st.integers(2, 6), st.integers(2, 5), st.integers(0, 10_000))
def test_mnr_is_nonnegative(n, dim, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, dim)) + 0.01
    p = rng.normal(size=(n, dim)) + 0.01
    assert mnr_loss(a, p) >= -1e-12


# -------------------------------------------------------------------- cache


def _small_batch():
    rng = np.random.default_rng(5)
    vectors = rng.normal(size=(3, 6)).astype(np.float32)
    return EmbeddingBatch(["x", "y", "z"], vectors, "hash_ngram(dim=6,n=3,seed=42)")


def test_cache_round_trip_bit_exact(tmp_path):
    batch = _small_batch()
    path = tmp_path / "vectors.erhv"
    save_cache(batch, path)
    back = load_cache(path)
    assert back.record_ids == batch.record_ids
    assert back.provider_tag == batch.provider_tag
    assert back.vectors.tobytes() == batch.vectors.tobytes()


def test_cache_truncated_file(tmp_path):
    path = tmp_path / "vectors.erhv"
    save_cache(_small_batch(), path)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(CorruptCache):
        load_cache(path)


def test_cache_flipped_byte_fails_checksum(tmp_path):
    path = tmp_path / "vectors.erhv"
    save_cache(_small_batch(), path)
    data = bytearray(path.read_bytes())
    data[len(data) // 2] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(CorruptCache, match="checksum"):
        load_cache(path)


def test_cache_wrong_magic(tmp_path):
    path = tmp_path / "vectors.erhv"
    save_cache(_small_batch(), path)
    data = bytearray(path.read_bytes())
    data[0:4] = b"NOPE"
    path.write_bytes(bytes(data))
    with pytest.raises(CorruptCache, match="magic"):
        load_cache(path)


def test_cache_future_version_rejected(tmp_path):
    path = tmp_path / "vectors.erhv"
    save_cache(_small_batch(), path)
    data = bytearray(path.read_bytes())
    assert data[:5] == CACHE_MAGIC
    data[4] = ord("2")
    path.write_bytes(bytes(data))
    with pytest.raises(VersionMismatch):
        load_cache(path)


def test_cache_tiny_file_is_corrupt(tmp_path):
    path = tmp_path / "vectors.erhv"
    path.write_bytes(b"ER")
    with pytest.raises(CorruptCache, match="short"):
        load_cache(path)


# ------------------------------------------------------------------- remote


def test_remote_embeds_and_renormalizes(embed_stub):
    provider = RemoteProvider(embed_stub.url)
    vectors = provider.embed_texts(["one", "two", "three"])
    assert vectors.shape == (3, embed_stub.dim)
    norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
    assert np.allclose(norms, 1.0, atol=1e-6)
    assert provider.dim == embed_stub.dim
    assert "stub" in provider.tag


def test_remote_is_deterministic(embed_stub):
    provider = RemoteProvider(embed_stub.url)
    a = provider.embed_texts(["same text"])
    b = provider.embed_texts(["same text"])
    assert np.array_equal(a, b)


def test_remote_chunks_large_batches(embed_stub):
    texts = [f"text {i}" for i in range(REMOTE_CHUNK * 2 + 10)]
    vectors = RemoteProvider(embed_stub.url).embed_texts(texts)
    assert vectors.shape[0] == len(texts)
    sizes = [len(req["texts"]) for req in embed_stub.requests]
    assert sizes == [REMOTE_CHUNK, REMOTE_CHUNK, 10]


def test_remote_not_ready_is_unavailable(embed_stub):
    embed_stub.fail_status = 503
    with pytest.raises(ProviderUnavailable):
        RemoteProvider(embed_stub.url).embed_texts(["x"])


def test_remote_unreachable_is_unavailable(embed_stub):
    url = embed_stub.url
    embed_stub.close()
    with pytest.raises(ProviderUnavailable):
        RemoteProvider(url, timeout=2.0).embed_texts(["x"])


def test_remote_http_error_is_protocol_error(embed_stub):
    embed_stub.fail_status = 500
    with pytest.raises(ProtocolError):
        RemoteProvider(embed_stub.url).embed_texts(["x"])


def test_remote_count_mismatch_is_protocol_error(embed_stub):
    embed_stub.drop_rows = 1
    with pytest.raises(ProtocolError, match="asked for 2"):
        RemoteProvider(embed_stub.url).embed_texts(["x", "y"])


def test_remote_non_json_body_is_protocol_error(embed_stub):
    embed_stub.raw_body = b"<html>oops</html>"
    with pytest.raises(ProtocolError, match="non-JSON"):
        RemoteProvider(embed_stub.url).embed_texts(["x"])


def test_remote_missing_keys_is_protocol_error(embed_stub):
    embed_stub.raw_body = b'{"vectors": [[1, 2]]}'
    with pytest.raises(ProtocolError, match="malformed"):
        RemoteProvider(embed_stub.url).embed_texts(["x"])


def test_remote_healthcheck_reads_dim(embed_stub):
    provider = RemoteProvider(embed_stub.url)
    body = provider.healthcheck()
    assert body["status"] == "ok"
    assert provider.dim == embed_stub.dim


def test_remote_empty_batch_uses_healthz_dim(embed_stub):
    vectors = RemoteProvider(embed_stub.url).embed_texts([])
    assert vectors.shape == (0, embed_stub.dim)
