import math

import numpy as np
import pytest

from capharness.errors import ConfigError, MetricError, ProviderError
from capharness.similarity import (
    BUILTIN_DIM,
    BuiltinHashedNgram,
    RemoteEmbedder,
    cosine,
    make_embedder,
    similarity_corpus,
)
from stub_service import StubService

FROZEN_SIMILARITY = 0.58072543351794592
TOL = 1e-12


# --- builtin embedder --------------------------------------------------------


def test_builtin_shape_and_determinism():
    e = BuiltinHashedNgram()
    v1 = e.embed(["a dog runs", "two cats"])
    v2 = e.embed(["a dog runs", "two cats"])
    assert v1.shape == (2, BUILTIN_DIM)
    assert np.array_equal(v1, v2)


def test_builtin_rows_are_unit_norm():
    v = BuiltinHashedNgram().embed(["some caption text", "x"])
    for row in v:
        assert abs(float(np.dot(row, row)) - 1.0) < TOL


def test_builtin_empty_text_is_zero_vector():
    v = BuiltinHashedNgram().embed([""])
    assert not np.any(v)


def test_builtin_short_text_uses_whole_text_gram():
    e = BuiltinHashedNgram()
    v = e.embed(["ab"])
    assert np.count_nonzero(v) == 1
    assert not np.array_equal(v, e.embed(["ba"]))


def test_builtin_distinct_texts_differ():
    e = BuiltinHashedNgram()
    assert not np.array_equal(e.embed(["a dog"]), e.embed(["a cat"]))


# --- cosine ------------------------------------------------------------------


def test_cosine_identical_vectors_exactly_one():
    v = BuiltinHashedNgram().embed(["any caption"])[0]
    assert cosine(v, v) == 1.0
    assert cosine(v, v.copy()) == 1.0


def test_cosine_orthogonal_is_zero():
    assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0


def test_cosine_opposite_is_near_minus_one():
    v = np.array([0.3, -0.4, 0.5])
    value = cosine(v, -v)
    assert -1.0 <= value < -1.0 + 1e-12


def test_cosine_zero_vector_scores_zero():
    assert cosine(np.zeros(4), np.array([1.0, 0, 0, 0])) == 0.0


def test_cosine_dimension_mismatch_rejected():
    with pytest.raises(MetricError):
        cosine(np.zeros(4), np.zeros(5))


def test_cosine_clamped_to_unit_interval():
    # scaled copies are mathematically colinear; rounding must not push the
    # value past 1
    v = np.array([1e-8, 2e-8, 3e-8])
    assert -1.0 <= cosine(v, v * 3.0) <= 1.0


# --- corpus scoring ----------------------------------------------------------


def test_similarity_identity_corpus_is_one():
    provider = BuiltinHashedNgram()
    mean, per = similarity_corpus(
        ["a dog runs", "two cats"],
        [["a dog runs"], ["two cats", "unrelated"]],
        provider,
    )
    assert mean == 1.0 and per == [1.0, 1.0]


def test_similarity_mean_reduce_below_max(oracle_corpus):
    provider = BuiltinHashedNgram()
    cands = [p["candidate"] for p in oracle_corpus]
    refs = [p["references"] for p in oracle_corpus]
    mx, _ = similarity_corpus(cands, refs, provider, reduce="max")
    mn, _ = similarity_corpus(cands, refs, provider, reduce="mean")
    assert mn < mx


def test_similarity_frozen_corpus_value(oracle_corpus):
    provider = BuiltinHashedNgram()
    cands = [p["candidate"] for p in oracle_corpus]
    refs = [p["references"] for p in oracle_corpus]
    mean, per = similarity_corpus(cands, refs, provider)
    assert abs(mean - FROZEN_SIMILARITY) < TOL
    assert len(per) == len(cands)


def test_similarity_validates_arguments():
    provider = BuiltinHashedNgram()
    with pytest.raises(MetricError):
        similarity_corpus(["a"], [["b"]], provider, reduce="median")
    with pytest.raises(MetricError):
        similarity_corpus(["a", "b"], [["c"]], provider)
    with pytest.raises(MetricError):
        similarity_corpus([], [], provider)


def test_make_embedder_choices():
    assert isinstance(make_embedder("builtin"), BuiltinHashedNgram)
    remote = make_embedder("http:localhost:9999")
    assert isinstance(remote, RemoteEmbedder)
    assert remote.url == "http://localhost:9999/embed"
    with pytest.raises(ConfigError):
        make_embedder("word2vec")


# --- remote embedder over real sockets ---------------------------------------


def test_remote_embedder_round_trip():
    with StubService(dim=6) as url:
        e = RemoteEmbedder(url)
        v = e.embed(["alpha", "beta", "alpha"])
        assert v.shape == (3, 6)
        assert np.array_equal(v[0], v[2])
        assert not np.array_equal(v[0], v[1])
        assert e.dim == 6


def test_remote_embedder_batches_preserve_order():
    svc = StubService(dim=4)
    with svc as url:
        e = RemoteEmbedder(url, batch_size=2, in_flight=2)
        texts = [f"text {i}" for i in range(7)]
        got = e.embed(texts)
        one = RemoteEmbedder(url, batch_size=64).embed(texts)
        assert np.array_equal(got, one)
    sizes = [len(b["texts"]) for b in svc.bodies("/embed")]
    assert sorted(sizes)[-4:] == [2, 2, 2, 2] or sizes.count(2) >= 3


def test_remote_embedder_retries_through_transient_failure():
    svc = StubService(dim=4, fail_first=1)
    with svc as url:
        v = RemoteEmbedder(url, retries=2).embed(["hello"])
        assert v.shape == (1, 4)
    assert len(svc.bodies("/embed")) == 2


def test_remote_embedder_exhausted_retries_name_the_slice():
    with StubService(dim=4, fail_first=100) as url:
        with pytest.raises(ProviderError) as exc:
            RemoteEmbedder(url, retries=1, batch_size=8).embed(["a", "b", "c"])
        assert "texts[0:3]" in str(exc.value)


def test_remote_embedder_ragged_vector_rejected():
    svc = StubService(dim=4)
    svc.embed_fn = lambda t: [0.0] * (3 if t == "odd" else 4)
    with svc as url:
        with pytest.raises(ConfigError):
            RemoteEmbedder(url).embed(["fine", "odd"])


def test_similarity_corpus_via_remote(oracle_corpus):
    # remote transport must not change scores; serve the builtin embedding
    # over the wire and compare with in-process scoring
    builtin = BuiltinHashedNgram()
    svc = StubService(dim=BUILTIN_DIM)
    svc.embed_fn = lambda t: builtin.embed([t])[0].tolist()
    cands = [p["candidate"] for p in oracle_corpus]
    refs = [p["references"] for p in oracle_corpus]
    with svc as url:
        remote_mean, _ = similarity_corpus(cands, refs, RemoteEmbedder(url, batch_size=5))
    local_mean, _ = similarity_corpus(cands, refs, builtin)
    assert abs(remote_mean - local_mean) < 1e-9
