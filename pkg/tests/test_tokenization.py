from hypothesis import given, settings
from hypothesis import strategies as st

from capharness.tokenization import ngrams, tokenize


def test_basic_split_and_lowercase():
    assert tokenize("A Brown Dog") == ["a", "brown", "dog"]


def test_punctuation_separates():
    assert tokenize("red,green.blue") == ["red", "green", "blue"]
    assert tokenize("hello! (world)") == ["hello", "world"]


def test_intra_word_apostrophe_kept():
    assert tokenize("the dog's bone") == ["the", "dog's", "bone"]
    assert tokenize("don't stop") == ["don't", "stop"]


def test_edge_apostrophes_dropped():
    assert tokenize("'quoted'") == ["quoted"]
    assert tokenize("dogs' toys") == ["dogs", "toys"]


def test_unicode_apostrophe_folded():
    assert tokenize("don’t") == ["don't"]


def test_digits_are_tokens():
    assert tokenize("2 dogs and 10 cats") == ["2", "dogs", "and", "10", "cats"]


def test_empty_and_symbol_only():
    assert tokenize("") == []
    assert tokenize("?!;--") == []


def test_hyphen_splits():
    assert tokenize("ice-cream cone") == ["ice", "cream", "cone"]


@given(st.text(max_size=120))
@settings(max_examples=200)
def test_tokens_never_empty_and_never_contain_spaces(s):
    for tok in tokenize(s):
        assert tok
        assert " " not in tok
        assert tok == tok.lower()


@given(st.text(max_size=120))
def test_tokenize_idempotent_through_rejoin(s):
    toks = tokenize(s)
    assert tokenize(" ".join(toks)) == toks


def test_ngrams_small_cases():
    assert ngrams(["a", "b", "c"], 2) == [("a", "b"), ("b", "c")]
    assert ngrams(["a", "b", "c"], 1) == [("a",), ("b",), ("c",)]
    assert ngrams(["a"], 2) == []
    assert ngrams([], 1) == []


@given(st.lists(st.sampled_from(["a", "b", "c"]), max_size=12), st.integers(min_value=1, max_value=5))
def test_ngram_count(tokens, n):
    got = ngrams(tokens, n)
    assert len(got) == max(0, len(tokens) - n + 1)
    assert all(len(g) == n for g in got)
