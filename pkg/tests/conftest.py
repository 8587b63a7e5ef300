import json
from pathlib import Path

import pytest

from capharness.datasets import load_manifest
from capharness.lexical import EvalPair, load_synonyms
from capharness.raster import Raster
from capharness.tokenization import tokenize

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def test_image() -> Raster:
    return Raster.load(FIXTURES / "test_image.png")


@pytest.fixture(scope="session")
def tiny_manifest():
    return load_manifest(FIXTURES / "tiny" / "manifest.jsonl")


@pytest.fixture(scope="session")
def oracle_corpus():
    """The frozen 5-sample corpus: list of (sample_id, candidate text, reference texts)."""
    return json.loads((FIXTURES / "oracle_corpus.json").read_text())


@pytest.fixture(scope="session")
def oracle_pairs(oracle_corpus):
    return [
        EvalPair(
            sample_id=p["sample_id"],
            candidate=tokenize(p["candidate"]),
            references=[tokenize(r) for r in p["references"]],
        )
        for p in oracle_corpus
    ]


@pytest.fixture(scope="session")
def synonym_table():
    return load_synonyms(FIXTURES / "synonyms.txt")
