"""Sentence-embedding similarity scoring with a deterministic builtin.

The builtin provider hashes character 3-grams into 4096 buckets with the
FNV-1a 64-bit hash (see rng module) and L2-normalizes, so similarity
columns are reproducible with no model weights anywhere.  Texts shorter
than 3 characters contribute themselves as a single gram; empty text maps
to the zero vector.  A remote provider speaks the JSON batch protocol
(POST /embed) for real sentence encoders.
"""

from __future__ import annotations

import math
import time

import numpy as np

from .errors import ConfigError, MetricError, ProviderError
from .rng import fnv1a64

BUILTIN_DIM = 4096


def _char_trigrams(text: str) -> list:
    if len(text) >= 3:
        return [text[i : i + 3] for i in range(len(text) - 2)]
    return [text] if text else []


class BuiltinHashedNgram:
    """Deterministic hashed character-3-gram embedder."""

    name = "builtin_hashed_ngram"

    def __init__(self, dim: int = BUILTIN_DIM):
        self.dim = dim

    def embed(self, texts) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            for gram in _char_trigrams(text):
                out[row, fnv1a64(gram.encode("utf-8")) % self.dim] += 1.0
            norm = math.sqrt(float(np.dot(out[row], out[row])))
            if norm > 0.0:
                out[row] /= norm
        return out


class RemoteEmbedder:
    """HTTP batch embedding client for the POST /embed protocol."""

    name = "remote_http"

    def __init__(self, base_url: str, batch_size: int = 64, in_flight: int = 4,
                 timeout: float = 30.0, retries: int = 2):
        self.url = base_url.rstrip("/") + "/embed"
        self.batch_size = batch_size
        self.in_flight = in_flight
        self.timeout = timeout
        self.retries = retries
        self.dim = None  # discovered from the first response

    def _post_batch(self, args):
        import requests

        start, batch = args
        last_err = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(0.25 * (2 ** (attempt - 1)))
            try:
                resp = requests.post(self.url, json={"texts": batch}, timeout=self.timeout)
                resp.raise_for_status()
                body = resp.json()
                vectors = body["vectors"]
                dim = int(body["dim"])
                if len(vectors) != len(batch):
                    raise ValueError(f"expected {len(batch)} vectors, got {len(vectors)}")
                return start, dim, vectors
            except Exception as exc:
                last_err = exc
        raise ProviderError(
            f"embedding batch for texts[{start}:{start + len(batch)}] failed: {last_err}"
        ) from last_err

    def embed(self, texts) -> np.ndarray:
        texts = list(texts)
        if not texts:
            return np.zeros((0, self.dim or 0), dtype=np.float64)
        batches = [(i, texts[i : i + self.batch_size])
                   for i in range(0, len(texts), self.batch_size)]
        if len(batches) > 1 and self.in_flight > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=self.in_flight) as pool:
                results = list(pool.map(self._post_batch, batches))
        else:
            results = [self._post_batch(b) for b in batches]

        dims = {dim for _, dim, _ in results}
        if len(dims) != 1:
            raise ConfigError(f"embedding dimension changed across batches: {sorted(dims)}")
        dim = dims.pop()
        if self.dim is not None and dim != self.dim:
            raise ConfigError(f"embedder dimension changed between runs: {self.dim} -> {dim}")
        self.dim = dim
        out = np.zeros((len(texts), dim), dtype=np.float64)
        for start, _, vectors in results:
            for i, vec in enumerate(vectors):
                if len(vec) != dim:
                    raise ConfigError(f"vector {start + i} has length {len(vec)}, expected {dim}")
                out[start + i] = vec
        return out


def make_embedder(choice: str):
    """'builtin' or 'http:<base-url>'."""
    if choice == "builtin":
        return BuiltinHashedNgram()
    if choice.startswith("http:"):
        url = choice[len("http:"):]
        if not url.startswith(("http://", "https://")):
            url = "http://" + url.lstrip("/")
        return RemoteEmbedder(url)
    raise ConfigError(f"unknown embedder {choice!r}; expected 'builtin' or 'http:<url>'")


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise MetricError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.dot(a, a))
    nb = float(np.dot(b, b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    if np.array_equal(a, b):
        return 1.0  # avoid sqrt rounding away from exact unity
    value = float(np.dot(a, b)) / (math.sqrt(na) * math.sqrt(nb))
    return max(-1.0, min(1.0, value))


def similarity_corpus(candidates, references, provider, reduce: str = "max"):
    """(corpus mean, per-sample values); per sample reduce over references.

    candidates: list of caption strings; references: list of string lists.
    """
    if reduce not in ("max", "mean"):
        raise MetricError(f"unknown reduce {reduce!r}; expected 'max' or 'mean'")
    if len(candidates) != len(references):
        raise MetricError("candidates and references must align one-to-one")
    if not candidates:
        raise MetricError("similarity needs at least one sample")

    flat = list(candidates)
    for refs in references:
        flat.extend(refs)
    vectors = provider.embed(flat)

    per_sample = []
    offset = len(candidates)
    for i, refs in enumerate(references):
        values = [cosine(vectors[i], vectors[offset + j]) for j in range(len(refs))]
        offset += len(refs)
        if reduce == "max":
            per_sample.append(max(values))
        else:
            per_sample.append(math.fsum(values) / len(values))
    return math.fsum(per_sample) / len(per_sample), per_sample
