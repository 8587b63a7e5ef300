"""Corpus and per-sample caption metrics over multi-reference sets.

All scoring happens on shared-tokenizer output.  Corpus aggregation uses
math.fsum, which is exactly rounded, so reordering pairs can never change
a reported score by even one bit.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path

from .errors import MetricError
from .stemmer import stem
from .tokenization import ngrams, tokenize

__all__ = [
    "EvalPair", "CorpusScores", "tokenize", "bleu", "meteor", "rouge_l",
    "cider", "score_corpus", "evaluate_pairs", "build_pairs", "load_synonyms",
]

CIDER_SIGMA = 6.0
ROUGE_BETA = 1.2


@dataclass
class EvalPair:
    sample_id: str
    candidate: list  # tokens
    references: list  # list of token lists

    def __post_init__(self):
        if not self.references:
            raise MetricError(f"sample {self.sample_id!r} has no references")

    @classmethod
    def from_text(cls, sample_id: str, candidate: str, references) -> "EvalPair":
        return cls(sample_id, tokenize(candidate), [tokenize(r) for r in references])


@dataclass
class CorpusScores:
    bleu1: float
    bleu2: float
    bleu3: float
    bleu4: float
    meteor: float
    rouge_l: float
    cider: float
    testlen: int
    reflen: int

    FIELDS = ("bleu1", "bleu2", "bleu3", "bleu4", "meteor", "rouge_l",
              "cider", "testlen", "reflen")

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusScores":
        return cls(**{name: d[name] for name in cls.FIELDS})


def build_pairs(manifest, captions_by_id: dict) -> list:
    """EvalPairs for every manifest sample with a caption, manifest order."""
    pairs = []
    for sample in manifest.samples:
        if sample.sample_id in captions_by_id:
            pairs.append(EvalPair.from_text(
                sample.sample_id, captions_by_id[sample.sample_id], sample.references))
    return pairs


# ---------------------------------------------------------------------------
# BLEU


def _closest_ref_len(cand_len: int, refs) -> int:
    # closest to the candidate; ties broken toward the shorter reference
    return min((abs(len(r) - cand_len), len(r)) for r in refs)[1]


def bleu(pairs, max_n: int = 4) -> dict:
    """Corpus BLEU-1..max_n with per-reference clipping, no smoothing."""
    if not pairs:
        raise MetricError("bleu needs at least one pair")
    testlen = sum(len(p.candidate) for p in pairs)
    if testlen == 0:
        raise MetricError("every candidate in the corpus is empty")
    reflen = sum(_closest_ref_len(len(p.candidate), p.references) for p in pairs)

    matched = [0] * max_n
    total = [0] * max_n
    for pair in pairs:
        for n in range(1, max_n + 1):
            cand_counts = Counter(ngrams(pair.candidate, n))
            if not cand_counts:
                continue
            allowed = Counter()
            for ref in pair.references:
                allowed |= Counter(ngrams(ref, n))
            matched[n - 1] += sum((cand_counts & allowed).values())
            total[n - 1] += sum(cand_counts.values())

    precisions = [m / t if t else 0.0 for m, t in zip(matched, total)]
    bp = 1.0 if testlen > reflen else math.exp(1.0 - reflen / testlen)
    out = {"testlen": testlen, "reflen": reflen, "precisions": precisions}
    for k in range(1, max_n + 1):
        head = precisions[:k]
        if 0.0 in head:
            out[f"bleu{k}"] = 0.0
        else:
            out[f"bleu{k}"] = bp * math.exp(math.fsum(map(math.log, head)) / k)
    return out


# ---------------------------------------------------------------------------
# METEOR (2005 parameterization: Fmean weight 9, penalty 0.5*(ch/m)^3)


def _align(cand, ref, synonyms):
    """Greedy staged unigram alignment -> matched (cand_pos, ref_pos) pairs.

    Stages run in order exact, stem, synonym; within a stage candidates are
    scanned left to right and each takes the first free reference position.
    """
    cand_free = [True] * len(cand)
    ref_free = [True] * len(ref)
    matches = []

    def run_stage(key_fn):
        open_positions = defaultdict(list)
        for j in range(len(ref) - 1, -1, -1):
            if ref_free[j]:
                open_positions[key_fn(ref[j])].append(j)  # reversed: pop() is smallest
        for i, token in enumerate(cand):
            if not cand_free[i]:
                continue
            stack = open_positions.get(key_fn(token))
            if stack:
                j = stack.pop()
                cand_free[i] = False
                ref_free[j] = False
                matches.append((i, j))

    run_stage(lambda t: t)
    run_stage(stem)
    if synonyms:
        for i, token in enumerate(cand):
            if not cand_free[i]:
                continue
            sets_c = synonyms.get(token)
            if not sets_c:
                continue
            for j in range(len(ref)):
                if ref_free[j] and sets_c & synonyms.get(ref[j], frozenset()):
                    cand_free[i] = False
                    ref_free[j] = False
                    matches.append((i, j))
                    break
    matches.sort()
    return matches


def _chunk_count(matches) -> int:
    chunks = 0
    prev_c, prev_r = -2, -2
    for ci, rj in matches:
        if ci != prev_c + 1 or rj != prev_r + 1:
            chunks += 1
        prev_c, prev_r = ci, rj
    return chunks


def meteor(pair: EvalPair, synonyms=None) -> float:
    """Score against the best reference; 0 when nothing aligns."""
    best = 0.0
    for ref in pair.references:
        if not pair.candidate or not ref:
            continue
        matches = _align(pair.candidate, ref, synonyms)
        m = len(matches)
        if m == 0:
            continue
        precision = m / len(pair.candidate)
        recall = m / len(ref)
        fmean = 10.0 * precision * recall / (recall + 9.0 * precision)
        penalty = 0.5 * (_chunk_count(matches) / m) ** 3
        best = max(best, fmean * (1.0 - penalty))
    return best


def load_synonyms(path: str | Path) -> dict:
    """Plain-text synonym resource: one whitespace-separated set per line.

    Returns token -> frozenset of line numbers (set ids); two tokens are
    synonymous when their id sets intersect.
    """
    table = defaultdict(set)
    for set_id, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        for token in line.split():
            table[token.lower()].add(set_id)
    return {token: frozenset(ids) for token, ids in table.items()}


# ---------------------------------------------------------------------------
# ROUGE-L


def _lcs(a, b) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        row = [0]
        for j, y in enumerate(b, start=1):
            row.append(prev[j - 1] + 1 if x == y else max(prev[j], row[j - 1]))
        prev = row
    return prev[-1]


def rouge_l(pair: EvalPair, beta: float = ROUGE_BETA) -> float:
    """Max over references of the LCS-based F score."""
    best = 0.0
    for ref in pair.references:
        lcs = _lcs(pair.candidate, ref)
        if lcs == 0:
            continue
        precision = lcs / len(pair.candidate)
        recall = lcs / len(ref)
        score = (1 + beta * beta) * precision * recall / (recall + beta * beta * precision)
        best = max(best, score)
    return best


# ---------------------------------------------------------------------------
# CIDEr


def _doc_frequencies(pairs, n: int) -> Counter:
    df = Counter()
    for pair in pairs:
        seen = set()
        for ref in pair.references:
            seen.update(ngrams(ref, n))
        df.update(seen)
    return df


def _weights(tokens, n: int, idf_of) -> dict:
    vec = {}
    for g, count in Counter(ngrams(tokens, n)).items():
        vec[g] = count * idf_of(g)
    return vec


def cider(pairs, variant: str = "d", sigma: float = CIDER_SIGMA):
    """Corpus score and per-pair scores; variant 'plain' in [0,1], 'd' in [0,10].

    A single-sample corpus scores 0 under both variants: with one document
    every in-reference IDF is ln(1) = 0, which zeroes the reference vectors.
    """
    if variant not in ("plain", "d"):
        raise MetricError(f"unknown cider variant {variant!r}; expected 'plain' or 'd'")
    if not pairs:
        raise MetricError("cider needs at least one pair")
    n_docs = len(pairs)
    idf_tables = []
    for n in range(1, 5):
        df = _doc_frequencies(pairs, n)
        idf_tables.append({g: math.log(n_docs / max(1, c)) for g, c in df.items()})
    unseen_idf = math.log(n_docs)  # df=0 floors to 1

    per_pair = []
    for pair in pairs:
        acc = 0.0
        for n in range(1, 5):
            idf_of = lambda g, table=idf_tables[n - 1]: table.get(g, unseen_idf)
            cvec = _weights(pair.candidate, n, idf_of)
            cnorm = math.sqrt(math.fsum(w * w for w in cvec.values()))
            ref_sum = 0.0
            for ref in pair.references:
                rvec = _weights(ref, n, idf_of)
                rnorm = math.sqrt(math.fsum(w * w for w in rvec.values()))
                if cnorm == 0.0 or rnorm == 0.0:
                    continue
                if variant == "plain":
                    dot = math.fsum(w * rvec[g] for g, w in cvec.items() if g in rvec)
                    ref_sum += dot / (cnorm * rnorm)
                else:
                    dot = math.fsum(min(w, rvec[g]) * rvec[g]
                                    for g, w in cvec.items() if g in rvec)
                    delta = len(pair.candidate) - len(ref)
                    gauss = math.exp(-(delta * delta) / (2.0 * sigma * sigma))
                    ref_sum += gauss * dot / (cnorm * rnorm)
            acc += ref_sum / len(pair.references)
        score = acc / 4.0
        if variant == "d":
            score *= 10.0
        per_pair.append(score)
    corpus = math.fsum(per_pair) / len(per_pair)
    return corpus, per_pair


# ---------------------------------------------------------------------------
# full corpus


def evaluate_pairs(pairs, cider_variant: str = "d", synonyms=None):
    """(CorpusScores, per-sample score dicts) in pair order."""
    bleu_scores = bleu(pairs, 4)
    meteor_vals = [meteor(p, synonyms) for p in pairs]
    rouge_vals = [rouge_l(p) for p in pairs]
    cider_corpus, cider_vals = cider(pairs, cider_variant)

    corpus = CorpusScores(
        bleu1=bleu_scores["bleu1"],
        bleu2=bleu_scores["bleu2"],
        bleu3=bleu_scores["bleu3"],
        bleu4=bleu_scores["bleu4"],
        meteor=math.fsum(meteor_vals) / len(pairs),
        rouge_l=math.fsum(rouge_vals) / len(pairs),
        cider=cider_corpus,
        testlen=bleu_scores["testlen"],
        reflen=bleu_scores["reflen"],
    )
    per_sample = [
        {
            "sample_id": p.sample_id,
            "meteor": meteor_vals[i],
            "rouge_l": rouge_vals[i],
            "cider": cider_vals[i],
            "testlen": len(p.candidate),
            "reflen": _closest_ref_len(len(p.candidate), p.references),
        }
        for i, p in enumerate(pairs)
    ]
    return corpus, per_sample


def score_corpus(pairs, cider_variant: str = "d", synonyms=None) -> CorpusScores:
    return evaluate_pairs(pairs, cider_variant=cider_variant, synonyms=synonyms)[0]
