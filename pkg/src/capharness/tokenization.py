"""Shared tokenizer for every text metric.

Lowercase, strip punctuation (apostrophes survive only between two
word characters), split on whitespace.  Deliberately more aggressive than
caption normalization: commas and periods survive normalization but never
become part of n-grams.
"""

from __future__ import annotations


def tokenize(text: str) -> list:
    """Lowercased whitespace tokens with punctuation stripped."""
    text = text.lower().replace("’", "'")
    out = []
    n = len(text)
    for i, ch in enumerate(text):
        if ch.isalnum():
            out.append(ch)
        elif ch == "'":
            if 0 < i < n - 1 and text[i - 1].isalnum() and text[i + 1].isalnum():
                out.append(ch)
        else:
            out.append(" ")  # punctuation and all whitespace
    return "".join(out).split()


def ngrams(tokens, n: int):
    """All contiguous n-grams as tuples, in order."""
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]
